"""Ideal output-queued reference switch.

Every arrival lands in its destination port's FIFO in the arrival slot
(effective speedup N); each nonempty port emits one head cell per slot,
before the slot's arrivals are appended, so a cell departs at the earliest
one slot after it arrives.  Per-flow order is trivially preserved and the
mean delay lower-bounds any fabric fed the same arrival trace.
"""

from __future__ import annotations

from collections import deque

from .geometry import SwitchDims
from .fabric import Departure


class OqSwitch:
    """Per-output FIFOs with one departure per port per slot."""

    def __init__(self, dims: SwitchDims):
        self.dims = dims
        self.slot = 0
        self.injected = 0
        self.departed = 0
        self.max_oq_occ = 0
        self._queues: list[deque] = [deque() for _ in range(dims.N)]
        self._seq_next = [[1] * dims.N for _ in range(dims.N)]

    def step(self, arrivals: list[tuple[int, int]]) -> list[Departure]:
        N = self.dims.N
        departures: list[Departure] = []
        for q in self._queues:
            if q:
                departures.append(q.popleft())
        self.departed += len(departures)
        # Same-slot ties join their FIFO in ascending input order.
        seen: set[int] = set()
        t = self.slot
        for u, v in sorted(arrivals):
            if not (0 <= u < N and 0 <= v < N):
                raise ValueError(f"arrival ({u}, {v}) out of range for N={N}")
            if u in seen:
                raise ValueError(f"two arrivals at input {u} in one slot")
            seen.add(u)
            seq = self._seq_next[u][v]
            self._seq_next[u][v] = seq + 1
            q = self._queues[v]
            q.append((u, v, seq, t))
            if len(q) > self.max_oq_occ:
                self.max_oq_occ = len(q)
        self.injected += len(arrivals)
        self.slot += 1
        return departures

    @property
    def resident_cells(self) -> int:
        return self.injected - self.departed
