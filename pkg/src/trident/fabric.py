"""Slot-by-slot data path of the three-stage load-balanced switch.

Pipeline per slot, in order: inject (tag cells with per-flow arrival order),
IM traversal into the mid-stage queues (VIMOQs), CM traversal into the
output-module crosspoint buffers (CBs), then output arbitration.  A cell
crosses at most one stage boundary per slot after entering a queue: a cell
enqueued at slot t becomes eligible for the next stage at slot t+1.  With
arrival and IM traversal sharing the injection slot this gives a minimum
sojourn of 2 slots (VIMOQ at t, CB at t+1, out at t+2).

Queue layout (flat indices, n = k = m, N = n*k):
  VIMOQ(r, i, j, d): cells from IM(i) at CM(r) destined to OP(j, d).
      At slot t, input i of CM(r) reaches OM j = (i - t + r) mod k; the n
      VIMOQs sharing that link-slot are arbitrated round-robin over d.
  CB(r, j, d, i, s): per-flow, per-CM FIFO at the output module.
      Each OP serves at most one cell per slot, scanning flows round-robin
      and releasing a cell only when its tag matches the flow's expected
      arrival order, which keeps every flow in sequence.

All per-slot bookkeeping is bitmask-based so the cost of a slot scales
with the number of cells that actually move, not with fabric size: each
OP keeps a ready mask over flows (bit set exactly when the flow's
next-expected cell heads one of its k CBs and is old enough to move), each
CM link keeps a nonempty mask over the n queues it serves, and per-phase
link masks and a ready-port mask let idle links and ports be skipped
wholesale.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from .geometry import PortAddress, SwitchDims

# Departure record: (input u, output v, sequence tag, arrival slot).
Departure = tuple[int, int, int, int]

VimoqServeHook = Callable[[int, int, int, int, int, int, int, int], None]


@dataclass(frozen=True)
class Cell:
    """A fixed-size cell: flow identity, per-flow order tag, arrival time."""

    src: PortAddress
    dst: PortAddress
    seq: int
    arrival_slot: int


class TridentFabric:
    """Mutable switch state plus the four per-slot phases.

    A fabric instance is single-threaded state; run independent instances
    for concurrent simulations.  cb_capacity limits each crosspoint buffer
    (None = unbounded); when a target CB is full the VIMOQ head is held
    back by the credit gate.  on_vimoq_serve, when set, is called as
    (slot, r, p, j, d, u, v, seq) for every VIMOQ departure, for trace
    audits.
    """

    def __init__(
        self,
        dims: SwitchDims,
        cb_capacity: Optional[int] = None,
        on_vimoq_serve: Optional[VimoqServeHook] = None,
    ):
        if cb_capacity is not None and cb_capacity < 1:
            raise ValueError(f"cb_capacity must be >= 1 or None, got {cb_capacity}")
        self.dims = dims
        self.cb_capacity = cb_capacity
        self.on_vimoq_serve = on_vimoq_serve
        n, k, m, N = dims.n, dims.k, dims.m, dims.N
        self.slot = 0
        self.injected = 0
        self.departed = 0
        self.max_vimoq_occ = 0
        self.max_cb_occ = 0
        self._staged: list[list] = []  # mutable cells [seq, arrival_slot, src_local]
        self._staged_inputs: set[int] = set()
        self._staged_dst: list[tuple[int, int]] = []  # (u, v) alongside _staged
        # VIMOQ deques of cells; index ((r*k + i)*k + j)*n + d.  Group
        # (r, i, j) keeps a nonempty bitmask over d and a round-robin
        # pointer; each group is wired to one link-slot of the k-slot CM
        # cycle (phase (i - j + r) mod k).
        self._vimoqs: list[deque] = [deque() for _ in range(N * N)]
        self._vq_mask = [0] * (m * k * k)
        self._vq_rr = [0] * (m * k * k)
        self._cm_active = [0] * k  # per phase: bitmask over links r*k + p
        # CBs: flat list keyed (v*N + u)*k + r, deques of cells
        # [seq, arrival_slot, enq_slot]; created on first use.  cb_mask[f]
        # tracks which of flow f's k CBs are nonempty.
        self._cbs: list[Optional[deque]] = [None] * (N * N * k)
        self._cb_mask = [0] * (N * N)
        # Output arbiters.
        self._expected = [[1] * N for _ in range(N)]
        self._ready_mask = [0] * N
        self._ready_ops = 0  # bitmask over v: ready_mask[v] != 0
        self._ready_r = [[-1] * N for _ in range(N)]
        self._rr_out = [0] * N
        self._pending: list[tuple[int, int, int, int]] = []  # (v, u, r, seq)
        self._seq_next = [[1] * N for _ in range(N)]  # [u][v]
        # Static index tables (u = i*k + s, v = j*m + d).
        self._s_of = [u % k for u in range(N)]
        self._u_voff = [(u // k) * k * n for u in range(N)]  # i*k*n
        self._u_goff = [(u // k) * k for u in range(N)]  # i*k
        self._v_voff = [(v // m) * n + (v % m) for v in range(N)]  # j*n + d
        self._v_j = [v // m for v in range(N)]
        self._v_bit = [1 << (v % m) for v in range(N)]
        self._g_phase = [0] * (m * k * k)
        self._g_bit = [0] * (m * k * k)
        # CM service plan per schedule phase: (group, queue base, r, p*k, j*m).
        self._cm_plan: list[list[tuple[int, int, int, int, int]]] = []
        for ph in range(k):
            plan = []
            for r in range(m):
                for p in range(k):
                    j = (p - ph + r) % k
                    g = (r * k + p) * k + j
                    plan.append((g, g * n, r, p * k, j * m))
                    self._g_phase[g] = ph
                    self._g_bit[g] = 1 << (r * k + p)
            self._cm_plan.append(plan)
        self._full_n = (1 << n) - 1
        self._full_N = (1 << N) - 1

    # -- phases ---------------------------------------------------------

    def inject(self, arrivals: list[tuple[int, int]]) -> None:
        """Stage one tagged cell per arriving (u, v); one arrival per input.

        A rejected batch (input out of range, or two arrivals at one input)
        leaves the fabric untouched.
        """
        N = self.dims.N
        seen = self._staged_inputs
        seq_next = self._seq_next
        staged = self._staged
        staged_dst = self._staged_dst
        undo = len(staged)
        try:
            for u, v in arrivals:
                if not (0 <= u < N and 0 <= v < N):
                    raise ValueError(f"arrival ({u}, {v}) out of range for N={N}")
                if u in seen:
                    raise ValueError(f"two arrivals at input {u} in one slot")
                seen.add(u)
                row = seq_next[u]
                seq = row[v]
                row[v] = seq + 1
                staged.append([seq, 0, self._s_of[u]])
                staged_dst.append((u, v))
        except ValueError:
            for (u, v), _cell in zip(staged_dst[undo:], staged[undo:]):
                seen.discard(u)
                self._seq_next[u][v] -= 1
            del staged[undo:]
            del staged_dst[undo:]
            raise
        self.injected += len(staged) - undo

    def im_phase(self) -> None:
        """Move staged cells through the IMs into their VIMOQs."""
        staged = self._staged
        if not staged:
            return
        t = self.slot
        m = self.dims.m
        t_mod = t % m
        r_step = self.dims.k * self.dims.k * self.dims.n
        u_voff = self._u_voff
        u_goff = self._u_goff
        v_voff = self._v_voff
        v_j = self._v_j
        v_bit = self._v_bit
        vimoqs = self._vimoqs
        vq_mask = self._vq_mask
        cm_active = self._cm_active
        g_phase = self._g_phase
        g_bit = self._g_bit
        kk = self.dims.k * self.dims.k
        max_occ = self.max_vimoq_occ
        for cell, (u, v) in zip(staged, self._staged_dst):
            s = cell[2]
            cell[1] = t
            r = s + t_mod
            if r >= m:
                r -= m
            q = vimoqs[r * r_step + u_voff[u] + v_voff[v]]
            q.append(cell)
            g = r * kk + u_goff[u] + v_j[v]
            old = vq_mask[g]
            if not old:
                cm_active[g_phase[g]] |= g_bit[g]
            vq_mask[g] = old | v_bit[v]
            if len(q) > max_occ:
                max_occ = len(q)
        self.max_vimoq_occ = max_occ
        staged.clear()
        self._staged_dst.clear()
        self._staged_inputs.clear()

    def cm_phase(self) -> None:
        """Serve each CM link: pick one eligible VIMOQ head round-robin.

        A head is eligible when it was enqueued before this slot and its
        target CB has credit.  At most one cell crosses each CM link.
        """
        t = self.slot
        k = self.dims.k
        n = self.dims.n
        N = self.dims.N
        ph = t % k
        links = self._cm_active[ph]
        if not links:
            return
        cap = self.cb_capacity
        full_n = self._full_n
        vimoqs = self._vimoqs
        vq_mask = self._vq_mask
        vq_rr = self._vq_rr
        cbs = self._cbs
        cb_mask = self._cb_mask
        pending = self._pending
        hook = self.on_vimoq_serve
        plan = self._cm_plan[ph]
        max_occ = self.max_cb_occ
        while links:
            low = links & -links
            links -= low
            g, qbase, r, pk, jm = plan[low.bit_length() - 1]
            avail = vq_mask[g]
            ptr = vq_rr[g]
            while avail:
                rot = ((avail >> ptr) | (avail << (n - ptr))) & full_n
                d = ptr + (rot & -rot).bit_length() - 1
                if d >= n:
                    d -= n
                q = vimoqs[qbase + d]
                cell = q[0]
                if cell[1] >= t:  # enqueued this slot; rests one slot minimum
                    avail &= ~(1 << d)
                    continue
                s = cell[2]
                u = pk + s
                v = jm + d
                fm = v * N + u
                key = fm * k + r
                cbq = cbs[key]
                if cbq is None:
                    cbq = deque()
                    cbs[key] = cbq
                elif cap is not None and len(cbq) >= cap:
                    avail &= ~(1 << d)  # credit gate: CB full
                    continue
                q.popleft()
                if not q:
                    mask = vq_mask[g] & ~(1 << d)
                    vq_mask[g] = mask
                    if not mask:
                        self._cm_active[ph] &= ~self._g_bit[g]
                vq_rr[g] = d + 1 if d + 1 < n else 0
                if not cbq:
                    cb_mask[fm] |= 1 << r
                cell[2] = t  # src slot no longer needed; reuse as CB entry time
                cbq.append(cell)
                if len(cbq) > max_occ:
                    max_occ = len(cbq)
                pending.append((v, u, r, cell[0]))
                if hook is not None:
                    hook(t, r, pk // k, jm // self.dims.m, d, u, v, cell[0])
                break
        self.max_cb_occ = max_occ

    def output_phase(self) -> list[Departure]:
        """Each OP releases at most one in-order cell, flows scanned round-robin.

        Completes the slot's arbiter bookkeeping: cells that reached a CB
        this slot become visible to the arbiter for the next slot.
        """
        t = self.slot
        k = self.dims.k
        N = self.dims.N
        full_N = self._full_N
        cbs = self._cbs
        cb_mask = self._cb_mask
        ready_mask = self._ready_mask
        rr_out = self._rr_out
        expected = self._expected
        ready_r = self._ready_r
        departures: list[Departure] = []
        append = departures.append
        ops = self._ready_ops
        while ops:
            low_v = ops & -ops
            ops -= low_v
            v = low_v.bit_length() - 1
            mask = ready_mask[v]
            ptr = rr_out[v]
            rot = ((mask >> ptr) | (mask << (N - ptr))) & full_N
            u = ptr + (rot & -rot).bit_length() - 1
            if u >= N:
                u -= N
            fm = v * N + u
            base = fm * k
            rr_v = ready_r[v]
            r = rr_v[u]
            cbq = cbs[base + r]
            cell = cbq.popleft()
            seq = cell[0]
            append((u, v, seq, cell[1]))
            if not cbq:
                cb_mask[fm] &= ~(1 << r)
            want = seq + 1
            expected[v][u] = want
            rr_out[v] = u + 1 if u + 1 < N else 0
            mask &= ~(1 << u)
            rr_v[u] = -1
            # Re-arm the flow if its next-expected cell already heads a CB
            # (tags below `want` have all departed, so a head either equals
            # `want` or the expected cell has not reached a CB yet).
            bm = cb_mask[fm]
            while bm:
                low = bm & -bm
                head = cbs[base + low.bit_length() - 1][0]
                if head[0] == want:
                    if head[2] < t:
                        mask |= 1 << u
                        rr_v[u] = low.bit_length() - 1
                    break
                bm -= low
            ready_mask[v] = mask
            if not mask:
                self._ready_ops &= ~low_v
        self.departed += len(departures)
        pending = self._pending
        if pending:
            ready_ops = self._ready_ops
            for v, u, r, seq in pending:
                if expected[v][u] == seq and not (ready_mask[v] & (1 << u)):
                    ready_mask[v] |= 1 << u
                    ready_ops |= 1 << v
                    ready_r[v][u] = r
            self._ready_ops = ready_ops
            pending.clear()
        return departures

    def step(self, arrivals: list[tuple[int, int]]) -> list[Departure]:
        """Run one full slot: inject, IM, CM, output; then advance the clock."""
        self.inject(arrivals)
        self.im_phase()
        self.cm_phase()
        departures = self.output_phase()
        self.slot += 1
        return departures

    def advance_slot(self) -> None:
        """Manual-phase counterpart of the clock advance done by step()."""
        self.slot += 1

    # -- inspection -----------------------------------------------------

    @property
    def resident_cells(self) -> int:
        """Cells currently inside the fabric (conservation counter)."""
        return self.injected - self.departed

    def scan_resident_cells(self) -> int:
        """Count resident cells by walking every queue (slow; for audits)."""
        total = len(self._staged)
        total += sum(len(q) for q in self._vimoqs)
        total += sum(len(q) for q in self._cbs if q)
        return total

    def vimoq_cells(self, r: int, i: int, j: int, d: int) -> list[Cell]:
        k, n = self.dims.k, self.dims.n
        q = self._vimoqs[(((r * k + i) * k + j) * n) + d]
        return [
            Cell(PortAddress(i, s), PortAddress(j, d), seq, arr) for (seq, arr, s) in q
        ]

    def cb_cells(self, r: int, j: int, d: int, i: int, s: int) -> list[Cell]:
        k, m, N = self.dims.k, self.dims.m, self.dims.N
        u = i * k + s
        v = j * m + d
        q = self._cbs[(v * N + u) * k + r]
        if not q:
            return []
        return [
            Cell(PortAddress(i, s), PortAddress(j, d), seq, arr) for (seq, arr, _enq) in q
        ]

    def iter_cb_queues(self) -> Iterator[tuple[int, int, int, list[list]]]:
        """Yield (v, u, r, cells) for every nonempty crosspoint buffer."""
        k, N = self.dims.k, self.dims.N
        for key, q in enumerate(self._cbs):
            if q:
                vu, r = divmod(key, k)
                v, u = divmod(vu, N)
                yield v, u, r, list(q)

    def check_cb_flow_order(self) -> None:
        """Assert tags inside every CB are increasing front-to-back."""
        for v, u, r, cells in self.iter_cb_queues():
            seqs = [c[0] for c in cells]
            if any(b <= a for a, b in zip(seqs, seqs[1:])):
                raise AssertionError(f"out-of-order tags in CB (v={v}, u={u}, r={r}): {seqs}")

    def expected_seq(self, v: int, u: int) -> int:
        return self._expected[v][u]
