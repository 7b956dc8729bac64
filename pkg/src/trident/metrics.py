"""Departure-stream accounting: throughput, delays, order violations.

Delays are raw sojourn times (departure slot minus arrival slot); the
fixed 2-slot pipeline latency of the fabric is included, not subtracted.
Order violations are counted over the whole run; delay and throughput
statistics cover only cells whose arrival slot falls inside the
measurement window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class RunMetrics:
    """Summary of one simulation run over its measurement window."""

    offered_cells: int
    delivered_cells: int
    throughput: Optional[float]  # None when nothing was offered
    mean_delay: Optional[float]
    p99_delay: Optional[int]
    max_delay: Optional[int]
    max_vimoq_occ: int
    max_cb_occ: int
    violations: int


class DepartureRecorder:
    """Accumulates departures; per-flow tag order is checked on every cell.

    With window=(start, stop) the recorder streams windowed statistics and
    never retains per-cell data (use this for long runs).  Without a window
    it retains (arrival, delay) pairs and the window is chosen at
    finalize().
    """

    def __init__(self, n_ports: int, window: Optional[tuple[int, int]] = None):
        self.n_ports = n_ports
        self.window = window
        self.violations = 0
        self.total_departures = 0
        self._last_seq = [0] * (n_ports * n_ports)  # tags start at 1; 0 = unseen
        self._delivered = 0
        self._delay_sum = 0
        self._max_delay = -1
        self._hist: dict[int, int] = {}
        self._retained: list[tuple[int, int]] = []

    def record(self, slot: int, u: int, v: int, seq: int, arrival_slot: int) -> None:
        if slot < arrival_slot:
            raise ValueError(f"departure at slot {slot} precedes arrival at {arrival_slot}")
        flow = v * self.n_ports + u
        if seq <= self._last_seq[flow]:
            self.violations += 1
        self._last_seq[flow] = seq
        self.total_departures += 1
        if self.window is None:
            self._retained.append((arrival_slot, slot - arrival_slot))
        elif self.window[0] <= arrival_slot < self.window[1]:
            self._tally(slot - arrival_slot)

    def record_batch(self, slot: int, departures: Iterable[tuple[int, int, int, int]]) -> None:
        window = self.window
        if window is None:
            for u, v, seq, arr in departures:
                self.record(slot, u, v, seq, arr)
            return
        w0, w1 = window
        last_seq = self._last_seq
        n = self.n_ports
        hist = self._hist
        count = 0
        delivered = self._delivered
        delay_sum = self._delay_sum
        max_delay = self._max_delay
        for u, v, seq, arr in departures:
            count += 1
            flow = v * n + u
            if seq <= last_seq[flow]:
                self.violations += 1
            last_seq[flow] = seq
            if w0 <= arr < w1:
                delay = slot - arr
                delivered += 1
                delay_sum += delay
                hist[delay] = hist.get(delay, 0) + 1
                if delay > max_delay:
                    max_delay = delay
        self.total_departures += count
        self._delivered = delivered
        self._delay_sum = delay_sum
        self._max_delay = max_delay

    def _tally(self, delay: int) -> None:
        self._delivered += 1
        self._delay_sum += delay
        self._hist[delay] = self._hist.get(delay, 0) + 1
        if delay > self._max_delay:
            self._max_delay = delay

    @property
    def delivered_in_window(self) -> int:
        if self.window is None:
            raise ValueError("delivered_in_window requires a streaming window")
        return self._delivered

    def finalize(
        self,
        warmup_slots: int,
        measure_slots: int,
        *,
        offered_cells: int,
        max_vimoq_occ: int = 0,
        max_cb_occ: int = 0,
    ) -> RunMetrics:
        """Compute windowed statistics for arrivals in [warmup, warmup+measure)."""
        if measure_slots <= 0:
            raise ValueError(f"measurement window must be nonempty, got {measure_slots} slots")
        if self.window is not None:
            if self.window != (warmup_slots, warmup_slots + measure_slots):
                raise ValueError(
                    f"finalize window {(warmup_slots, warmup_slots + measure_slots)} "
                    f"differs from streaming window {self.window}"
                )
        else:
            w0, w1 = warmup_slots, warmup_slots + measure_slots
            for arr, delay in self._retained:
                if w0 <= arr < w1:
                    self._tally(delay)
            self._retained.clear()
            self.window = (w0, w1)
        delivered = self._delivered
        if delivered:
            rank = -(-99 * delivered // 100)  # ceil, nearest-rank percentile
            seen = 0
            p99 = None
            for delay in sorted(self._hist):
                seen += self._hist[delay]
                if seen >= rank:
                    p99 = delay
                    break
            mean = self._delay_sum / delivered
            max_delay = self._max_delay
        else:
            p99 = None
            mean = None
            max_delay = None
        return RunMetrics(
            offered_cells=offered_cells,
            delivered_cells=delivered,
            throughput=(delivered / offered_cells) if offered_cells else None,
            mean_delay=mean,
            p99_delay=p99,
            max_delay=max_delay,
            max_vimoq_occ=max_vimoq_occ,
            max_cb_occ=max_cb_occ,
            violations=self.violations,
        )
