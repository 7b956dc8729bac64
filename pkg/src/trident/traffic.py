"""Per-slot arrival generation for the four workload models.

All models emit at most one cell per input per slot.  Each input owns an
independent substream spawned from the run seed, so arrival streams are
reproducible and statistically independent across inputs.  Generation is
done in fixed-width blocks of slots to keep the per-slot cost small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SwitchDims

UNIFORM = "uniform_bernoulli"
BURSTY = "bursty_onoff"
UNBALANCED = "unbalanced"
HOTSPOT = "hotspot_per_port"
MODELS = (UNIFORM, BURSTY, UNBALANCED, HOTSPOT)

ADMISSIBILITY_TOL = 1e-9

_BLOCK_SLOTS = 4096


@dataclass(frozen=True)
class TrafficSpec:
    """Workload description: model, offered load, and model parameters.

    load is the per-input offered load in cells/slot.  omega skews traffic
    toward each input's paired output (unbalanced and hotspot models);
    burst_len is the mean ON-period length in cells (bursty model).
    """

    model: str
    load: float
    omega: float = 0.0
    burst_len: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown traffic model {self.model!r}; expected one of {MODELS}")
        if not 0.0 <= self.load <= 1.0:
            raise ValueError(f"load must be in [0, 1], got {self.load}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must be in [0, 1], got {self.omega}")
        if self.burst_len < 1.0:
            raise ValueError(f"burst_len must be >= 1, got {self.burst_len}")

    def with_seed(self, seed: int) -> "TrafficSpec":
        return TrafficSpec(self.model, self.load, self.omega, self.burst_len, seed)


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    max_row_sum: float
    max_col_sum: float


def check_admissible(rates: np.ndarray, tol: float = ADMISSIBILITY_TOL) -> AdmissibilityReport:
    """True iff no input row and no output column is oversubscribed (sum <= 1)."""
    rates = np.asarray(rates, dtype=np.float64)
    if (rates < 0).any():
        raise ValueError("rate matrix entries must be nonnegative")
    max_row = float(rates.sum(axis=1).max())
    max_col = float(rates.sum(axis=0).max())
    return AdmissibilityReport(max_row <= 1.0 + tol and max_col <= 1.0 + tol, max_row, max_col)


def paired_output(u: int, dims: SwitchDims) -> int:
    """Preferred output of input u for the skewed models: IP(i, s) -> OP(s, i).

    The pairing transposes the (module, local) coordinates, so the n skewed
    flows of one input module fan out to n distinct output modules.  Any
    pairing that sends a module's inputs to a single output module would
    oversubscribe that module pair: the periodic schedule gives each
    (input module, output module) pair exactly one cell slot per slot.
    """
    return (u % dims.k) * dims.m + u // dims.k


def rate_matrix(spec: TrafficSpec, dims: SwitchDims) -> np.ndarray:
    """Long-run per-flow arrival rates for the given workload.

    Uniform and bursty share the same flat matrix load/N; unbalanced and
    hotspot put load*omega extra weight on each input's paired output on
    top of a uniform load*(1-omega)/N floor.
    """
    N = dims.N
    if spec.model in (UNIFORM, BURSTY):
        return np.full((N, N), spec.load / N)
    mat = np.full((N, N), spec.load * (1.0 - spec.omega) / N)
    for u in range(N):
        mat[u, paired_output(u, dims)] += spec.load * spec.omega
    return mat


class ArrivalGenerator:
    """Stateful per-slot arrival source; slots must be consumed in order.

    arrivals(t) returns [(u, v), ...] with flat input and output indices,
    at most one entry per input.
    """

    def __init__(self, spec: TrafficSpec, dims: SwitchDims):
        self.spec = spec
        self.dims = dims
        self._streams = [
            np.random.Generator(np.random.PCG64(ss))
            for ss in np.random.SeedSequence(spec.seed).spawn(dims.N)
        ]
        # Bursty model: leftover per-input timeline carried across blocks.
        self._carry: list[np.ndarray] = [np.empty(0, dtype=np.int64) for _ in range(dims.N)]
        # Raw generation happens in fixed-width chunks so the emitted stream
        # does not depend on how consumers slice it; unconsumed columns wait
        # here.
        self._ready_cols = np.empty((dims.N, 0), dtype=np.int64)
        self._block = np.empty((dims.N, 0), dtype=np.int64)
        self._pos = 0
        self._next_slot = 0

    def arrivals(self, slot: int) -> list[tuple[int, int]]:
        if slot != self._next_slot:
            raise ValueError(f"slots must be consumed in order: expected {self._next_slot}, got {slot}")
        self._next_slot += 1
        if self._pos >= self._block.shape[1]:
            self._block = self.take_block(_BLOCK_SLOTS)
            self._pos = 0
        col = self._block[:, self._pos]
        self._pos += 1
        us = np.nonzero(col >= 0)[0]
        if us.size == 0:
            return []
        return list(zip(us.tolist(), col[us].tolist()))

    def take_block(self, width: int) -> np.ndarray:
        """Destination matrix for the next `width` slots; -1 marks idle slots.

        Any mix of widths (or of take_block and arrivals) yields the same
        per-slot stream for a given seed.
        """
        if self.spec.load == 0.0:
            return np.full((self.dims.N, width), -1, dtype=np.int64)
        buf = self._ready_cols
        while buf.shape[1] < width:
            if self.spec.model == BURSTY:
                fresh = self._bursty_block(_BLOCK_SLOTS)
            else:
                fresh = self._iid_block(_BLOCK_SLOTS)
            buf = fresh if buf.shape[1] == 0 else np.concatenate([buf, fresh], axis=1)
        self._ready_cols = buf[:, width:]
        return np.ascontiguousarray(buf[:, :width])

    def _iid_block(self, width: int) -> np.ndarray:
        N = self.dims.N
        spec = self.spec
        block = np.empty((N, width), dtype=np.int64)
        for u in range(N):
            rng = self._streams[u]
            emit = rng.random(width) < spec.load
            if spec.model == UNIFORM:
                dest = rng.integers(0, N, width)
            else:  # unbalanced / hotspot: paired output with prob omega
                pair = paired_output(u, self.dims)
                dest = np.where(rng.random(width) < spec.omega, pair, rng.integers(0, N, width))
            block[u] = np.where(emit, dest, -1)
        return block

    def _bursty_block(self, width: int) -> np.ndarray:
        N = self.dims.N
        block = np.empty((N, width), dtype=np.int64)
        for u in range(N):
            future = self._carry[u]
            while future.size < width:
                future = np.concatenate([future, self._bursty_periods(u)])
            block[u] = future[:width]
            self._carry[u] = future[width:]
        return block

    def _bursty_periods(self, u: int, count: int = 64) -> np.ndarray:
        """OFF/ON period pairs: idle gap then a single-destination burst.

        ON lengths are geometric with mean burst_len; OFF lengths are
        geometric (support 0, 1, ...) with mean burst_len*(1-load)/load so
        the duty cycle equals the offered load.
        """
        spec = self.spec
        rng = self._streams[u]
        on = rng.geometric(1.0 / spec.burst_len, count)
        q = spec.load / (spec.load + spec.burst_len * (1.0 - spec.load))
        off = rng.geometric(q, count) - 1
        dests = rng.integers(0, self.dims.N, count)
        lengths = np.empty(2 * count, dtype=np.int64)
        values = np.empty(2 * count, dtype=np.int64)
        lengths[0::2] = off
        lengths[1::2] = on
        values[0::2] = -1
        values[1::2] = dests
        return np.repeat(values, lengths)
