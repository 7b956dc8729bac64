"""Stage-by-stage traffic rate analysis over the compound configurations.

The per-flow arrival rates form an N x N matrix (rows = inputs, columns =
outputs).  Pushing that matrix through the IM and CM compound permutations
yields the aggregate rates seen by the mid-stage queues, the crosspoint
buffers, and finally each output port.  For admissible input rates the
output-port rates reproduce the input column rates exactly, which is the
analytic core of the 100%-throughput argument; this module provides that
pipeline plus numeric stability checks used by the simulator experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CompoundPermutation, SwitchDims, compound_p1, compound_p2
from .traffic import check_admissible

IDENTITY_TOL = 1e-12

# Analytic service-rate floors under saturation: a mid-stage queue is served
# at least once every N slots, a crosspoint buffer at least once every N*k.
def vimoq_service_floor(dims: SwitchDims) -> float:
    return 1.0 / dims.N


def cb_service_floor(dims: SwitchDims) -> float:
    return 1.0 / (dims.N * dims.k)


@dataclass(frozen=True)
class RateBounds:
    """Per-queue rate ceilings when every input targets a single output."""

    lambda_max: float
    r_vimoq: float
    r_cm: float
    r_cb: float


def rate_bounds(dims: SwitchDims) -> RateBounds:
    """Worst-case (all inputs to one output port) per-stage arrival rates.

    The largest admissible per-flow rate is 1/N; load balancing spreads it
    so a mid-stage queue sees n/(m*N), one CM link sees 1/k, and a single
    crosspoint buffer sees 1/(k*N).
    """
    return RateBounds(
        lambda_max=1.0 / dims.N,
        r_vimoq=dims.n / (dims.m * dims.N),
        r_cm=1.0 / dims.k,
        r_cb=1.0 / (dims.k * dims.N),
    )


def r2_from_r1(r1: np.ndarray, p1: CompoundPermutation, dims: SwitchDims) -> np.ndarray:
    """Aggregate rates into the mid-stage queues.

    Each input's total rate is spread evenly over its k scheduled positions:
    entry (u, c) = (row sum of u)/k where p1 has a one, else 0.
    """
    r1 = np.asarray(r1, dtype=np.float64)
    adm = check_admissible(r1)
    if not adm.ok:
        raise ValueError(
            f"rate matrix is inadmissible (max row sum {adm.max_row_sum:.6g}, "
            f"max col sum {adm.max_col_sum:.6g})"
        )
    row_sums = r1.sum(axis=1, keepdims=True)
    return (row_sums * p1.entries) / dims.k


def r2_slice(r1: np.ndarray, p1: CompoundPermutation, dims: SwitchDims, j: int, d: int) -> np.ndarray:
    """The (j, d) output port's share of the mid-stage rates.

    Summing the slices over all (j, d) reproduces r2_from_r1.
    """
    if not (0 <= j < dims.k and 0 <= d < dims.n):
        raise ValueError(f"output address (j={j}, d={d}) out of range for dims {dims}")
    r1 = np.asarray(r1, dtype=np.float64)
    col = r1[:, j * dims.m + d]
    return (col[:, None] * p1.entries) / dims.k


def r3(r2_jd: np.ndarray, p2: CompoundPermutation) -> np.ndarray:
    """Rates crossing the CM stage toward one output port (mask by p2)."""
    r2_jd = np.asarray(r2_jd, dtype=np.float64)
    if r2_jd.shape != p2.entries.shape:
        raise ValueError(f"shape mismatch {r2_jd.shape} vs {p2.entries.shape}")
    return r2_jd * p2.entries


def r4(r3_jd: np.ndarray) -> np.ndarray:
    """Per-source aggregate rates at one output port's crosspoint buffers."""
    return np.asarray(r3_jd, dtype=np.float64).sum(axis=1)


def r5(r4_v: np.ndarray) -> float:
    """Total rate leaving one output port."""
    return float(np.asarray(r4_v, dtype=np.float64).sum())


@dataclass(frozen=True)
class IdentityReport:
    ok: bool
    max_residual: float
    port_rate_residual: float


def verify_throughput_identity(r1: np.ndarray, dims: SwitchDims, tol: float = IDENTITY_TOL) -> IdentityReport:
    """Check that the pipeline returns each output port exactly its offered rate.

    For every output v the per-source vector must equal column v of the
    input matrix, and the port total must equal the column sum.  Exact in
    exact arithmetic; tol covers float accumulation only.
    """
    r1 = np.asarray(r1, dtype=np.float64)
    p1 = compound_p1(dims)
    p2 = compound_p2(dims)
    max_residual = 0.0
    port_residual = 0.0
    for j in range(dims.k):
        for d in range(dims.n):
            v = j * dims.m + d
            vec = r4(r3(r2_slice(r1, p1, dims, j, d), p2))
            max_residual = max(max_residual, float(np.abs(vec - r1[:, v]).max()))
            port_residual = max(port_residual, abs(r5(vec) - float(r1[:, v].sum())))
    return IdentityReport(
        ok=max_residual <= tol and port_residual <= tol,
        max_residual=max_residual,
        port_rate_residual=port_residual,
    )


@dataclass(frozen=True)
class DriftEstimate:
    """Least-squares drift of a queue-occupancy series over its second half."""

    slope: float
    stderr: float
    intercept: float
    window: int
    mean_occupancy: float
    arrival_rate_sum: float | None = None
    service_rate_floor: float | None = None


def stability_drift(
    occupancy_series: np.ndarray,
    arrival_rate_sum: float | None = None,
    service_rate_floor: float | None = None,
    min_length: int = 10_000,
) -> DriftEstimate:
    """Estimate the occupancy trend of a long run.

    Weak stability shows up as a slope statistically indistinguishable from
    zero; an oversubscribed run grows linearly.  The first half of the
    series is discarded as transient.  arrival_rate_sum and
    service_rate_floor are recorded for the report so the admissibility
    context of the run travels with the estimate.
    """
    series = np.asarray(occupancy_series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("occupancy series must be one-dimensional")
    if series.size < min_length:
        raise ValueError(f"series too short for a drift estimate: {series.size} < {min_length}")
    half = series[series.size // 2 :]
    x = np.arange(half.size, dtype=np.float64)
    slope, intercept = np.polyfit(x, half, 1)
    resid = half - (slope * x + intercept)
    dof = max(half.size - 2, 1)
    sxx = float(((x - x.mean()) ** 2).sum())
    stderr = float(np.sqrt((resid @ resid) / dof / sxx)) if sxx > 0 else float("inf")
    return DriftEstimate(
        slope=float(slope),
        stderr=stderr,
        intercept=float(intercept),
        window=half.size,
        mean_occupancy=float(half.mean()),
        arrival_rate_sum=arrival_rate_sum,
        service_rate_floor=service_rate_floor,
    )
