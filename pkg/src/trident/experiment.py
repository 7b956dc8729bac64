"""Experiment orchestration: config parsing, single runs, sweeps, CSV output.

The configuration grammar is a flat ``key = value`` text format with dotted
key sections, one pair per line, ``#`` comments.  Recognised keys:

    switch            trident | oq                     (default trident)
    dims.n            ports per module; k = m = n      (required)
    traffic.model     uniform_bernoulli | bursty_onoff | unbalanced |
                      hotspot_per_port                 (required)
    traffic.load      offered load in [0, 1]           (required)
    traffic.omega     unbalance weight in [0, 1]       (default 0)
    traffic.burst_len mean burst length >= 1           (default 10)
    run.slots         simulated slots                  (required)
    run.warmup        warmup slots (default slots/10)
    run.cb_capacity   positive integer or "unbounded"  (default unbounded)
    sweep.parameter   one of traffic.load, traffic.omega, traffic.burst_len,
                      dims.n, run.cb_capacity
    sweep.values      comma-separated list
    seeds             comma-separated integers         (default 0)
    output            CSV path (CLI --output overrides)

Each run emits one CSV row; the column set and order are fixed:
run_id, switch, N, model, rho, omega, burst_len, cb_capacity, seed,
throughput, mean_delay, p99_delay, max_cb_occ, violations, warning.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import HAVE_NUMBA, BlockEngine, BlockRecorder
from .fabric import TridentFabric
from .geometry import SwitchDims
from .metrics import DepartureRecorder, RunMetrics
from .oq import OqSwitch
from .rates import rate_bounds, verify_throughput_identity
from .traffic import MODELS, ArrivalGenerator, TrafficSpec, check_admissible, rate_matrix

CSV_COLUMNS = (
    "run_id",
    "switch",
    "N",
    "model",
    "rho",
    "omega",
    "burst_len",
    "cb_capacity",
    "seed",
    "throughput",
    "mean_delay",
    "p99_delay",
    "max_cb_occ",
    "violations",
    "warning",
)

SWEEPABLE = ("traffic.load", "traffic.omega", "traffic.burst_len", "dims.n", "run.cb_capacity")

SWITCH_KINDS = ("trident", "oq")

DRAIN_CAP_FACTOR = 10  # drain allowance after the run: 10*N slots


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    dims: SwitchDims
    traffic: TrafficSpec
    slots: int
    switch: str = "trident"
    warmup: Optional[int] = None
    cb_capacity: Optional[int] = None
    sweep: Optional[tuple[str, tuple[float, ...]]] = None
    seeds: tuple[int, ...] = (0,)
    output: Optional[str] = None

    def effective_warmup(self, slots: Optional[int] = None) -> int:
        if self.warmup is not None:
            return self.warmup
        return (slots if slots is not None else self.slots) // 10


# -- config file parsing -------------------------------------------------


def _parse_scalar(raw: str):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config(text: str) -> ExperimentConfig:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ConfigError(f"line {lineno}: empty key or value in {line!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = raw

    def take(key: str, default=None, required: bool = False):
        if key in pairs:
            return pairs.pop(key)
        if required:
            raise ConfigError(f"{key}: required key is missing")
        return default

    def take_int(key: str, default=None, required: bool = False, minimum: Optional[int] = None):
        raw = take(key, default=None, required=required)
        if raw is None:
            return default
        val = _parse_scalar(raw)
        if not isinstance(val, int):
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
        if minimum is not None and val < minimum:
            raise ConfigError(f"{key}: must be >= {minimum}, got {val}")
        return val

    def take_float(key: str, default=None, required: bool = False):
        raw = take(key, default=None, required=required)
        if raw is None:
            return default
        val = _parse_scalar(raw)
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ConfigError(f"{key}: expected a number, got {raw!r}")
        return float(val)

    switch = take("switch", default="trident")
    if switch not in SWITCH_KINDS:
        raise ConfigError(f"switch: expected one of {SWITCH_KINDS}, got {switch!r}")

    n = take_int("dims.n", required=True, minimum=1)
    k = take_int("dims.k", default=n, minimum=1)
    m = take_int("dims.m", default=n, minimum=1)
    if not (n == k == m):
        raise ConfigError(f"dims: n, k, m must be equal, got ({n}, {k}, {m})")
    dims = SwitchDims(n, k, m)

    model = take("traffic.model", required=True)
    if model not in MODELS:
        raise ConfigError(f"traffic.model: expected one of {MODELS}, got {model!r}")
    load = take_float("traffic.load", required=True)
    omega = take_float("traffic.omega", default=0.0)
    burst_len = take_float("traffic.burst_len", default=10.0)
    try:
        traffic = TrafficSpec(model=model, load=load, omega=omega, burst_len=burst_len)
    except ValueError as exc:
        raise ConfigError(f"traffic: {exc}") from exc

    slots = take_int("run.slots", required=True, minimum=1)
    warmup = take_int("run.warmup", default=None, minimum=0)
    if warmup is not None and warmup >= slots:
        raise ConfigError(f"run.warmup: must be < run.slots, got {warmup} >= {slots}")

    raw_cap = take("run.cb_capacity", default="unbounded")
    if raw_cap == "unbounded":
        cb_capacity = None
    else:
        cap = _parse_scalar(raw_cap)
        if not isinstance(cap, int) or cap < 1:
            raise ConfigError(f"run.cb_capacity: expected a positive integer or 'unbounded', got {raw_cap!r}")
        cb_capacity = cap

    sweep = None
    sweep_param = take("sweep.parameter")
    sweep_values = take("sweep.values")
    if (sweep_param is None) != (sweep_values is None):
        raise ConfigError("sweep: sweep.parameter and sweep.values must be given together")
    if sweep_param is not None:
        if sweep_param not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter: expected one of {SWEEPABLE}, got {sweep_param!r}")
        values = []
        for part in sweep_values.split(","):
            val = _parse_scalar(part.strip())
            if sweep_param == "run.cb_capacity" and part.strip() == "unbounded":
                val = float("inf")
            if not isinstance(val, (int, float)):
                raise ConfigError(f"sweep.values: expected numbers, got {part.strip()!r}")
            values.append(float(val))
        if not values:
            raise ConfigError("sweep.values: empty list")
        sweep = (sweep_param, tuple(values))

    raw_seeds = take("seeds", default="0")
    seeds = []
    for part in raw_seeds.split(","):
        val = _parse_scalar(part.strip())
        if not isinstance(val, int):
            raise ConfigError(f"seeds: expected integers, got {part.strip()!r}")
        seeds.append(val)

    output = take("output", default=None)

    if pairs:
        raise ConfigError(f"unknown key {next(iter(pairs))!r}")

    return ExperimentConfig(
        dims=dims,
        traffic=traffic,
        slots=slots,
        switch=switch,
        warmup=warmup,
        cb_capacity=cb_capacity,
        sweep=sweep,
        seeds=tuple(seeds),
        output=output,
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- single-run simulation ------------------------------------------------


@dataclass
class SimResult:
    metrics: RunMetrics
    dims: SwitchDims
    switch: str
    traffic: TrafficSpec
    cb_capacity: Optional[int]
    occupancy: Optional[np.ndarray] = None
    checkpoints: Optional[dict[int, tuple[int, int]]] = None


_ENGINE_BLOCK = 4096


def simulate(
    dims: SwitchDims,
    traffic: TrafficSpec,
    slots: int,
    *,
    switch: str = "trident",
    warmup: Optional[int] = None,
    cb_capacity: Optional[int] = None,
    collect_occupancy: bool = False,
    checkpoint_slots: Sequence[int] = (),
    trace_writer: Optional[Callable[[int, int, int, int, int], None]] = None,
    engine: str = "auto",
) -> SimResult:
    """Run one switch instance for `slots` slots plus a bounded drain phase.

    The measurement window is [warmup, slots); after the last arrival slot
    the switch keeps stepping without arrivals (up to 10*N extra slots) so
    in-flight window cells can depart.  engine selects the implementation
    for trident runs: "fast" (compiled block stepping), "reference" (the
    slot-by-slot TridentFabric), or "auto" (fast when available).  Both
    engines produce identical departure streams.
    """
    if switch not in SWITCH_KINDS:
        raise ValueError(f"unknown switch kind {switch!r}")
    if engine not in ("auto", "fast", "reference"):
        raise ValueError(f"unknown engine {engine!r}")
    if warmup is None:
        warmup = slots // 10
    if not 0 <= warmup < slots:
        raise ValueError(f"warmup must be in [0, slots), got {warmup}")
    use_fast = switch == "trident" and engine != "reference" and HAVE_NUMBA
    if engine == "fast" and not use_fast:
        raise ValueError("fast engine requested but unavailable for this run")
    if use_fast:
        return _simulate_block(
            dims, traffic, slots, warmup, cb_capacity,
            collect_occupancy, checkpoint_slots, trace_writer,
        )
    return _simulate_stepwise(
        dims, traffic, slots, switch, warmup, cb_capacity,
        collect_occupancy, checkpoint_slots, trace_writer,
    )


def _simulate_stepwise(
    dims, traffic, slots, switch, warmup, cb_capacity,
    collect_occupancy, checkpoint_slots, trace_writer,
) -> SimResult:
    gen = ArrivalGenerator(traffic, dims)
    fab = TridentFabric(dims, cb_capacity=cb_capacity) if switch == "trident" else OqSwitch(dims)
    rec = DepartureRecorder(dims.N, window=(warmup, slots))
    occupancy = np.empty(slots, dtype=np.int64) if collect_occupancy else None
    checkpoints: dict[int, tuple[int, int]] = {}
    checkpoint_set = set(checkpoint_slots)
    offered = 0
    step = fab.step
    arrivals_at = gen.arrivals
    record = rec.record_batch
    for t in range(slots):
        if checkpoint_set and t in checkpoint_set:
            checkpoints[t] = _occ_snapshot(fab)
        arrivals = arrivals_at(t)
        if t >= warmup:
            offered += len(arrivals)
        departures = step(arrivals)
        if departures:
            record(t, departures)
            if trace_writer is not None:
                for u, v, seq, arr in departures:
                    trace_writer(t, u, v, seq, arr)
        if occupancy is not None:
            occupancy[t] = fab.resident_cells
    drain_cap = DRAIN_CAP_FACTOR * dims.N
    t = slots
    while rec.delivered_in_window < offered and t < slots + drain_cap:
        departures = step([])
        if departures:
            record(t, departures)
            if trace_writer is not None:
                for u, v, seq, arr in departures:
                    trace_writer(t, u, v, seq, arr)
        t += 1
    if isinstance(fab, TridentFabric):
        max_vimoq, max_cb = fab.max_vimoq_occ, fab.max_cb_occ
    else:
        max_vimoq, max_cb = 0, fab.max_oq_occ
    metrics = rec.finalize(
        warmup, slots - warmup,
        offered_cells=offered, max_vimoq_occ=max_vimoq, max_cb_occ=max_cb,
    )
    return SimResult(
        metrics=metrics,
        dims=dims,
        switch=switch,
        traffic=traffic,
        cb_capacity=cb_capacity,
        occupancy=occupancy,
        checkpoints=checkpoints or None,
    )


def _simulate_block(
    dims, traffic, slots, warmup, cb_capacity,
    collect_occupancy, checkpoint_slots, trace_writer,
) -> SimResult:
    N = dims.N
    gen = ArrivalGenerator(traffic, dims)
    eng = BlockEngine(dims, cb_capacity=cb_capacity)
    drain_cap = DRAIN_CAP_FACTOR * N
    rec = BlockRecorder(N, (warmup, slots), delay_bound=slots + drain_cap + 1)
    occupancy = np.empty(slots, dtype=np.int64) if collect_occupancy else None
    checkpoints: dict[int, tuple[int, int]] = {}
    cps = sorted({c for c in checkpoint_slots if 0 <= c <= slots})
    bounds = sorted(set(range(0, slots, _ENGINE_BLOCK)) | set(cps) | {0, slots})
    offered = 0
    for a, b in zip(bounds, bounds[1:]):
        if a in cps:
            checkpoints[a] = (eng.max_vimoq_occ, eng.max_cb_occ)
        if a == b:
            continue
        dest = gen.take_block(b - a)
        if b > warmup:
            lo = max(warmup - a, 0)
            offered += int((dest[:, lo:] >= 0).sum())
        deps = eng.run_block(dest, occupancy_out=None if occupancy is None else occupancy[a:b])
        rec.record_block(*deps)
        if trace_writer is not None:
            _write_trace(trace_writer, deps)
    if slots in cps:
        checkpoints[slots] = (eng.max_vimoq_occ, eng.max_cb_occ)
    extra = 0
    while rec.delivered_in_window < offered and extra < drain_cap:
        w = min(N, drain_cap - extra)
        deps = eng.run_block(np.full((N, w), -1, dtype=np.int64))
        rec.record_block(*deps)
        if trace_writer is not None:
            _write_trace(trace_writer, deps)
        extra += w
    metrics = rec.finalize(
        warmup, slots - warmup,
        offered_cells=offered,
        max_vimoq_occ=eng.max_vimoq_occ, max_cb_occ=eng.max_cb_occ,
    )
    return SimResult(
        metrics=metrics,
        dims=dims,
        switch="trident",
        traffic=traffic,
        cb_capacity=cb_capacity,
        occupancy=occupancy,
        checkpoints=checkpoints or None,
    )


def _write_trace(writer, deps) -> None:
    dep_slot, dep_u, dep_v, dep_seq, dep_arr = deps
    for row in zip(dep_slot.tolist(), dep_u.tolist(), dep_v.tolist(), dep_seq.tolist(), dep_arr.tolist()):
        writer(*row)


def _occ_snapshot(fab) -> tuple[int, int]:
    if isinstance(fab, TridentFabric):
        return (fab.max_vimoq_occ, fab.max_cb_occ)
    return (0, fab.max_oq_occ)


# -- sweeps and CSV --------------------------------------------------------


@dataclass(frozen=True)
class RunTask:
    """One fully-resolved run; picklable for the worker pool."""

    run_id: str
    order: tuple[int, int]
    n: int
    switch: str
    model: str
    load: float
    omega: float
    burst_len: float
    slots: int
    warmup: Optional[int]
    cb_capacity: Optional[int]
    seed: int


def _resolve_tasks(config: ExperimentConfig) -> list[RunTask]:
    points: list[tuple[int, Optional[float]]]
    if config.sweep is None:
        points = [(0, None)]
    else:
        points = [(idx, val) for idx, val in enumerate(config.sweep[1])]
    tasks = []
    for idx, value in points:
        dims, traffic, cb_capacity = config.dims, config.traffic, config.cb_capacity
        if value is not None:
            param = config.sweep[0]
            if param == "traffic.load":
                traffic = replace(traffic, load=value)
            elif param == "traffic.omega":
                traffic = replace(traffic, omega=value)
            elif param == "traffic.burst_len":
                traffic = replace(traffic, burst_len=value)
            elif param == "dims.n":
                side = int(value)
                dims = SwitchDims(side, side, side)
            elif param == "run.cb_capacity":
                cb_capacity = None if value == float("inf") else int(value)
        for seed_idx, seed in enumerate(config.seeds):
            tasks.append(
                RunTask(
                    run_id=f"r{idx:03d}s{seed}",
                    order=(idx, seed_idx),
                    n=dims.n,
                    switch=config.switch,
                    model=traffic.model,
                    load=traffic.load,
                    omega=traffic.omega,
                    burst_len=traffic.burst_len,
                    slots=config.slots,
                    warmup=config.warmup,
                    cb_capacity=cb_capacity,
                    seed=seed,
                )
            )
    return tasks


def _execute_task(task: RunTask) -> dict[str, object]:
    dims = SwitchDims(task.n, task.n, task.n)
    traffic = TrafficSpec(task.model, task.load, task.omega, task.burst_len, task.seed)
    admissible = check_admissible(rate_matrix(traffic, dims)).ok
    result = simulate(
        dims,
        traffic,
        task.slots,
        switch=task.switch,
        warmup=task.warmup,
        cb_capacity=task.cb_capacity,
    )
    met = result.metrics
    return {
        "run_id": task.run_id,
        "switch": task.switch,
        "N": dims.N,
        "model": task.model,
        "rho": task.load,
        "omega": task.omega,
        "burst_len": task.burst_len,
        "cb_capacity": "unbounded" if task.cb_capacity is None else task.cb_capacity,
        "seed": task.seed,
        "throughput": met.throughput,
        "mean_delay": met.mean_delay,
        "p99_delay": met.p99_delay,
        "max_cb_occ": met.max_cb_occ,
        "violations": met.violations,
        "warning": "" if admissible else "inadmissible",
    }


def run_tasks(tasks: list[RunTask], workers: int = 1) -> list[dict[str, object]]:
    if workers <= 1 or len(tasks) <= 1:
        return [_execute_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_task, tasks))


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[dict[str, object]]:
    """One row per (sweep point x seed), in deterministic order."""
    return run_tasks(_resolve_tasks(config), workers=workers)


def compare_cb_capacities(config: ExperimentConfig, workers: int = 1) -> list[dict[str, object]]:
    """Re-run the configured traffic at CB capacities k^2, N^2, unbounded."""
    k, N = config.dims.k, config.dims.N
    tasks = []
    for idx, cap in enumerate((k * k, N * N, None)):
        base = replace(config, cb_capacity=cap, sweep=None)
        for task in _resolve_tasks(base):
            tasks.append(replace(task, run_id=f"cap{idx}{task.run_id[4:]}", order=(idx, task.order[1])))
    return run_tasks(tasks, workers=workers)


def _format_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_csv(rows: list[dict[str, object]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(row[col]) for col in CSV_COLUMNS])


def rows_to_csv_text(rows: list[dict[str, object]]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_value(row[col]) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


# -- analysis report -------------------------------------------------------


@dataclass(frozen=True)
class AnalysisReport:
    N: int
    admissible: bool
    max_row_sum: float
    max_col_sum: float
    identity_ok: bool
    max_residual: float
    port_rate_residual: float
    bounds: dict[str, float]

    def render(self) -> str:
        lines = [
            f"ports N = {self.N}",
            f"admissible = {str(self.admissible).lower()} "
            f"(max row sum {self.max_row_sum:.6g}, max col sum {self.max_col_sum:.6g})",
            f"throughput identity = {'ok' if self.identity_ok else 'FAILED'}",
            f"max residual = {self.max_residual:.3e}",
            f"port rate residual = {self.port_rate_residual:.3e}",
            "rate bounds: "
            + ", ".join(f"{name}={val:.6g}" for name, val in self.bounds.items()),
        ]
        return "\n".join(lines)


def run_analysis(config: ExperimentConfig) -> AnalysisReport:
    dims = config.dims
    rates = rate_matrix(config.traffic, dims)
    adm = check_admissible(rates)
    report = verify_throughput_identity(rates, dims)
    bounds = rate_bounds(dims)
    return AnalysisReport(
        N=dims.N,
        admissible=adm.ok,
        max_row_sum=adm.max_row_sum,
        max_col_sum=adm.max_col_sum,
        identity_ok=report.ok,
        max_residual=report.max_residual,
        port_rate_residual=report.port_rate_residual,
        bounds={
            "lambda_max": bounds.lambda_max,
            "r_vimoq": bounds.r_vimoq,
            "r_cm": bounds.r_cm,
            "r_cb": bounds.r_cb,
        },
    )
