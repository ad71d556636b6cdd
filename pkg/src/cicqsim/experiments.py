"""Experiment drivers: instability-region sweeps, THRESHOLD/BURST delay
experiments, the empirical minimum-BURST search and table reproduction.

Every driver returns rows in deterministic grid order; ``jobs > 1`` farms
independent runs out to worker processes and merges results in that order.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from . import analytic
from .analytic import AnalyticDomainError, ErlangClass, classify_erlang_point
from .core import BurstConfig, SchedulerKind, SwitchConfig
from .engine import (
    DEFAULT_DRIFT_EPS,
    DEFAULT_QUEUE_CAP,
    RunConfig,
    RunResult,
    is_drift_zero,
    run,
)
from .traffic import ScenarioVariant, TrafficMatrix, build_unstable_scenario, check_schedulable, two_port_matrix

log = logging.getLogger(__name__)

DESK_HORIZON = 5_000_000
TABLE_FS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)
REGION_LAMBDA11 = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90)
REGION_LOADS = (0.85, 0.90, 0.95, 0.99)
REGION_SCHEDULERS = (
    SchedulerKind.RR_RR_CICQ,
    SchedulerKind.ISLIP,
    SchedulerKind.OCF_RR,
    SchedulerKind.LQF_RR,
)

REGION_COLUMNS = ("scheduler", "lambda11", "lambda12", "verdict", "trip_slot", "analytic_class")
TABLE_COLUMNS = ("f", "lambda11", "lambda12", "b2", "b1", "b_hat", "b_min", "b_sim", "error")
EXPERIMENT_COLUMNS = ("threshold", "burst", "lambda11", "voq", "mean_delay", "verdict")


class ExperimentKind(enum.Enum):
    REGION_SWEEP = "region"
    EXPERIMENT_1 = "1"
    EXPERIMENT_2 = "2"
    EXPERIMENT_3 = "3"
    MIN_BURST_SEARCH = "min-burst"
    TABLES = "tables"
    PREDICT = "predict"
    SINGLE_RUN = "simulate"


class NoStableBurst(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchParams:
    b_lo: int = 1
    b_hi: int = 64
    horizon: int = DESK_HORIZON
    drift_eps: float = DEFAULT_DRIFT_EPS
    threshold: int = 32
    seeds: Tuple[int, ...] = (1, 2, 3)
    queue_cap: int = DEFAULT_QUEUE_CAP
    variant: ScenarioVariant = ScenarioVariant.REGION
    n_ports: int = 2

    def __post_init__(self):
        if self.b_lo > self.b_hi:
            raise ValueError("b_lo must not exceed b_hi")
        if self.b_lo < 0:
            raise ValueError("b_lo must be non-negative")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    lambda1: float = 0.99
    lambda11: Tuple[float, ...] = ()
    thresholds: Tuple[int, ...] = ()
    bursts: Tuple[int, ...] = ()
    seeds: Tuple[int, ...] = (1,)
    max_slots: int = DESK_HORIZON
    queue_cap: int = DEFAULT_QUEUE_CAP

    def __post_init__(self):
        for name in ("lambda11", "thresholds", "bursts"):
            if not getattr(self, name):
                raise ValueError(f"{name} grid must be non-empty")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")
        for l11 in self.lambda11:
            if not (0.0 <= l11 <= self.lambda1):
                raise ValueError(f"lambda11={l11} outside [0, lambda1]")

    @classmethod
    def default(cls, kind: ExperimentKind, **overrides) -> "ExperimentSpec":
        """Grid layouts of the three delay experiments (lambda1 = 0.99)."""
        layouts = {
            ExperimentKind.EXPERIMENT_1: dict(
                lambda11=(0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95),
                thresholds=(32,),
                bursts=(16, 32, 48, 64),
            ),
            ExperimentKind.EXPERIMENT_2: dict(
                lambda11=(0.70, 0.80, 0.90),
                thresholds=(32,),
                bursts=(8, 16, 24, 32, 40, 48, 56, 64),
            ),
            ExperimentKind.EXPERIMENT_3: dict(
                lambda11=(0.80,),
                thresholds=(8, 16, 32, 64, 128),
                bursts=(15, 25, 35, 45, 55),
            ),
        }
        if kind not in layouts:
            raise ValueError(f"no default grid for {kind}")
        params = dict(layouts[kind])
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(kind=kind, **params)


def _pmap(fn: Callable, items: Sequence, jobs: int) -> List:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _fmt(x: Optional[float], digits: int = 6) -> str:
    if x is None:
        return ""
    return f"{x:.{digits}f}"


def write_csv(columns: Sequence[str], rows: Iterable[Sequence], out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


# -- minimum BURST search ---------------------------------------------------


def _burst_trial(args) -> bool:
    lambda1, f, burst, seed, p = args
    traffic = build_unstable_scenario(p.n_ports, lambda1, f, p.variant)
    switch = SwitchConfig(p.n_ports, burst=BurstConfig(p.threshold, burst))
    res = run(RunConfig(switch, traffic, seed=seed, max_slots=p.horizon, queue_cap=p.queue_cap))
    return res.stable and is_drift_zero(res.drift(0, 0), p.drift_eps)


def burst_is_stable(lambda1: float, f: float, burst: int, p: SearchParams) -> bool:
    """Majority vote over ``p.seeds``: STABLE verdict and flat VOQ(1,1) drift."""
    need = len(p.seeds) // 2 + 1
    ok = bad = 0
    for seed in p.seeds:
        if _burst_trial((lambda1, f, burst, seed, p)):
            ok += 1
        else:
            bad += 1
        if ok >= need or bad > len(p.seeds) - need:
            break
    return ok >= need


def search_min_burst(lambda1: float, f: float, p: SearchParams = SearchParams()) -> int:
    """Smallest BURST in ``[p.b_lo, p.b_hi]`` that stabilizes VOQ(1,1).

    BURST is raised one step at a time, so the value returned is bracketed:
    every smaller value in the range was tried and failed.
    """
    build_unstable_scenario(p.n_ports, lambda1, f, p.variant)
    for b in range(p.b_lo, p.b_hi + 1):
        stable = burst_is_stable(lambda1, f, b, p)
        log.info("lambda1=%.3f f=%.2f BURST=%d %s", lambda1, f, b, "stable" if stable else "unstable")
        if stable:
            return b
    raise NoStableBurst(f"no stable BURST in [{p.b_lo}, {p.b_hi}] for lambda1={lambda1} f={f}")


# -- table reproduction -----------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    f: float
    lambda11: float
    lambda12: float
    b2: float
    b1: float
    b_hat: float
    b_min: int
    b_sim: Optional[int]

    @property
    def error(self) -> Optional[float]:
        """Relative error of the ceiling prediction; positive = overestimate."""
        if self.b_sim is None:
            return None
        return (self.b_min - self.b_sim) / self.b_sim

    def cells(self) -> Tuple:
        return (
            f"{self.f:.2f}",
            _fmt(self.lambda11, 4),
            _fmt(self.lambda12, 4),
            _fmt(self.b2),
            _fmt(self.b1),
            _fmt(self.b_hat),
            self.b_min,
            "" if self.b_sim is None else self.b_sim,
            _fmt(self.error, 4),
        )


def _table_row(args) -> TableRow:
    lambda1, f, p, simulate = args
    pred = analytic.predict_min_burst(f, lambda1)
    l11 = f * lambda1
    b_sim = search_min_burst(lambda1, f, p) if simulate else None
    return TableRow(f, l11, lambda1 - l11, pred.b2, pred.b1, pred.b_hat, pred.b_min, b_sim)


def reproduce_tables(
    lambda1: float,
    p: SearchParams = SearchParams(),
    fs: Sequence[float] = TABLE_FS,
    simulate: bool = True,
    jobs: int = 1,
) -> List[TableRow]:
    if lambda1 not in (0.98, 0.99):
        log.warning("lambda1=%s has no reference table; values are an extrapolation", lambda1)
    return _pmap(_table_row, [(lambda1, f, p, simulate) for f in fs], jobs)


# -- instability region -----------------------------------------------------


@dataclass(frozen=True)
class RegionRow:
    scheduler: SchedulerKind
    lambda11: float
    lambda12: float
    verdict: str
    trip_slot: Optional[int]
    analytic_class: Optional[ErlangClass]

    @property
    def unstable(self) -> bool:
        return self.verdict != "STABLE"

    def cells(self) -> Tuple:
        return (
            self.scheduler.value,
            _fmt(self.lambda11, 4),
            _fmt(self.lambda12, 4),
            self.verdict,
            "" if self.trip_slot is None else self.trip_slot,
            "" if self.analytic_class is None else self.analytic_class.value,
        )


def region_points(
    lambda11_grid: Sequence[float] = REGION_LAMBDA11, loads: Sequence[float] = REGION_LOADS
) -> List[Tuple[float, float]]:
    """(lambda11, lambda12) pairs with port-1 load lambda11 + lambda12."""
    pts = []
    for l11 in lambda11_grid:
        for load in loads:
            l12 = round(load - l11, 10)
            if l12 < 0:
                continue
            pts.append((l11, l12))
    return pts


def _region_run(args) -> RegionRow:
    sched, l11, l12, burst, horizon, seed, queue_cap, n_ports = args
    traffic = two_port_matrix(n_ports, l11, l12, l12)
    switch = SwitchConfig(n_ports, scheduler=sched, burst=burst)
    res = run(RunConfig(switch, traffic, seed=seed, max_slots=horizon, queue_cap=queue_cap))
    try:
        cls = classify_erlang_point(l11, l12)
    except AnalyticDomainError:
        cls = None
    return RegionRow(sched, l11, l12, res.verdict.value, res.trip_slot, cls)


def run_region_sweep(
    points: Sequence[Tuple[float, float]] = None,
    schedulers: Sequence[SchedulerKind] = REGION_SCHEDULERS,
    burst: Optional[BurstConfig] = None,
    horizon: int = 10_000_000,
    seed: int = 7,
    queue_cap: int = DEFAULT_QUEUE_CAP,
    n_ports: int = 2,
    jobs: int = 1,
) -> List[RegionRow]:
    if points is None:
        points = region_points()
    for l11, l12 in points:
        if not check_schedulable(two_port_matrix(n_ports, l11, l12, l12)):
            raise ValueError(f"grid point ({l11}, {l12}) is not schedulable")
    tasks = [
        (s, l11, l12, burst, horizon, seed, queue_cap, n_ports) for s in schedulers for l11, l12 in points
    ]
    return _pmap(_region_run, tasks, jobs)


# -- THRESHOLD / BURST delay experiments ------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    threshold: int
    burst: int
    lambda11: float
    voq: str
    mean_delay: Optional[float]
    verdict: str

    def cells(self) -> Tuple:
        return (self.threshold, self.burst, _fmt(self.lambda11, 4), self.voq, _fmt(self.mean_delay), self.verdict)


_VOQS = (("11", [(0, 0)]), ("12", [(0, 1)]), ("21", [(1, 0)]), ("combined", None))


def _experiment_point(args) -> List[ExperimentRow]:
    th, b, l11, spec = args
    l12 = round(spec.lambda1 - l11, 10)
    traffic = two_port_matrix(2, l11, l12, l12)
    switch = SwitchConfig(2, burst=BurstConfig(th, b))
    results = [
        run(RunConfig(switch, traffic, seed=s, max_slots=spec.max_slots, queue_cap=spec.queue_cap))
        for s in spec.seeds
    ]
    verdict = "STABLE" if all(r.stable for r in results) else "UNSTABLE"
    rows = []
    for name, voqs in _VOQS:
        delay = None
        if verdict == "STABLE":
            vals = [r.combined_mean_delay(voqs) for r in results]
            vals = [v for v in vals if v is not None]
            delay = sum(vals) / len(vals) if vals else None
        rows.append(ExperimentRow(th, b, l11, name, delay, verdict))
    return rows


def run_threshold_burst_experiments(spec: ExperimentSpec, jobs: int = 1) -> List[ExperimentRow]:
    """Mean delay per VOQ and combined for every (THRESHOLD, BURST, lambda11).

    Delays are averaged over the replication seeds and left blank when any
    replication trips the queue cap.
    """
    tasks = [(th, b, l11, spec) for th in spec.thresholds for b in spec.bursts for l11 in spec.lambda11]
    out: List[ExperimentRow] = []
    for rows in _pmap(_experiment_point, tasks, jobs):
        out.extend(rows)
    return out


def single_run(
    traffic: TrafficMatrix,
    switch: SwitchConfig,
    seed: int = 1,
    max_slots: int = DESK_HORIZON,
    queue_cap: int = DEFAULT_QUEUE_CAP,
) -> RunResult:
    return run(RunConfig(switch, traffic, seed=seed, max_slots=max_slots, queue_cap=queue_cap))
