import pytest

from cicqsim.analytic import ErlangClass
from cicqsim.core import SchedulerKind
from cicqsim.experiments import (
    ExperimentKind,
    ExperimentSpec,
    SearchParams,
    TableRow,
    burst_is_stable,
    region_points,
    reproduce_tables,
    run_region_sweep,
    run_threshold_burst_experiments,
    search_min_burst,
)

FAST = SearchParams(horizon=2_000_000)


def test_region_points_skip_overloaded_pairs():
    pts = region_points((0.5, 0.9), (0.85, 0.95))
    assert pts == [(0.5, 0.35), (0.5, 0.45), (0.9, 0.05)]


def test_region_examples():
    rows = run_region_sweep(
        [(0.65, 0.30), (0.45, 0.54)],
        schedulers=(SchedulerKind.RR_RR_CICQ, SchedulerKind.OCF_RR),
        horizon=3_000_000,
    )
    verdicts = {(r.scheduler, r.lambda11): r.verdict for r in rows}
    assert verdicts[(SchedulerKind.RR_RR_CICQ, 0.65)] == "UNSTABLE"
    assert verdicts[(SchedulerKind.OCF_RR, 0.65)] == "STABLE"
    assert verdicts[(SchedulerKind.RR_RR_CICQ, 0.45)] == "STABLE"
    by_point = {(r.scheduler, r.lambda11): r for r in rows}
    assert by_point[(SchedulerKind.RR_RR_CICQ, 0.65)].analytic_class is ErlangClass.AT_OR_ABOVE_BOUNDARY
    # 0.45 < 1/2 lies outside the classifier's domain
    assert by_point[(SchedulerKind.RR_RR_CICQ, 0.45)].analytic_class is None


def test_region_rejects_unschedulable_point():
    with pytest.raises(ValueError):
        run_region_sweep([(0.8, 0.3)], horizon=1000)


def test_search_symmetric_split_needs_one():
    assert search_min_burst(0.98, 0.50, FAST) == 1


def test_search_is_bracketed():
    b = search_min_burst(0.98, 0.70, FAST)
    assert burst_is_stable(0.98, 0.70, b, FAST)
    assert b == 1 or not burst_is_stable(0.98, 0.70, b - 1, FAST)


def test_search_params_validation():
    with pytest.raises(ValueError):
        SearchParams(b_lo=5, b_hi=4)
    with pytest.raises(ValueError):
        SearchParams(seeds=(1, 1))


def test_table_row_error_sign():
    row = TableRow(0.95, 0.931, 0.049, 13.49, 8.64, 22.13, 23, 21)
    assert row.error == pytest.approx(2 / 21)
    assert row.cells()[-1] == "0.0952"
    assert TableRow(0.6, 0.6, 0.4, 1.5, 3.9, 5.4, 6, 7).error < 0


def test_analytic_tables_without_simulation():
    rows = reproduce_tables(0.98, simulate=False)
    assert [r.b_min for r in rows] == [1, 3, 4, 5, 7, 8, 10, 12, 16, 23]
    assert all(r.b_sim is None and r.error is None for r in rows)


def test_experiment_defaults():
    spec = ExperimentSpec.default(ExperimentKind.EXPERIMENT_3)
    assert spec.thresholds == (8, 16, 32, 64, 128) and spec.lambda11 == (0.80,)
    assert ExperimentSpec.default(ExperimentKind.EXPERIMENT_1).bursts[-1] == 64
    with pytest.raises(ValueError):
        ExperimentSpec.default(ExperimentKind.EXPERIMENT_2, bursts=())


def test_small_threshold_is_unstable():
    spec = ExperimentSpec.default(
        ExperimentKind.EXPERIMENT_3, thresholds=(8, 32), bursts=(15,), max_slots=3_000_000
    )
    rows = run_threshold_burst_experiments(spec)
    combined = {r.threshold: r for r in rows if r.voq == "combined"}
    assert combined[8].verdict == "UNSTABLE" and combined[8].mean_delay is None
    assert combined[32].verdict == "STABLE" and combined[32].mean_delay > 2.0


@pytest.mark.slow
def test_experiment_one_burst_64_stable_everywhere():
    spec = ExperimentSpec.default(ExperimentKind.EXPERIMENT_1, bursts=(64,), max_slots=2_000_000)
    rows = run_threshold_burst_experiments(spec)
    assert all(r.verdict == "STABLE" for r in rows)
