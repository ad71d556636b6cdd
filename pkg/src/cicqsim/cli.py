"""Command-line entry point: ``cicqsim <subcommand> [options]``.

Options may also come from a flat ``key=value`` file passed with
``--config``; keys are option names without the leading dashes, and
command-line flags override file values.  Exit status is 0 on success,
1 for usage or configuration errors and 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import analytic, experiments
from .core import BurstConfig, SchedulerKind, SwitchConfig
from .engine import DEFAULT_QUEUE_CAP, LONG_HORIZON, RunConfig, run
from .experiments import (
    EXPERIMENT_COLUMNS,
    REGION_COLUMNS,
    REGION_SCHEDULERS,
    TABLE_COLUMNS,
    ExperimentKind,
    ExperimentSpec,
    NoStableBurst,
    SearchParams,
    write_csv,
)
from .traffic import ScenarioVariant, TrafficMatrix, build_unstable_scenario

log = logging.getLogger("cicqsim")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _schedulers(text: str) -> tuple:
    try:
        return tuple(SchedulerKind.parse(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _scheduler(text: str) -> SchedulerKind:
    try:
        return SchedulerKind.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _variant(text: str) -> ScenarioVariant:
    try:
        return ScenarioVariant(text.strip().lower())
    except ValueError:
        raise argparse.ArgumentTypeError("variant must be 'region' or 'saturated'")


def _rates(text: str) -> TrafficMatrix:
    """``"a,b;c,d"`` -> 2x2 matrix, rows separated by semicolons."""
    try:
        rows = [[float(x) for x in row.split(",")] for row in text.split(";") if row.strip()]
        return TrafficMatrix.from_rows(rows)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad --rates {text!r}: {e}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value file with default option values")
    p.add_argument("--out", type=Path, help="write output here instead of stdout")
    p.add_argument("--paper-scale", action="store_true", help=f"use the {LONG_HORIZON:.0e}-slot horizon")
    p.add_argument("--max-slots", type=int, help="simulation horizon in slots")
    p.add_argument("--queue-cap", type=int, default=DEFAULT_QUEUE_CAP, help="instability trip-wire (cells)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    p.add_argument("-v", "--verbose", action="store_true")


def _search_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=int, default=32)
    p.add_argument("--b-lo", type=int, default=1)
    p.add_argument("--b-hi", type=int, default=64)
    p.add_argument("--seeds", type=_ints, default=(1, 2, 3))
    p.add_argument("--drift-eps", type=float, default=1e-4)
    p.add_argument("--variant", type=_variant, default=ScenarioVariant.REGION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cicqsim", description="RR/RR CICQ burst stabilization simulator and model")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="single simulation run")
    _common(p)
    p.add_argument("--rates", type=_rates, help="traffic matrix rows, e.g. '0.7,0.29;0.29,0'")
    p.add_argument("--lambda1", type=float, help="port-1 load for the two-port scenario")
    p.add_argument("--f", type=float, help="fraction of port-1 load sent to output 1")
    p.add_argument("--variant", type=_variant, default=ScenarioVariant.REGION)
    p.add_argument("--n-ports", type=int, default=2)
    p.add_argument("--scheduler", type=_scheduler, default=SchedulerKind.RR_RR_CICQ)
    p.add_argument("--threshold", type=int, default=32)
    p.add_argument("--burst", type=int, default=0)
    p.add_argument("--cp-capacity", type=int, default=2)
    p.add_argument("--credit-delay", type=int, default=1)
    p.add_argument("--islip-iterations", type=int, default=4)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--warmup", type=int)
    p.add_argument("--sample-interval", type=int, default=1000)

    p = sub.add_parser("region", help="instability region sweep")
    _common(p)
    p.add_argument("--scheduler", type=_schedulers, default=REGION_SCHEDULERS, help="comma list")
    p.add_argument("--grid", choices=("default", "custom"), default="default")
    p.add_argument("--lambda11", type=_floats, help="lambda11 grid (custom)")
    p.add_argument("--loads", type=_floats, help="port-1 load grid (custom)")
    p.add_argument("--threshold", type=int, default=32)
    p.add_argument("--burst", type=int, default=0)
    p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("experiment", help="THRESHOLD/BURST delay experiments #1-#3")
    _common(p)
    p.add_argument("--kind", choices=("1", "2", "3"), required=True)
    p.add_argument("--lambda1", type=float, default=0.99)
    p.add_argument("--lambda11", type=_floats)
    p.add_argument("--thresholds", type=_ints)
    p.add_argument("--bursts", type=_ints)
    p.add_argument("--seeds", type=_ints, default=(1,))

    p = sub.add_parser("min-burst", help="empirical minimum BURST search")
    _common(p)
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    _search_opts(p)

    p = sub.add_parser("tables", help="analytic vs simulated minimum BURST tables")
    _common(p)
    p.add_argument("--lambda1", type=_floats, default=(0.98, 0.99))
    p.add_argument("--f", type=_floats, default=experiments.TABLE_FS)
    p.add_argument("--no-sim", action="store_true", help="analytic columns only")
    _search_opts(p)

    p = sub.add_parser("predict", help="analytic minimum BURST")
    _common(p)
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    return parser


def _config_tokens(sub: argparse.ArgumentParser, path: Path) -> List[str]:
    """Translate a key=value file into option tokens for ``sub``."""
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}")
    actions = {s: a for a in sub._actions for s in a.option_strings}
    tokens: List[str] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        opt = "--" + key.replace("_", "-")
        action = actions.get(opt)
        if action is None or opt == "--config":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(opt)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"{path}:{lineno}: {key} expects a boolean")
        else:
            tokens += [opt, value]
    return tokens


def _config_path(argv: Sequence[str]) -> Optional[Path]:
    for k, tok in enumerate(argv):
        if tok == "--config" and k + 1 < len(argv):
            return Path(argv[k + 1])
        if tok.startswith("--config="):
            return Path(tok.split("=", 1)[1])
    return None


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    argv = list(argv)
    commands = parser._subparsers._group_actions[0].choices
    command = next((tok for tok in argv if tok in commands), None)
    if command is None:
        raise UsageError(parser.format_usage().strip())
    path = _config_path(argv)
    if path is not None:
        # file values go first so explicit flags override them
        idx = argv.index(command)
        argv = argv[: idx + 1] + _config_tokens(commands[command], path) + argv[idx + 1 :]
    return parser.parse_args(argv)


def _horizon(args, default: int) -> int:
    if args.paper_scale:
        return LONG_HORIZON
    return args.max_slots if args.max_slots is not None else default


def _cmd_predict(args) -> str:
    p = analytic.predict_min_burst(args.f, args.lambda1)
    return (
        f"b1={p.b1:.2f} b2={p.b2:.2f} b_hat={p.b_hat:.2f} b_min={p.b_min}\n"
        f"b1={p.b1!r} b2={p.b2!r} b_hat={p.b_hat!r} cs2={p.cs2!r}\n"
    )


def _cmd_simulate(args) -> str:
    if args.rates is not None:
        traffic = args.rates
    elif args.lambda1 is not None and args.f is not None:
        traffic = build_unstable_scenario(args.n_ports, args.lambda1, args.f, args.variant)
    else:
        raise UsageError("simulate needs --rates or both --lambda1 and --f")
    burst = BurstConfig(args.threshold, args.burst) if args.burst > 0 else None
    switch = SwitchConfig(
        traffic.n,
        cp_capacity=args.cp_capacity,
        scheduler=args.scheduler,
        islip_iterations=args.islip_iterations,
        burst=burst,
        credit_delay=args.credit_delay,
    )
    cfg = RunConfig(
        switch,
        traffic,
        seed=args.seed,
        max_slots=_horizon(args, experiments.DESK_HORIZON),
        queue_cap=args.queue_cap,
        sample_interval=args.sample_interval,
        warmup_slots=args.warmup,
    )
    res = run(cfg)
    n = traffic.n
    lines = [
        f"# verdict={res.verdict.value} slots={res.slots_run} "
        f"trip_slot={'' if res.trip_slot is None else res.trip_slot} "
        f"trip_voq={'' if res.trip_voq is None else '%d,%d' % res.trip_voq}",
        f"# combined_mean_delay={experiments._fmt(res.combined_mean_delay())}",
    ]
    if len(res.sample_slots) >= 2:
        lines.append(f"# drift_voq11={res.drift(0, 0).slope:.6g}")
    delays = res.mean_delay
    rows = [
        (i, j, int(res.arrivals[i, j]), int(res.departures[i, j]), experiments._fmt(delays[i][j]))
        for i in range(n)
        for j in range(n)
        if traffic.rate[i][j] > 0 or res.arrivals[i, j]
    ]
    return "\n".join(lines) + "\n" + write_csv(("input", "output", "arrivals", "departures", "mean_delay"), rows)


def _cmd_region(args) -> str:
    if args.grid == "custom":
        if not args.lambda11 or not args.loads:
            raise UsageError("--grid custom needs --lambda11 and --loads")
        points = experiments.region_points(args.lambda11, args.loads)
    else:
        points = experiments.region_points()
    if not points:
        raise UsageError("region grid is empty")
    burst = BurstConfig(args.threshold, args.burst) if args.burst > 0 else None
    rows = experiments.run_region_sweep(
        points,
        schedulers=args.scheduler,
        burst=burst,
        horizon=_horizon(args, 10_000_000),
        seed=args.seed,
        queue_cap=args.queue_cap,
        jobs=args.jobs,
    )
    return write_csv(REGION_COLUMNS, (r.cells() for r in rows))


def _cmd_experiment(args) -> str:
    kind = ExperimentKind(args.kind)
    spec = ExperimentSpec.default(
        kind,
        lambda1=args.lambda1,
        lambda11=args.lambda11,
        thresholds=args.thresholds,
        bursts=args.bursts,
        seeds=args.seeds,
        max_slots=_horizon(args, experiments.DESK_HORIZON),
        queue_cap=args.queue_cap,
    )
    rows = experiments.run_threshold_burst_experiments(spec, jobs=args.jobs)
    return write_csv(EXPERIMENT_COLUMNS, (r.cells() for r in rows))


def _search_params(args) -> SearchParams:
    return SearchParams(
        b_lo=args.b_lo,
        b_hi=args.b_hi,
        horizon=_horizon(args, experiments.DESK_HORIZON),
        drift_eps=args.drift_eps,
        threshold=args.threshold,
        seeds=args.seeds,
        queue_cap=args.queue_cap,
        variant=args.variant,
    )


def _cmd_min_burst(args) -> str:
    b = experiments.search_min_burst(args.lambda1, args.f, _search_params(args))
    pred = analytic.predict_min_burst(args.f, args.lambda1)
    return f"b_sim={b} b_min={pred.b_min} b_hat={pred.b_hat:.2f}\n"


def _cmd_tables(args) -> str:
    p = _search_params(args)
    out = []
    for lam in args.lambda1:
        rows = experiments.reproduce_tables(lam, p, fs=args.f, simulate=not args.no_sim, jobs=args.jobs)
        out.append(f"# lambda1={lam}\n" + write_csv(TABLE_COLUMNS, (r.cells() for r in rows)))
    return "".join(out)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "region": _cmd_region,
    "experiment": _cmd_experiment,
    "min-burst": _cmd_min_burst,
    "tables": _cmd_tables,
    "predict": _cmd_predict,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        text = _COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, analytic.AnalyticDomainError) as e:
        print(f"cicqsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NoStableBurst as e:
        print(f"cicqsim: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"cicqsim: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.out is not None:
        try:
            args.out.write_text(text)
        except OSError as e:
            print(f"cicqsim: cannot write {args.out}: {e}", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
