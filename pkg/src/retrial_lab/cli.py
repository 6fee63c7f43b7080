"""Command-line entry point: ``retrial-lab <command> [options]``.

Exit codes: 0 success, 1 bad usage or configuration, 2 hypothesis
violation, 3 numerical failure or divergence guard, 4 a validation check
failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import analytics, distributions, harness, service, validate
from .errors import BadBracket, ConfigError, DivergenceError, HypothesisViolation, NumericalFailure
from .srs import PolicyConfig, coupling_experiment, simulate_chain

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", type=Path, help="JSON or TOML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="directory for CSV data and JSON summary")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")


def _model(p, service_needed=True):
    p.add_argument("--policy", choices=("linear", "constant", "control"))
    p.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    p.add_argument("--retrial", help="retrial law, e.g. exp:1, erlang:2,1, hyperexp:0.3,2, lognormal:0,0.5")
    p.add_argument("--cutoff", type=int, help="majorant cutoff C (linear policy)")
    if service_needed:
        p.add_argument("--service", help="i.i.d. service law in the same shorthand (default exp:1)")
        p.add_argument("--service-mean", type=float, help="rescale the service law to this mean")


def _run_opts(p, horizon=100_000, replications=None):
    p.add_argument("--horizon", type=int, help=f"steps per run (default {horizon})")
    if replications is not None:
        p.add_argument("--replications", type=int, help=f"default {replications}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="retrial-lab", description="Stability of single-server retrial queues.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("threshold", help="analytic stability threshold on lambda * E sigma")
    _common(p)
    _model(p, service_needed=False)

    p = sub.add_parser("drift", help="mean increment of the embedded recursion")
    _common(p)
    _model(p)

    p = sub.add_parser("simulate", help="one trajectory of the embedded recursion")
    _common(p)
    _model(p)
    _run_opts(p)
    p.add_argument("--q0", type=int, help="initial orbit size")
    p.add_argument("--chain", choices=("policy", "noretrial"), default="policy")

    p = sub.add_parser("classify", help="Stable / Unstable / Inconclusive verdict")
    _common(p)
    _model(p)
    _run_opts(p, replications=20)
    p.add_argument("--engine", choices=("srs", "des"), default="srs")
    p.add_argument("--chain", choices=("policy", "noretrial"), default="policy")

    p = sub.add_parser("sweep", help="bisect for the empirical critical value")
    _common(p)
    _model(p)
    _run_opts(p, replications=10)
    p.add_argument("--engine", choices=("srs", "des"), default="srs")
    p.add_argument("--chain", choices=("policy", "noretrial"), default="policy")
    p.add_argument("--axis", choices=harness.AXES, required=True)
    p.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--resolution", type=float, default=0.01)
    p.add_argument("--max-steps", type=int, default=12)

    p = sub.add_parser("couple", help="common-driver coupling experiment")
    _common(p)
    _model(p)
    _run_opts(p, replications=100)
    p.add_argument("--offset", type=int, default=50)

    p = sub.add_parser("validate", help="simulation-vs-recursion cross-checks")
    _common(p)
    _model(p)
    p.add_argument("--samples", type=int, default=100_000)
    return parser


def _resolve(args, need_service=True):
    """Merge config file sections with command-line overrides."""
    data = harness.load_config_file(args.config) if args.config else {}
    run = dict(data.get("run", {}))
    pol = data.get("policy", {})
    pol = {"kind": pol} if isinstance(pol, str) else dict(pol)
    if args.policy:
        pol["kind"] = args.policy
    if args.cutoff is not None:
        pol["cutoff"] = args.cutoff
    lam = args.lam if args.lam is not None else data.get("arrival", {}).get("lambda")
    retrial = distributions.parse_spec(args.retrial) if args.retrial else (
        distributions.from_dict(data["retrial"]) if "retrial" in data else None)
    missing = [n for n, v in (("--policy", pol.get("kind")), ("--lambda", lam), ("--retrial", retrial)) if v is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")
    if need_service:
        if getattr(args, "service", None):
            svc = service.IID(distributions.parse_spec(args.service))
        elif "service" in data:
            svc = service.from_dict(data["service"])
        else:
            svc = service.IID(distributions.Exponential(1.0))
        if getattr(args, "service_mean", None) is not None:
            svc = svc.with_mean(args.service_mean)
    else:
        svc = service.IID(distributions.Exponential(1.0))
    config = PolicyConfig(pol["kind"], lam, retrial, svc, pol.get("cutoff"))
    seed = args.seed if args.seed is not None else int(run.get("seed", 0))
    out = args.out if args.out is not None else (Path(run["out"]) if "out" in run else None)
    return config, run, seed, out


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _emit(args, out, summary: dict, rows: list[dict]):
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        (out / "data.csv").write_text(_csv_text(rows))
    if args.format == "json":
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        sys.stdout.write(_csv_text(rows))


def _cmd_threshold(args):
    config, _, _, out = _resolve(args, need_service=False)
    rep = analytics.threshold(config.policy, config.arrival_rate, config.retrial)
    summary = {"command": "threshold", "retrial": config.retrial.to_dict(), **rep.to_dict()}
    _emit(args, out, summary, [rep.to_dict()])
    return EXIT_OK


def _cmd_drift(args):
    config, _, _, out = _resolve(args)
    es = config.service.mean()
    d = analytics.drift(config.policy, config.arrival_rate, es, config.retrial, config.cutoff)
    row = {"policy": config.policy.value, "arrival_rate": config.arrival_rate, "mean_service": es,
           "cutoff": config.cutoff, "drift": d}
    _emit(args, out, {"command": "drift", **row}, [row])
    return EXIT_OK


def _cmd_simulate(args):
    config, run, seed, out = _resolve(args)
    horizon = args.horizon or int(run.get("horizon", 100_000))
    q0 = args.q0 if args.q0 is not None else int(run.get("q0", config.cutoff or 0))
    tr = simulate_chain(config, horizon, seed, q0, chain=args.chain)
    summary = {"command": "simulate", **tr.summary()}
    rows = [{"n": n, "Q": int(q)} for n, q in enumerate(tr.states)]
    if out is not None:
        tr.write(out)
    if args.format == "json":
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        sys.stdout.write(_csv_text(rows))
    return EXIT_OK


def _settings(args, run, default_reps):
    return harness.ClassifierSettings(
        replications=args.replications or int(run.get("replications", default_reps)),
        horizon=args.horizon or int(run.get("horizon", 100_000)),
        engine=args.engine,
        chain=args.chain,
    )


def _cmd_classify(args):
    config, run, seed, out = _resolve(args)
    settings = _settings(args, run, 20)
    v = harness.classify(config, seed=seed, settings=settings)
    analytic = None
    if args.chain == "policy" and config.arrival_rate > 0:
        analytic = analytics.threshold(config.policy, config.arrival_rate, config.retrial).value
    summary = {"command": "classify", "config": config.to_dict(), "seed": seed, "load": config.load,
               "threshold": analytic, "settings": settings.__dict__, **v.to_dict()}
    row = {k: (json.dumps(v_) if isinstance(v_, list) else v_) for k, v_ in v.to_dict().items()}
    _emit(args, out, summary, [row])
    return EXIT_OK


def _cmd_sweep(args):
    config, run, seed, out = _resolve(args)
    settings = _settings(args, run, 10)
    res = harness.sweep(config, args.axis, tuple(args.bracket), args.resolution, seed,
                        max_steps=args.max_steps, settings=settings)
    summary = {"command": "sweep", "config": config.to_dict(), "seed": seed, "monotone": res.is_monotone(),
               **res.to_dict()}
    rows = [{"value": x, "verdict": v.verdict.value, "slope": v.slope, "return_frequency": v.return_frequency}
            for x, v in res.points]
    _emit(args, out, summary, rows)
    return EXIT_OK


def _cmd_couple(args):
    config, run, seed, out = _resolve(args)
    horizon = args.horizon or int(run.get("horizon", 100_000))
    reps = args.replications or int(run.get("replications", 100))
    rep = coupling_experiment(config, horizon, seed, args.offset, reps)
    summary = {"command": "couple", "config": config.to_dict(), "seed": seed, **rep.to_dict()}
    rows = [{"replication": i, "coupling_time": "" if t is None else t} for i, t in enumerate(rep.times)]
    _emit(args, out, summary, rows)
    return EXIT_OK


def _cmd_validate(args):
    config, _, seed, out = _resolve(args)
    checks = validate.run_validation(config, args.samples, seed)
    ok = all(c["passed"] for c in checks)
    summary = {"command": "validate", "config": config.to_dict(), "seed": seed, "passed": ok, "checks": checks}
    rows = [{"check": c["check"], "passed": c["passed"]} for c in checks]
    _emit(args, out, summary, rows)
    return EXIT_OK if ok else EXIT_VALIDATION


COMMANDS = {
    "threshold": _cmd_threshold,
    "drift": _cmd_drift,
    "simulate": _cmd_simulate,
    "classify": _cmd_classify,
    "sweep": _cmd_sweep,
    "couple": _cmd_couple,
    "validate": _cmd_validate,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericalFailure, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, BadBracket) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
