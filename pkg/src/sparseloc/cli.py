"""Command-line front end.

Exit status: 0 on success, 1 on a usage error, 2 on a data error.
Progress goes to standard error; artifacts go to files or standard output.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import io as sio
from .baselines import BaselineConfig
from .evaluate import ALL_METHODS, cross_validate, evaluate_methods, outlier_trials
from .localize import LocalizationConfig, localize, train
from .simulate import EnvironmentSpec, OutlierSpec, generate_survey, generate_test_set
from .solvers import DEFAULT_ALPHA, DEFAULT_LAMBDA, DEFAULT_MU, Method, PenaltyProfile

EXIT_USAGE = 1
EXIT_DATA = 2
SOLVER_METHODS = tuple(m.value for m in Method)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _solver_method(text: str) -> str:
    m = text.strip().lower()
    if m not in SOLVER_METHODS:
        raise argparse.ArgumentTypeError(f"unknown method {text!r}; choose from {list(SOLVER_METHODS)}")
    return m


def _methods(text: str) -> list:
    out = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in ALL_METHODS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {list(ALL_METHODS)}")
    return out


def _add_tuning(p):
    p.add_argument("--num-aps", "--aps", dest="num_aps", type=int, default=10)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--beta", type=float, default=None,
                   help="absolute coefficient threshold (default: 0.2 x largest coefficient)")


def _add_survey(p):
    p.add_argument("--gamma", type=float, default=-70.0)
    p.add_argument("--eta-fraction", type=float, default=0.92)


def _add_test_set(p):
    p.add_argument("--measurements", help="CSV with ap1..apL and true x,y columns")
    p.add_argument("--fixes", type=int, default=100, help="number of simulated fixes")
    p.add_argument("--outliers", type=int, default=0, help="APs biased by +30 dB per fix")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparseloc", description="Sparse-recovery WLAN fingerprint positioning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic radio map (and optional fixes)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100, help="samples per RP and orientation")
    p.add_argument("--fixes-out", help="also write a measurement CSV of simulated fixes")
    p.add_argument("--fixes", type=int, default=100)
    p.add_argument("--fix-seed", type=int, default=1)
    p.add_argument("--outlier-aps", type=str, default="",
                   help="comma-separated 1-based APs biased by +30 dB in the fixes")
    _add_survey(p)

    p = sub.add_parser("train", help="build the offline model from a radio map")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    _add_survey(p)

    p = sub.add_parser("localize", help="estimate one position per measurement row")
    p.add_argument("--model", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--method", type=_solver_method, default="lasso")
    p.add_argument("--out", help="JSON-lines output (default: standard output)")
    p.add_argument("--trace", action="store_true", help="include ROI and selection details")
    _add_tuning(p)

    p = sub.add_parser("evaluate", help="compare methods over a test set")
    p.add_argument("--map", required=True)
    p.add_argument("--methods", type=_methods, default=["lasso", "glmnet", "cs", "wknn", "kde"])
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="report CSV (default: standard output)")
    p.add_argument("--cdf-out", help="error CDF CSV")
    p.add_argument("--timing", action="store_true", help="add a time_ms column")
    p.add_argument("--k", type=int, default=10, help="neighbours for WKNN")
    p.add_argument("--kernel-sigma", type=float, default=5.0, help="KDE kernel width in dB")
    _add_tuning(p)
    _add_survey(p)
    _add_test_set(p)

    p = sub.add_parser("cv", help="cross-validate lambda, alpha and mu")
    p.add_argument("--map", required=True)
    p.add_argument("--method", type=_solver_method, default="lasso")
    p.add_argument("--lambdas", type=_floats, default=[1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0])
    p.add_argument("--alphas", type=_floats, default=[DEFAULT_ALPHA])
    p.add_argument("--mus", type=_floats, default=[DEFAULT_MU])
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--mode", choices=("residual", "position"), default="residual")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="CV CSV (default: standard output)")
    p.add_argument("--num-aps", "--aps", dest="num_aps", type=int, default=10)
    _add_survey(p)
    _add_test_set(p)

    p = sub.add_parser("cluster", help="print or dump the offline clusters")
    p.add_argument("--map", required=True)
    p.add_argument("--dump", help="write the cluster sets as JSON")
    _add_survey(p)
    return parser


def _progress(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _emit(text: str, path):
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _survey_overrides(args) -> dict:
    return {"gamma": args.gamma, "eta_fraction": args.eta_fraction}


def _load_map(args):
    raw, env = sio.load_radio_map(args.map)
    raw = replace(raw, config=replace(raw.config, **_survey_overrides(args)))
    return raw, env


def _loc_config(args) -> LocalizationConfig:
    pen = PenaltyProfile(lam=args.lam, alpha=args.alpha, mu=args.mu)
    return LocalizationConfig(num_aps=args.num_aps, penalty=pen, beta=args.beta)


def _test_set(args, raw, env, model):
    if args.measurements:
        with open(args.measurements) as f:
            rows, truths = sio.read_measurements(f.read(), raw.config.num_aps,
                                                 raw.config.missing_sentinel)
        if truths is None:
            raise sio.RadioMapFormatError(f"{args.measurements}: true x,y columns are required")
        if args.outliers:
            raise UsageError("--outliers applies to simulated fixes only")
        return [(r, t) for r, t in zip(rows, truths)]
    if env is None:
        raise UsageError("the radio map has no environment block; pass --measurements")
    fixes = generate_test_set(env, args.fixes, seed=args.seed, gamma=raw.config.gamma)
    if args.outliers:
        fixes = outlier_trials(env, model, fixes, args.outliers, num_aps=args.num_aps,
                               seed=args.seed, fix_seed_base=args.seed * 100_003)
    return fixes


def cmd_simulate(args):
    env = EnvironmentSpec(seed=args.seed, samples_per_rp=args.samples)
    _progress(f"simulating {env.num_rps} RPs x {env.num_aps} APs x {args.samples} samples")
    raw, _ = generate_survey(env, **_survey_overrides(args))
    sio.save_radio_map(args.out, raw, env)
    if args.fixes_out:
        aps = tuple(int(a) - 1 for a in args.outlier_aps.split(",") if a.strip())
        if any(a < 0 or a >= env.num_aps for a in aps):
            raise UsageError(f"--outlier-aps must lie in 1..{env.num_aps}")
        outl = OutlierSpec(aps, "bias", 30.0) if aps else None
        fixes = generate_test_set(env, args.fixes, seed=args.fix_seed, outliers=outl,
                                  gamma=args.gamma)
        text = sio.write_measurements([y for y, _ in fixes], [t.position for _, t in fixes])
        _emit(text, args.fixes_out)
    return 0


def cmd_train(args):
    raw, _ = _load_map(args)
    model = train(raw)
    _progress(f"trained: clusters per orientation {[c.num_clusters for c in model.clusters]}")
    sio.save_model(args.out, model)
    return 0


def cmd_localize(args):
    model = sio.load_model(args.model)
    with open(args.measurements) as f:
        rows, _ = sio.read_measurements(f.read(), model.num_aps, model.config.missing_sentinel)
    cfg = _loc_config(args)
    lines = []
    for k, y in enumerate(rows):
        est = localize(y, model, args.method, cfg, trace=args.trace)
        if args.trace:
            est, tr = est
            d = est.to_dict()
            d["trace"] = {"roi_rps": [int(j) + 1 for j in tr.roi.rps],
                          "selected_aps": [int(i) + 1 for i in tr.selection.selected]}
        else:
            d = est.to_dict()
        d["row"] = k + 1
        d["outlier_aps"] = [int(i) + 1 for i in est.flagged_outlier_aps]
        d["support"] = [dict(s, rp=s["rp"] + 1) for s in d["support"]]
        lines.append(json.dumps(d, sort_keys=True, default=_jsonable))
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def _jsonable(v):
    if hasattr(v, "tolist"):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def cmd_evaluate(args):
    raw, env = _load_map(args)
    model = train(raw)
    fixes = _test_set(args, raw, env, model)
    _progress(f"evaluating {args.methods} on {len(fixes)} fixes with {args.num_aps} APs")
    bcfg = BaselineConfig(k=args.k, kernel_sigma=args.kernel_sigma)
    report = evaluate_methods(model, fixes, args.methods, _loc_config(args), bcfg)
    _emit(report.to_csv(timing=args.timing), args.out)
    if args.cdf_out:
        _emit(report.cdf_csv(), args.cdf_out)
    return 0


def cmd_cv(args):
    raw, env = _load_map(args)
    model = train(raw)
    fixes = _test_set(args, raw, env, model)
    if len(fixes) < args.folds:
        raise UsageError(f"{len(fixes)} fixes cannot be split into {args.folds} folds")
    grid = [(lam, a, mu) for lam in args.lambdas for a in args.alphas for mu in args.mus]
    if not grid:
        raise UsageError("empty parameter grid")
    _progress(f"cross-validating {len(grid)} tuples on {len(fixes)} fixes")
    cfg = LocalizationConfig(num_aps=args.num_aps)
    res = cross_validate(fixes, model, args.method, grid, args.folds, cfg, seed=args.seed,
                         mode=args.mode)
    _emit(res.to_csv(), args.out)
    _progress(f"best (lambda, alpha, mu) = {res.best}")
    return 0


def cmd_cluster(args):
    raw, _ = _load_map(args)
    model = train(raw)
    ids = [rp.id for rp in raw.rps]
    payload = [cs.to_dict(rp_ids=ids) for cs in model.clusters]
    for cs in model.clusters:
        _progress(f"orientation {cs.orientation}: {cs.num_clusters} clusters")
    if args.dump:
        sio.dump_json(payload, args.dump)
    else:
        sys.stdout.write(json.dumps(payload) + "\n")
    return 0


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "localize": cmd_localize,
            "evaluate": cmd_evaluate, "cv": cmd_cv, "cluster": cmd_cluster}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sparseloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"sparseloc {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
