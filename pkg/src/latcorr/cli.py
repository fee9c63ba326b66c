"""Command-line interface.

Subcommands: validate, estimate, infer, shrink, aggregate, compare, simulate.
Exit codes: 0 success, 1 validation failure, 2 I/O or parse error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings

import numpy as np

from . import __version__, aggregators
from .data import check_uvc, derive_unique_sets, load_binding_map, load_samples
from .direct import estimate_direct
from .errors import LatcorrError, ParseError, ValidationError
from .inference import infer_all
from .moments import V_DENOMINATORS
from .shrinkage import DEFAULT_KAPPA_GRID, shrink_estimate
from .simulation import ALL_METHODS, StudyConfig, run_study
from .tables import write_json, write_matrix, write_rows, write_sidecar

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def _float_list(text):
    try:
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _kappa(text):
    if text == "cv":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("kappa must be a positive number or 'cv'") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("kappa must be > 0")
    return v


def _nonneg(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _alpha(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="sample table (rows = subjects)")
    data.add_argument("--binding", required=True, help="binding map (dense 0/1 table or lower,higher list)")
    data.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                      help="subtract column means (default on)")
    data.add_argument("--uvc", choices=("strict", "drop"), default="drop",
                      help="how to treat higher-level variables with < 2 unique members")
    data.add_argument("--xi", type=_nonneg, default=0.0)
    data.add_argument("--alpha", type=_alpha, default=0.05)
    data.add_argument("--v-denominator", choices=V_DENOMINATORS, default="mixed")

    shrinkp = argparse.ArgumentParser(add_help=False)
    shrinkp.add_argument("--kappa", type=_kappa, default="cv")
    shrinkp.add_argument("--cv-grid", type=_float_list, default=DEFAULT_KAPPA_GRID)
    shrinkp.add_argument("--cv-splits", type=int, default=20)
    shrinkp.add_argument("--split-ratio", type=float, default=0.5, help="fraction of samples in the first CV part")

    p = argparse.ArgumentParser(prog="latcorr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"latcorr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="report unique-variable structure of a binding map")
    v.add_argument("--binding", required=True)

    sub.add_parser("estimate", parents=[common, data], help="direct covariance and correlation")
    sub.add_parser("infer", parents=[common, data], help="direct estimate plus all-pairs p-values")
    sh = sub.add_parser("shrink", parents=[common, data, shrinkp], help="positive-definite shrinkage estimate")
    sh.add_argument("--shrink", action="store_true", default=True, help=argparse.SUPPRESS)
    ag = sub.add_parser("aggregate", parents=[common, data], help="aggregation baseline scores and correlation")
    ag.add_argument("--method", required=True, type=str.upper, choices=aggregators.METHODS)
    cmp_ = sub.add_parser("compare", parents=[common, data, shrinkp], help="direct method vs all baselines")
    cmp_.add_argument("--methods", default=",".join(aggregators.METHODS))

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo study")
    sim.add_argument("--config", help="key = value study config file")
    for name, typ in (("p", int), ("q", int), ("n", int), ("reps", int), ("xi", _nonneg), ("alpha", _alpha),
                      ("density", float), ("diag", float), ("noise", float), ("corr-lo", float),
                      ("corr-hi", float), ("cv-splits", int)):
        sim.add_argument(f"--{name}", type=typ)
    sim.set_defaults(seed=None)
    sim.add_argument("--methods")
    sim.add_argument("--kappa", type=_kappa)
    sim.add_argument("--cv-grid", type=_float_list)
    return p


def _ensure_out(path):
    os.makedirs(path, exist_ok=True)
    return path


def _config_echo(args):
    return {k: v for k, v in vars(args).items() if not k.startswith("_")}


class _Run:
    """Collects timings and warnings for the sidecars of one command."""

    def __init__(self, args):
        self.args = args
        self.t0 = time.perf_counter()
        self.timings = {}
        self.warnings = []

    def mark(self, label):
        now = time.perf_counter()
        self.timings[label] = now - self.t0
        return now

    def emit(self, path):
        caught = [str(w.message) for w in getattr(self.args, "_caught", [])]
        write_sidecar(path, self.args.command, _config_echo(self.args), dict(self.timings),
                      self.warnings + caught)


def _load(args, run):
    bmap = load_binding_map(args.binding)
    sets = check_uvc(derive_unique_sets(bmap), args.uvc)
    samples = load_samples(args.data, bmap, center=args.center)
    if sets.dropped:
        samples = samples.select(sets.binding.lower_names)
        run.warnings.append(f"dropped for UVC: {', '.join(sets.dropped)}")
    run.mark("load")
    return bmap, sets, samples


def _estimate(args, run):
    bmap, sets, z = _load(args, run)
    cov = estimate_direct(z, sets)
    run.mark("estimate")
    return sets, z, cov


def _summary(args, sets, z, cov):
    names = sets.binding.higher_names
    return {
        "n": z.n,
        "p": sets.p,
        "q": sets.q,
        "centered": z.centered,
        "uvc_dropped": list(sets.dropped),
        "undefined_entries": [[names[a], names[b]] for a, b in cov.undefined_entries()],
        "out_of_range": [[names[a], names[b], r] for a, b, r in cov.out_of_range],
    }


def cmd_validate(args) -> int:
    bmap = load_binding_map(args.binding)
    sets = derive_unique_sets(bmap)
    print(f"q: {bmap.q}")
    print(f"p: {bmap.p}")
    parts = [f"{nm}: {len(s)} unique" for nm, s in zip(bmap.higher_names, sets.sets)]
    bad = [nm for nm, s in zip(bmap.higher_names, sets.sets) if len(s) < 2]
    status = "PASS" if not bad else f"FAIL ({', '.join(bad)})"
    print("; ".join(parts + [f"shared: {len(sets.shared)}", f"UVC: {status}"]))
    return EXIT_OK if not bad else EXIT_VALIDATION


def cmd_estimate(args) -> int:
    run = _Run(args)
    out = _ensure_out(args.out)
    sets, z, cov = _estimate(args, run)
    names = sets.binding.higher_names
    for fname, mat in (("sigma.tsv", cov.sigma_hat), ("correlation.tsv", cov.r_hat)):
        path = os.path.join(out, fname)
        write_matrix(path, mat, names)
        run.emit(path)
    path = os.path.join(out, "estimate.json")
    write_json(path, _summary(args, sets, z, cov))
    run.emit(path)
    return EXIT_OK


INFER_COLUMNS = ["higher_l", "higher_k", "r_hat", "delta_hat", "t_plus", "t_minus", "p_value", "p_bh", "flags"]


def cmd_infer(args) -> int:
    run = _Run(args)
    out = _ensure_out(args.out)
    sets, z, cov = _estimate(args, run)
    res = infer_all(z, sets, cov, args.xi, v_denominator=args.v_denominator)
    run.mark("infer")
    path = os.path.join(out, "inference.tsv")
    write_rows(path, res.rows(), INFER_COLUMNS)
    run.emit(path)
    pv = res.p_values()
    summary = _summary(args, sets, z, cov)
    summary.update(xi=args.xi, alpha=args.alpha, pairs_tested=len(res.records), pairs_skipped=len(res.skipped),
                   significant=int(np.sum(pv < args.alpha)))
    path = os.path.join(out, "inference.json")
    write_json(path, summary)
    run.emit(path)
    return EXIT_OK


def cmd_shrink(args) -> int:
    run = _Run(args)
    out = _ensure_out(args.out)
    sets, z, cov = _estimate(args, run)
    res = shrink_estimate(z, sets, cov, kappa=args.kappa, grid=args.cv_grid, B=args.cv_splits,
                          split_ratio=args.split_ratio, seed=args.seed, v_denominator=args.v_denominator)
    run.mark("shrink")
    names = sets.binding.higher_names
    for fname, mat in (("sigma_sh.tsv", res.sigma_sh), ("correlation_sh.tsv", res.r_sh)):
        path = os.path.join(out, fname)
        write_matrix(path, mat, names)
        run.emit(path)
    summary = _summary(args, sets, z, cov)
    summary.update(kappa=res.kappa, rho=res.rho, branch=res.binding, alpha2=res.alpha2, beta2=res.beta2,
                   gamma2=res.gamma2, lambda_min_before=res.lambda_min_dir, lambda_min_after=res.lambda_min_sh)
    if res.cv is not None:
        summary["cv"] = {"grid": list(res.cv.grid), "scores": res.cv.scores, "B": res.cv.B,
                         "split": list(res.cv.split), "chosen_kappa": res.cv.chosen_kappa,
                         "skipped_splits": res.cv.skipped_splits}
        path = os.path.join(out, "cv.tsv")
        write_rows(path, res.cv.rows(), ["kappa", "cv_score"])
        run.emit(path)
    path = os.path.join(out, "shrink.json")
    write_json(path, summary)
    run.emit(path)
    return EXIT_OK


def _sample_labels(z):
    return z.sample_ids if z.sample_ids is not None else tuple(str(i + 1) for i in range(z.n))


def cmd_aggregate(args) -> int:
    run = _Run(args)
    out = _ensure_out(args.out)
    bmap, sets, z = _load(args, run)
    agg = aggregators.aggregate(z, sets.binding, sets, args.method)
    r, valid = aggregators.baseline_correlation(agg)
    run.mark("aggregate")
    for name, reason in agg.skipped.items():
        run.warnings.append(f"{name} skipped: {reason}")
    if not valid.all():
        run.warnings.append("zero-variance score column(s): " + ", ".join(np.array(agg.names)[~valid]))
    tag = args.method.lower()
    path = os.path.join(out, f"scores_{tag}.tsv")
    write_matrix(path, agg.scores, _sample_labels(z), agg.names)
    run.emit(path)
    path = os.path.join(out, f"correlation_{tag}.tsv")
    write_matrix(path, r, agg.names)
    run.emit(path)
    return EXIT_OK


def cmd_compare(args) -> int:
    run = _Run(args)
    out = _ensure_out(args.out)
    sets, z, cov = _estimate(args, run)
    names = sets.binding.higher_names
    rows = []
    summary = {"xi": args.xi, "alpha": args.alpha, "methods": {}}

    res = infer_all(z, sets, cov, args.xi, v_denominator=args.v_denominator)
    for rec in res.records:
        rows.append({"method": "DIR", "higher_l": names[rec.l], "higher_k": names[rec.k],
                     "r_hat": rec.r_hat, "p_value": rec.p_value})
    pv = res.p_values()
    summary["methods"]["DIR"] = {"pairs": len(pv), "percent_significant": 100 * float(np.mean(pv < args.alpha)) if len(pv) else None}

    try:
        sh = shrink_estimate(z, sets, cov, kappa=args.kappa, grid=args.cv_grid, B=args.cv_splits,
                             split_ratio=args.split_ratio, seed=args.seed, v_denominator=args.v_denominator)
        iu = np.triu_indices(sets.p, 1)
        for a, b in zip(*iu):
            rows.append({"method": "DIR_SH", "higher_l": names[a], "higher_k": names[b],
                         "r_hat": sh.r_sh[a, b], "p_value": float("nan")})
        summary["methods"]["DIR_SH"] = {"kappa": sh.kappa, "rho": sh.rho, "branch": sh.binding}
    except LatcorrError as exc:
        run.warnings.append(f"DIR_SH skipped: {exc}")
    run.mark("direct")

    methods = [m.strip().upper().replace("-", "_") for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in aggregators.METHODS:
            raise ValidationError(f"unknown aggregation method {m!r}")
        agg = aggregators.aggregate(z, sets.binding, sets, m)
        r, valid = aggregators.baseline_correlation(agg)
        iu = np.triu_indices(len(agg.names), 1)
        rv = r[iu]
        ok = ~np.isnan(rv)
        p = np.full(rv.shape, np.nan)
        if z.n >= 4:
            p[ok] = aggregators.fisher_test(rv[ok], z.n, args.xi)
        for (a, b), rr, pp in zip(zip(*iu), rv, p):
            rows.append({"method": m, "higher_l": agg.names[a], "higher_k": agg.names[b], "r_hat": rr, "p_value": pp})
        summary["methods"][m] = {
            "pairs": int(ok.sum()),
            "skipped": agg.skipped,
            "percent_significant": 100 * float(np.mean(p[ok] < args.alpha)) if ok.any() else None,
        }
    run.mark("aggregators")
    path = os.path.join(out, "compare.tsv")
    write_rows(path, rows, ["method", "higher_l", "higher_k", "r_hat", "p_value"])
    run.emit(path)
    path = os.path.join(out, "compare.json")
    summary.update(_summary(args, sets, z, cov))
    write_json(path, summary)
    run.emit(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    run = _Run(args)
    out = _ensure_out(args.out)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read {args.config}: {exc}") from exc
        cfg = StudyConfig.from_text(text)
    else:
        cfg = StudyConfig()
    overrides = {}
    for key in ("p", "q", "n", "reps", "xi", "alpha", "density", "diag", "noise", "corr_lo", "corr_hi",
                "cv_splits", "kappa", "cv_grid"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if args.methods:
        overrides["methods"] = tuple(m for m in args.methods.split(",") if m.strip())
    if args.seed is not None:
        overrides["seed"] = args.seed
    overrides["threads"] = args.threads
    cfg = StudyConfig(**{**cfg.as_dict(), **overrides})
    report = run_study(cfg)
    run.mark("simulate")
    path = os.path.join(out, "results.tsv")
    write_rows(path, report.rows(), ["rep", "method", "fne", "null_rejections", "null_tests",
                                    "alt_rejections", "alt_tests"])
    run.emit(path)
    summary = {"config": cfg.as_dict(), "methods": report.summary(),
               "max_abs_true_correlation": float(np.max(np.abs(report.truth.r - np.eye(cfg.p)))),
               "errors": [list(e) for e in report.errors]}
    path = os.path.join(out, "summary.json")
    write_json(path, summary)
    run.emit(path)
    print(f"{'method':<8} {'median_FNE':>11} {'type1':>7} {'power':>7}")
    for m, s in report.summary().items():
        t1 = s.get("type1", float("nan"))
        pw = s.get("power", float("nan"))
        print(f"{m:<8} {s['median_fne']:>11.4f} {t1:>7.3f} {pw:>7.3f}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "estimate": cmd_estimate,
    "infer": cmd_infer,
    "shrink": cmd_shrink,
    "aggregate": cmd_aggregate,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            args._caught = caught
            return COMMANDS[args.command](args)
    except LatcorrError as exc:
        err, code = exc, exc.exit_code
    except OSError as exc:
        err, code = exc, EXIT_IO
    except ValueError as exc:
        err, code = exc, EXIT_VALIDATION
    record = {"error": type(err).__name__, "message": str(err), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
