"""Command-line interface: simulate -> fit -> infer -> coverage pipelines.

Subcommands
    simulate          draw a dataset CSV from the configured truth
    fit               two-stage estimation from a dataset CSV
    infer-beta        fit + confidence ellipsoid for beta
    infer-functional  fit + confidence interval for the hazard functional
    coverage          Monte Carlo coverage study of both confidence sets
    plot              CSV series (hazard fit, censor survival, b-hat) for plotting

Every run is reproducible bit-for-bit from (config, seed).  Exit codes:
0 success, 2 configuration/CLI errors, 3 NoEvents, 4 NonConvergence,
5 singular matrices, 6 series overflow/truncation, 7 degenerate estimates,
8 other domain errors, 1 unexpected failures.
"""

import argparse
import sys

import numpy as np

from coxerr import config as cfgmod
from coxerr import coverage as covmod
from coxerr import simulate as simmod
from coxerr.errors import (
    ConfigError,
    CoxerrError,
    DegenerateB,
    InvalidModel,
    NoEvents,
    NonConvergence,
    OutOfDomain,
    ResidualFailure,
    SeriesOverflow,
    SingularKernel,
    SingularSandwich,
    TruncationFailure,
    ZeroVariance,
)
from coxerr.estimator import fit_corrected, fit_modified
from coxerr.inference import beta_confidence, build_plugins, functional_interval
from coxerr.kaplan_meier import km_censor
from coxerr.likelihood import LikelihoodContext

_EXIT_CODES = (
    (ConfigError, 2),
    (NoEvents, 3),
    (NonConvergence, 4),
    ((SingularSandwich, SingularKernel), 5),
    ((SeriesOverflow, TruncationFailure), 6),
    ((DegenerateB, ZeroVariance, ResidualFailure), 7),
    ((OutOfDomain, InvalidModel, CoxerrError), 8),
)


def _fmt(x):
    return repr(float(x))


def _load(args):
    cfg = cfgmod.load_config(args.config)
    if getattr(args, "n", None) is not None:
        cfg.n = args.n
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "alpha", None) is not None:
        cfg.alpha = args.alpha
    if getattr(args, "replicates", None) is not None:
        cfg.replicates = args.replicates
    return cfg


def _fit_from_csv(cfg, data_path):
    ds = simmod.read_csv(data_path)
    if ds.dim != cfg.beta0.size:
        raise ConfigError(
            f"dataset has {ds.dim} covariates but config declares {cfg.beta0.size}",
            key="truth.beta0",
        )
    error = cfgmod.error_model(cfg)
    lo, hi = cfgmod.beta_box(cfg)
    ctx = LikelihoodContext(ds, error, lo, hi)
    fit_cfg = cfgmod.fit_config(cfg, ds.n, dataset=ds)
    first = fit_corrected(ctx, fit_cfg)
    fit = fit_modified(ctx, fit_cfg, first)
    return ds, error, first, fit


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_simulate(args):
    cfg = _load(args)
    model = cfgmod.true_model(cfg)
    ds = simmod.draw_dataset(model, cfg.n, cfg.seed, with_truth=True)
    simmod.write_csv(ds, args.out, with_truth=args.with_truth)
    print(f"wrote {ds.n} records to {args.out}")
    return 0


def cmd_fit(args):
    cfg = _load(args)
    ds, _, first, fit = _fit_from_csv(cfg, args.data)
    lines = [
        f"stage = {fit.stage}",
        "beta_hat = " + ", ".join(_fmt(b) for b in fit.beta_hat),
        f"objective = {_fmt(fit.objective_value)}",
        f"min_lambda_first = {_fmt(first.lambda_hat.min_value())}",
        f"min_lambda = {_fmt(fit.lambda_hat.min_value())}",
        f"floor = {_fmt(fit.diagnostics.get('floor', 0.0))}",
        f"outer_sweeps = {fit.diagnostics['outer_sweeps']}",
        f"beta_grad_norm = {_fmt(fit.diagnostics['beta_grad_norm'])}",
        f"n = {ds.n}",
        f"events = {int(ds.delta.sum())}",
    ]
    _write_lines(args.out, lines)
    lam_csv = args.out + ".lambda.csv"
    _write_lines(
        lam_csv,
        ["t,value"] + [f"{_fmt(t)},{_fmt(v)}" for t, v in fit.lambda_hat.to_rows()],
    )
    print(f"wrote fit report to {args.out} and hazard nodes to {lam_csv}")
    return 0


def cmd_infer_beta(args):
    cfg = _load(args)
    ds, error, _, fit = _fit_from_csv(cfg, args.data)
    plugins = build_plugins(fit, ds, error, cfgmod.series_policy(cfg))
    bi = beta_confidence(fit, plugins, cfg.alpha)
    lines = [
        f"alpha = {_fmt(bi.alpha)}",
        "center = " + ", ".join(_fmt(b) for b in bi.center),
        f"radius2 = {_fmt(bi.radius2)}",
    ]
    _write_lines(args.out, lines)
    rows = ["matrix,i,j,value"]
    for name, mat in (
        ("shape", bi.shape),
        ("sandwich", bi.sandwich),
        ("m_hat", bi.m_hat),
        ("sigma_hat", bi.sigma_hat),
    ):
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                rows.append(f"{name},{i},{j},{_fmt(mat[i, j])}")
    _write_lines(args.out + ".ellipsoid.csv", rows)
    print(f"wrote ellipsoid report to {args.out}")
    return 0


def cmd_infer_functional(args):
    cfg = _load(args)
    ds, error, _, fit = _fit_from_csv(cfg, args.data)
    plugins = build_plugins(fit, ds, error, cfgmod.series_policy(cfg))
    f_nodes = cfgmod.bump_f_nodes(cfg)
    fi = functional_interval(fit, f_nodes, plugins, cfg.alpha,
                             margin=cfg.margin_frac * cfg.tau)
    lines = [
        f"alpha = {_fmt(fi.alpha)}",
        f"value = {_fmt(fi.value)}",
        f"interval_lo = {_fmt(fi.interval[0])}",
        f"interval_hi = {_fmt(fi.interval[1])}",
        f"sigma2 = {_fmt(fi.sigma2)}",
        f"margin = {_fmt(fi.margin)}",
        f"m_phi_norm = {_fmt(fi.diagnostics['m_phi_norm'])}",
        f"residual = {_fmt(fi.diagnostics['residual'])}",
    ]
    _write_lines(args.out, lines)
    rows = ["t,phi,f"]
    times = plugins.times
    for j in range(times.size):
        rows.append(f"{_fmt(times[j])},{_fmt(fi.phi_nodes[j])},{_fmt(f_nodes[j])}")
    _write_lines(args.out + ".phi.csv", rows)
    print(f"wrote functional report to {args.out}")
    return 0


def cmd_coverage(args):
    cfg = _load(args)
    rows, agg = covmod.run_coverage(cfg, jobs=args.jobs)
    header = [
        "replicate", "status", "beta_covered", "functional_covered",
        "interval_lo", "interval_hi", "interval_len", "functional_target",
        "floor_ok", "min_lambda1", "min_lambda2",
    ]
    out_rows = [",".join(header)]
    for r in rows:
        cells = []
        for key in header:
            v = r.get(key, "")
            if isinstance(v, float):
                cells.append(_fmt(v))
            else:
                cells.append(str(v))
        out_rows.append(",".join(cells))
    _write_lines(args.out, out_rows)
    print(f"replicates = {agg['replicates']}")
    print(f"ok = {agg['ok']}")
    print(f"beta_coverage = {agg['beta_coverage']}")
    print(f"functional_coverage = {agg['functional_coverage']}")
    print(f"avg_interval_length = {agg['avg_interval_length']}")
    print(f"failures = {agg['failures']}")
    return 0


def cmd_plot(args):
    cfg = _load(args)
    ds, error, _, fit = _fit_from_csv(cfg, args.data)
    plugins = build_plugins(fit, ds, error, cfgmod.series_policy(cfg))
    km = km_censor(ds)
    rows = ["series,x,y"]
    for t, v in fit.lambda_hat.to_rows():
        rows.append(f"lambda_hat,{_fmt(t)},{_fmt(v)}")
    for t, v in km.to_rows():
        rows.append(f"censor_survival,{_fmt(t)},{_fmt(v)}")
    tab = plugins.tables
    m = tab.dim
    for j, t in enumerate(plugins.times):
        rows.append(f"b_hat,{_fmt(t)},{_fmt(tab.b[j])}")
        for c in range(m):
            rows.append(f"a_hat_{c + 1},{_fmt(t)},{_fmt(tab.a[j, c])}")
        for c in range(m):
            for d in range(m):
                rows.append(f"p_hat_{c + 1}{d + 1},{_fmt(t)},{_fmt(tab.p[j, c, d])}")
    _write_lines(args.out, rows)
    print(f"wrote plot series to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coxerr",
        description="Cox proportional hazards with covariate measurement error",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--seed", type=int, default=None)
        if data:
            p.add_argument("--data", required=True, help="dataset CSV")

    p = sub.add_parser("simulate", help="draw a synthetic dataset CSV")
    common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--with-truth", action="store_true", dest="with_truth")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="two-stage corrected-likelihood fit")
    common(p, data=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("infer-beta", help="confidence ellipsoid for beta")
    common(p, data=True)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_infer_beta)

    p = sub.add_parser("infer-functional", help="confidence interval for the hazard functional")
    common(p, data=True)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_infer_functional)

    p = sub.add_parser("coverage", help="Monte Carlo coverage study")
    common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("plot", help="emit CSV series for external plotting")
    common(p, data=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CoxerrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for types, code in _EXIT_CODES:
            if isinstance(exc, types):
                return code
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
