"""Monte Carlo coverage harness: simulate, fit, infer, record membership.

Each replicate draws a fresh dataset from the configured truth, runs the
two-stage fit, builds the beta ellipsoid and the functional interval, and
records whether they cover the true beta and the true functional value.
Replicate seeds are derived from the root seed by index, so the summary is
identical no matter how many workers run the replicates.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from coxerr import config as cfgmod
from coxerr.errors import CoxerrError
from coxerr.estimator import fit_corrected, fit_modified
from coxerr.hazard_grid import grid_product_integral
from coxerr.inference import beta_confidence, build_plugins, functional_interval
from coxerr.likelihood import LikelihoodContext
from coxerr.simulate import draw_dataset

_REPLICATE_KEY = 7777


def replicate_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(_REPLICATE_KEY, index)).generate_state(1)[0])


def run_replicate(cfg, index: int, seed: int) -> dict:
    """One simulate-fit-infer pass; failures are recorded, not raised."""
    row = {"replicate": index, "status": "ok"}
    try:
        model = cfgmod.true_model(cfg)
        ds = draw_dataset(model, cfg.n, replicate_seed(seed, index), with_truth=False)
        lo, hi = cfgmod.beta_box(cfg)
        ctx = LikelihoodContext(ds, model.error, lo, hi)
        fit_cfg = cfgmod.fit_config(cfg, cfg.n, dataset=ds)
        first = fit_corrected(ctx, fit_cfg)
        fit = fit_modified(ctx, fit_cfg, first)

        mu1 = first.lambda_hat.min_value()
        mu2 = fit.lambda_hat.min_value()
        row["floor_ok"] = int(mu1 <= 0.0 or mu2 >= 0.5 * mu1 - 1e-12)
        row["min_lambda1"] = mu1
        row["min_lambda2"] = mu2

        plugins = build_plugins(fit, ds, model.error, cfgmod.series_policy(cfg))
        bi = beta_confidence(fit, plugins, cfg.alpha)
        row["beta_covered"] = int(bi.contains(cfg.beta0))

        f_nodes = cfgmod.bump_f_nodes(cfg)
        fi = functional_interval(
            fit, f_nodes, plugins, cfg.alpha, margin=cfg.margin_frac * cfg.tau
        )
        target = grid_product_integral(
            cfgmod.lambda0_grid(cfg).values, f_nodes, cfg.tau
        )
        row["functional_target"] = target
        row["interval_lo"], row["interval_hi"] = fi.interval
        row["interval_len"] = fi.interval[1] - fi.interval[0]
        row["functional_covered"] = int(fi.interval[0] <= target <= fi.interval[1])
    except CoxerrError as exc:
        row["status"] = type(exc).__name__
    return row


def _worker(args):
    cfg, index, seed = args
    return run_replicate(cfg, index, seed)


def run_coverage(cfg, replicates: int | None = None, seed: int | None = None,
                 jobs: int | None = None):
    """Run the harness; returns (per-replicate rows, aggregate summary)."""
    replicates = cfg.replicates if replicates is None else replicates
    seed = cfg.seed if seed is None else seed
    jobs = cfg.jobs if jobs is None else jobs

    tasks = [(cfg, r, seed) for r in range(replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_worker, tasks))
    else:
        rows = [run_replicate(cfg, r, seed) for r in range(replicates)]

    ok = [r for r in rows if r["status"] == "ok"]
    failures = {}
    for r in rows:
        if r["status"] != "ok":
            failures[r["status"]] = failures.get(r["status"], 0) + 1
    n_fail = sum(failures.values())
    if replicates > 0 and n_fail / replicates > 0.2:
        raise CoxerrError(
            f"coverage aborted: {n_fail}/{replicates} replicates failed ({failures})"
        )
    agg = {
        "replicates": replicates,
        "ok": len(ok),
        "beta_coverage": float(np.mean([r["beta_covered"] for r in ok])) if ok else float("nan"),
        "functional_coverage": float(np.mean([r["functional_covered"] for r in ok])) if ok else float("nan"),
        "avg_interval_length": float(np.mean([r["interval_len"] for r in ok])) if ok else float("nan"),
        "floor_ok_all": int(all(r["floor_ok"] for r in ok)) if ok else 0,
        "failures": failures,
    }
    return rows, agg
