"""Two-stage maximization of the corrected likelihood.

Stage one maximizes over the product of the hazard cone (capped at sup-norm
radius R) and the compact beta box, to within the tolerance eps_n required
of a near-maximizer.  Stage two, run only when the stage-one hazard has a
positive minimum mu, repeats the maximization with the extra constraint
min lam >= mu/2; that floor is what makes the estimator asymptotically
normal, and it is enforced exactly through the projection.

The alternation is block-coordinate ascent:

* lambda step -- projected gradient ascent on the hazard nodes.  For fixed
  beta the objective is concave in lambda, so projected gradient with a
  backtracking (Armijo) line search converges to the block optimum; the
  projection is the Dykstra kernel from hazard_grid.
* beta step -- bounded quasi-Newton (L-BFGS-B) inside the beta box.  Joint
  concavity in (lambda, beta) is not guaranteed, so the first sweep runs a
  Sobol-spread multi-start over the box and keeps the best; later sweeps
  refine the incumbent.

Sweeps stop once the objective gain falls below min(eps_n/2, 1e-7) -- never
looser than the near-maximizer tolerance, tightened further so that the
downstream confidence sets are not polluted by optimizer noise.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from coxerr import hazard_grid, likelihood
from coxerr.error_models import mgf
from coxerr.errors import NoEvents, NonConvergence
from coxerr.hazard_grid import GridFunction
from coxerr.likelihood import LikelihoodContext


@dataclass(frozen=True)
class FitConfig:
    grid_size: int = 100
    tau: float = 1.0
    lipschitz: float = 2.0
    radius: float = 15.0
    epsilon_n: float = 1e-3
    max_outer_iters: int = 200
    beta_restarts: int = 5
    convergence_tol: float = 1e-6
    max_lambda_iters: int = 400

    def __post_init__(self):
        if self.epsilon_n <= 0 or self.radius <= 0:
            raise ValueError("epsilon_n and radius must be positive")
        if self.beta_restarts < 1:
            raise ValueError("beta_restarts must be >= 1")


@dataclass
class FitResult:
    lambda_hat: GridFunction
    beta_hat: np.ndarray
    objective_value: float
    stage: str
    diagnostics: dict = field(default_factory=dict)


def _lambda_ascent(ctx, values, beta, cfg, floor):
    """Projected gradient ascent in the hazard nodes for fixed beta."""
    ds = ctx.dataset
    gd = ctx.grid_data(cfg.tau, cfg.grid_size)
    h_mat, k_idx, frac = gd["H"], gd["k"], gd["frac"]
    ev = ds.delta == 1
    k_ev, frac_ev = k_idx[ev], frac[ev]
    s = ds.w @ beta
    eta = np.exp(s) / mgf(ctx.error, beta)
    lin = (h_mat.T @ eta) / ds.n  # gradient of the integral part, constant in v
    const = float(np.sum(s[ev])) / ds.n

    def obj(v):
        lam_y = v[k_ev] * (1.0 - frac_ev) + v[k_ev + 1] * frac_ev
        if np.any(lam_y <= 0.0):
            return -math.inf
        return float(np.sum(np.log(lam_y))) / ds.n + const - float(lin @ v)

    def grad(v):
        lam_y = v[k_ev] * (1.0 - frac_ev) + v[k_ev + 1] * frac_ev
        out = np.zeros_like(v)
        inv = 1.0 / lam_y
        np.add.at(out, k_ev, (1.0 - frac_ev) * inv)
        np.add.at(out, k_ev + 1, frac_ev * inv)
        return out / ds.n - lin

    def proj(v):
        return hazard_grid.project(
            v, cfg.tau, cfg.lipschitz, floor=floor, ceiling=cfg.radius
        ).values

    v = proj(values)
    f_v = obj(v)
    step = 1.0
    iters = 0
    residual = np.inf
    for _ in range(cfg.max_lambda_iters):
        iters += 1
        g = grad(v)
        accepted = False
        for _ in range(60):
            trial = proj(v + step * g)
            move = trial - v
            f_t = obj(trial)
            if f_t >= f_v + 1e-4 * float(g @ move):
                accepted = True
                break
            step *= 0.5
            if step < 1e-18:
                break
        if not accepted:
            residual = 0.0
            break
        norm_move = float(np.linalg.norm(move))
        residual = norm_move / step
        v, f_v = trial, f_t
        step *= 1.5
        if residual < cfg.convergence_tol:
            break
    return v, f_v, iters, residual


def _beta_starts(cfg, ctx, incumbent=None):
    m = ctx.dim
    pts = [0.5 * (ctx.beta_lo + ctx.beta_hi)]
    if incumbent is not None:
        pts.insert(0, np.asarray(incumbent, dtype=np.float64))
    extra = cfg.beta_restarts - len(pts)
    if extra > 0:
        # power-of-two draw keeps the Sobol sequence balanced; the first
        # point (the origin corner) is dropped
        bits = int(np.ceil(np.log2(extra + 1)))
        sob = qmc.Sobol(d=m, scramble=False).random_base2(bits)[1 : extra + 1]
        pts.extend(ctx.beta_lo + sob * (ctx.beta_hi - ctx.beta_lo))
    return pts[: max(cfg.beta_restarts, len(pts))]


def _beta_step(ctx, lam, starts, cfg):
    """Bounded quasi-Newton from each start; best objective wins, first-start ties.

    Each start itself is a candidate, so the step can never lose ground.
    """
    bounds = list(zip(ctx.beta_lo, ctx.beta_hi))
    best = None
    for start in starts:
        start = np.asarray(start, dtype=np.float64)
        cand = (likelihood.objective(ctx, lam, start), start)
        if best is None or cand[0] > best[0]:
            best = cand
        res = minimize(
            lambda b: -likelihood.objective(ctx, lam, b),
            start,
            jac=lambda b: -likelihood.grad_beta(ctx, lam, b),
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 200, "ftol": 1e-14, "gtol": 1e-9},
        )
        cand = (-res.fun, res.x)
        if cand[0] > best[0]:
            best = cand
    return best[1], best[0]


def _block_ascent(ctx: LikelihoodContext, cfg: FitConfig, floor, v0, beta0,
                  multi_start=True):
    gain_tol = min(cfg.epsilon_n / 2.0, 1e-7)
    v = hazard_grid.project(
        v0, cfg.tau, cfg.lipschitz, floor=max(floor, 1e-12), ceiling=cfg.radius
    ).values
    beta = np.asarray(beta0, dtype=np.float64)
    history = []
    obj_prev = likelihood.objective(
        ctx, GridFunction(cfg.tau, v, cfg.lipschitz), beta
    )
    lam_iters_total = 0
    residual = np.inf
    sweeps = 0
    gain = np.inf
    for sweep in range(cfg.max_outer_iters):
        sweeps = sweep + 1
        v, _, it, residual = _lambda_ascent(ctx, v, beta, cfg, floor)
        lam_iters_total += it
        lam = GridFunction(cfg.tau, v, cfg.lipschitz)
        starts = (
            _beta_starts(cfg, ctx, incumbent=beta) if (sweep == 0 and multi_start)
            else [beta]
        )
        beta, obj_now = _beta_step(ctx, lam, starts, cfg)
        history.append(obj_now)
        gain = obj_now - obj_prev
        obj_prev = obj_now
        if 0 <= gain < gain_tol and sweep > 0:
            break
    else:
        if gain > cfg.epsilon_n:
            raise NonConvergence(
                f"outer sweeps exhausted with objective gain {gain:.3e} > eps_n"
            )
    lam = GridFunction(cfg.tau, v, cfg.lipschitz)
    beta_grad = likelihood.grad_beta(ctx, lam, beta)
    diag = {
        "outer_sweeps": sweeps,
        "lambda_iters": lam_iters_total,
        "lambda_residual": residual,
        "beta_grad_norm": float(np.linalg.norm(beta_grad)),
        "objective_history": history,
        "floor": floor,
    }
    return lam, beta, obj_prev, diag


def _init_values(ctx, cfg):
    ds = ctx.dataset
    rate = ds.delta.sum() / max(ds.y.sum(), 1e-12)
    level = float(np.clip(rate, 1e-3, cfg.radius))
    return np.full(cfg.grid_size + 1, level)


def fit_corrected(ctx: LikelihoodContext, cfg: FitConfig) -> FitResult:
    """Stage-one estimator: near-maximizer over the capped parameter set."""
    if not np.any(ctx.dataset.delta == 1):
        raise NoEvents("no uncensored records; hazard level is unidentified")
    v0 = _init_values(ctx, cfg)
    beta0 = 0.5 * (ctx.beta_lo + ctx.beta_hi)
    lam, beta, value, diag = _block_ascent(ctx, cfg, 0.0, v0, beta0, multi_start=True)
    return FitResult(lam, beta, value, "corrected", diag)


def fit_modified(ctx: LikelihoodContext, cfg: FitConfig, first: FitResult) -> FitResult:
    """Stage-two estimator with hazard floored at half the stage-one minimum.

    Returns ``first`` unchanged when its minimum is zero.
    """
    if first.stage != "corrected":
        raise ValueError("fit_modified expects a corrected-stage result")
    mu = first.lambda_hat.min_value()
    if mu <= 0.0:
        return first
    floor = 0.5 * mu
    lam, beta, value, diag = _block_ascent(
        ctx, cfg, floor, first.lambda_hat.values, first.beta_hat, multi_start=True
    )
    return FitResult(lam, beta, value, "modified", diag)
