"""Flat ``key = value`` configuration with dotted namespaces.

Example::

    # estimation run
    grid.size = 100
    grid.tau = 1.0
    grid.lipschitz = 2.0
    truth.lambda0.intercept = 1.0
    truth.lambda0.slope = 0.5
    truth.beta0 = 0.5, -0.3
    covariate.family = uniform
    covariate.halfwidth = 1.0
    error.family = gaussian
    error.sigma = 0.3
    beta_box.lower = -1.5, -1.5
    beta_box.upper = 1.5, 1.5
    optimizer.R = 15.0

Blank lines and ``#`` comments are allowed; vectors are comma-separated.
Unknown keys and malformed values fail with the offending line number.
"""

from dataclasses import dataclass, field

import numpy as np

from coxerr.deconvolution import SeriesPolicy
from coxerr.error_models import (
    BoundedUniformError,
    ErrorModel,
    GaussianError,
    NoError,
    ShiftedPoissonError,
)
from coxerr.errors import ConfigError
from coxerr.estimator import FitConfig
from coxerr.hazard_grid import GridFunction
from coxerr.simulate import CovariateLaw, TrueModel


@dataclass
class RunConfig:
    grid_size: int = 100
    tau: float = 1.0
    lipschitz: float = 2.0
    lambda0_intercept: float = 1.0
    lambda0_slope: float = 0.5
    beta0: np.ndarray = field(default_factory=lambda: np.array([0.5, -0.3]))
    covariate_family: str = "uniform"
    covariate_halfwidth: float = 1.0
    covariate_sigma: float = 1.0
    error_family: str = "none"
    error_sigma: float = 0.3
    error_halfwidths: np.ndarray | None = None
    error_intensities: np.ndarray | None = None
    beta_lower: np.ndarray | None = None
    beta_upper: np.ndarray | None = None
    radius: float | None = None
    epsilon_scale: float = 1.0
    max_outer_iters: int = 200
    beta_restarts: int = 5
    convergence_tol: float = 1e-6
    series_max_terms: int = 80
    series_tail_tol: float = 1e-10
    alpha: float = 0.05
    margin_frac: float = 0.2
    replicates: int = 300
    jobs: int = 1
    seed: int = 12345
    n: int = 1000


_SCALARS = {
    "grid.size": ("grid_size", int),
    "grid.tau": ("tau", float),
    "grid.lipschitz": ("lipschitz", float),
    "truth.lambda0.intercept": ("lambda0_intercept", float),
    "truth.lambda0.slope": ("lambda0_slope", float),
    "covariate.family": ("covariate_family", str),
    "covariate.halfwidth": ("covariate_halfwidth", float),
    "covariate.sigma": ("covariate_sigma", float),
    "error.family": ("error_family", str),
    "error.sigma": ("error_sigma", float),
    "optimizer.R": ("radius", float),
    "optimizer.epsilon_scale": ("epsilon_scale", float),
    "optimizer.max_outer_iters": ("max_outer_iters", int),
    "optimizer.beta_restarts": ("beta_restarts", int),
    "optimizer.tol": ("convergence_tol", float),
    "series.max_terms": ("series_max_terms", int),
    "series.tail_tol": ("series_tail_tol", float),
    "inference.alpha": ("alpha", float),
    "inference.margin_frac": ("margin_frac", float),
    "coverage.replicates": ("replicates", int),
    "coverage.jobs": ("jobs", int),
    "seed": ("seed", int),
    "n": ("n", int),
}

_VECTORS = {
    "truth.beta0": "beta0",
    "error.halfwidths": "error_halfwidths",
    "error.intensities": "error_intensities",
    "beta_box.lower": "beta_lower",
    "beta_box.upper": "beta_upper",
}

_FAMILIES = ("none", "uniform", "gaussian", "poisson")


def load_config(path) -> RunConfig:
    cfg = RunConfig()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key in _SCALARS:
                attr, cast = _SCALARS[key]
                try:
                    setattr(cfg, attr, cast(value))
                except ValueError:
                    raise ConfigError(
                        f"cannot parse {value!r} as {cast.__name__}",
                        line=lineno, key=key,
                    ) from None
            elif key in _VECTORS:
                try:
                    vec = np.array([float(v) for v in value.split(",")])
                except ValueError:
                    raise ConfigError(
                        f"cannot parse {value!r} as a comma-separated vector",
                        line=lineno, key=key,
                    ) from None
                setattr(cfg, _VECTORS[key], vec)
            else:
                raise ConfigError("unknown key", line=lineno, key=key)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig):
    if cfg.error_family not in _FAMILIES:
        raise ConfigError(
            f"must be one of {'|'.join(_FAMILIES)}", key="error.family"
        )
    if cfg.grid_size < 1:
        raise ConfigError("grid size must be >= 1", key="grid.size")
    if cfg.tau <= 0:
        raise ConfigError("tau must be positive", key="grid.tau")
    if cfg.lipschitz <= 0:
        raise ConfigError("Lipschitz constant must be positive", key="grid.lipschitz")
    if not 0 < cfg.alpha < 1:
        raise ConfigError("alpha must be in (0,1)", key="inference.alpha")
    if not 0 < cfg.margin_frac < 1:
        raise ConfigError("margin fraction must be in (0,1)", key="inference.margin_frac")
    m = cfg.beta0.size
    if cfg.error_family == "uniform" and cfg.error_halfwidths is not None \
            and cfg.error_halfwidths.size != m:
        raise ConfigError("halfwidths dimension mismatch", key="error.halfwidths")
    if cfg.error_family == "poisson" and cfg.error_intensities is not None \
            and cfg.error_intensities.size != m:
        raise ConfigError("intensities dimension mismatch", key="error.intensities")
    for name, vec in (("beta_box.lower", cfg.beta_lower), ("beta_box.upper", cfg.beta_upper)):
        if vec is not None and vec.size != m:
            raise ConfigError("beta box dimension mismatch", key=name)


# -- builders ---------------------------------------------------------------

def error_model(cfg: RunConfig) -> ErrorModel:
    m = cfg.beta0.size
    if cfg.error_family == "none":
        return NoError(m)
    if cfg.error_family == "gaussian":
        return GaussianError(cfg.error_sigma, m)
    if cfg.error_family == "uniform":
        hw = cfg.error_halfwidths if cfg.error_halfwidths is not None else np.full(m, 0.5)
        return BoundedUniformError(hw)
    mu = cfg.error_intensities if cfg.error_intensities is not None else np.ones(m)
    return ShiftedPoissonError(mu)


def lambda0_grid(cfg: RunConfig) -> GridFunction:
    t = np.linspace(0.0, cfg.tau, cfg.grid_size + 1)
    values = cfg.lambda0_intercept + cfg.lambda0_slope * t
    return GridFunction(cfg.tau, values, cfg.lipschitz)


def true_model(cfg: RunConfig) -> TrueModel:
    m = cfg.beta0.size
    cov = CovariateLaw(
        family=cfg.covariate_family,
        halfwidth=cfg.covariate_halfwidth,
        sigma=cfg.covariate_sigma,
        dim=m,
    )
    return TrueModel(lambda0_grid(cfg), cfg.beta0, cov, error_model(cfg))


def beta_box(cfg: RunConfig):
    m = cfg.beta0.size
    lo = cfg.beta_lower if cfg.beta_lower is not None else np.full(m, -1.5)
    hi = cfg.beta_upper if cfg.beta_upper is not None else np.full(m, 1.5)
    return lo, hi


def fit_config(cfg: RunConfig, n: int, dataset=None) -> FitConfig:
    radius = cfg.radius
    if radius is None:
        # data-driven default: 10x the crude events-per-time hazard scale
        if dataset is not None and dataset.y.sum() > 0:
            radius = 10.0 * max(float(dataset.delta.sum() / dataset.y.sum()), 1.0)
        else:
            radius = 10.0 * max(cfg.lambda0_intercept + abs(cfg.lambda0_slope) * cfg.tau, 1.0)
    return FitConfig(
        grid_size=cfg.grid_size,
        tau=cfg.tau,
        lipschitz=cfg.lipschitz,
        radius=radius,
        epsilon_n=cfg.epsilon_scale / max(n, 1),
        max_outer_iters=cfg.max_outer_iters,
        beta_restarts=cfg.beta_restarts,
        convergence_tol=cfg.convergence_tol,
    )


def series_policy(cfg: RunConfig) -> SeriesPolicy:
    return SeriesPolicy(max_terms=cfg.series_max_terms, tail_tol=cfg.series_tail_tol)


def bump_f_nodes(cfg: RunConfig) -> np.ndarray:
    """Default Lipschitz weight: trapezoidal bump supported on [0, tau - margin].

    Rises linearly on the first quarter of the support, flat at 1, falls on
    the last quarter; Lipschitz with constant 4 / support length.
    """
    tau = cfg.tau
    end = tau * (1.0 - cfg.margin_frac)
    ramp = 0.25 * end
    t = np.linspace(0.0, tau, cfg.grid_size + 1)
    up = t / ramp
    down = (end - t) / ramp
    return np.clip(np.minimum(up, down), 0.0, 1.0) * (t <= end)
