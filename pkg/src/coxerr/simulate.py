"""Synthetic data generator for the error-contaminated Cox model.

Lifetimes follow the proportional-hazards law with conditional survival
G_T(t|X) = exp(-e^{b'X} L0(t)), L0 the cumulative baseline hazard, so a
standard-exponential draw E gives T = L0^{-1}(E e^{-b'X}) when E does not
exceed e^{b'X} L0(tau) (otherwise T falls beyond the horizon).  The censor
is uniform on (0, tau]; covariates default to a uniform box so that every
moment condition of the estimator holds automatically; the observed
covariate is W = X + U with U drawn from one of the supported error
families.

Reproducibility contract: record i draws from
``default_rng(SeedSequence(seed, spawn_key=(i,)))`` in the fixed order
covariate X, unit exponential E, censor C, error U (one generator call
each).  Datasets are therefore bit-identical for a given (seed, n) no
matter how generation is chunked or parallelized, and tests may replay a
record's stream.
"""

from dataclasses import dataclass

import numpy as np

from coxerr.error_models import ErrorModel
from coxerr.errors import InvalidModel
from coxerr.hazard_grid import GridFunction

_BISECT_REL_TOL = 1e-12


@dataclass(frozen=True)
class CovariateLaw:
    """Bounded box law (default) or isotropic Gaussian for the true covariate.

    The Gaussian option is only appropriate when the beta box is small;
    with bounded covariates the estimator's moment conditions hold for any
    compact beta set.
    """

    family: str = "uniform"
    halfwidth: float = 1.0
    sigma: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian"):
            raise ValueError(f"unknown covariate family {self.family!r}")
        if self.family == "uniform" and self.halfwidth <= 0:
            raise ValueError("covariate box halfwidth must be positive")
        if self.family == "gaussian" and self.sigma <= 0:
            raise ValueError("covariate sigma must be positive")
        if self.dim < 1:
            raise ValueError("covariate dimension must be >= 1")

    def sample(self, rng, size):
        if self.family == "uniform":
            return rng.uniform(-self.halfwidth, self.halfwidth, size=(size, self.dim))
        return rng.normal(0.0, self.sigma, size=(size, self.dim))


@dataclass(frozen=True)
class TrueModel:
    """Fully specified data-generating mechanism, kept for oracle tests."""

    lambda0: GridFunction
    beta0: np.ndarray
    covariate: CovariateLaw
    error: ErrorModel
    censor: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "beta0", np.atleast_1d(np.asarray(self.beta0, float)))
        if self.censor != "uniform":
            raise ValueError("only the uniform(0, tau) censor is supported")
        m = self.beta0.size
        if self.covariate.dim != m or self.error.dim != m:
            raise ValueError("beta0, covariate law and error model disagree on dimension")

    @property
    def dim(self):
        return self.beta0.size

    @property
    def tau(self):
        return self.lambda0.tau


@dataclass
class Dataset:
    """Observed triples (Y, Delta, W), with optional hidden truth (X, T, C)."""

    y: np.ndarray
    delta: np.ndarray
    w: np.ndarray
    x: np.ndarray | None = None
    t: np.ndarray | None = None
    c: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.int8)
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim == 1:
            self.w = self.w[:, None]
        if not (self.y.size == self.delta.size == self.w.shape[0]):
            raise ValueError("y, delta, w must have matching lengths")
        if not np.all((self.delta == 0) | (self.delta == 1)):
            raise ValueError("delta must be 0/1")

    @property
    def n(self):
        return self.y.size

    @property
    def dim(self):
        return self.w.shape[1]

    @property
    def has_truth(self):
        return self.x is not None and self.t is not None and self.c is not None

    def without_truth(self):
        return Dataset(self.y, self.delta, self.w)


def _record_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def draw_dataset(model: TrueModel, n: int, seed: int, with_truth: bool = True) -> Dataset:
    """Draw n i.i.d. records; deterministic given (seed, n)."""
    if n < 1:
        raise ValueError("n must be positive")
    if model.lambda0.min_value() <= 0.0:
        raise InvalidModel("baseline hazard must be strictly positive at every node")

    m = model.dim
    tau = model.tau
    x = np.empty((n, m))
    e = np.empty(n)
    c = np.empty(n)
    u = np.empty((n, m))
    for i in range(n):
        rng = _record_rng(seed, i)
        x[i] = model.covariate.sample(rng, 1)[0]
        e[i] = rng.exponential()
        c[i] = rng.uniform(0.0, tau)
        u[i] = model.error.sample(rng, 1)[0]

    risk = np.exp(x @ model.beta0)
    lam_total = model.lambda0.cumulative(tau)
    target = e / risk
    t = np.full(n, np.inf)
    finite = target <= lam_total
    if np.any(finite):
        t[finite] = _invert_cumulative(model.lambda0, target[finite])

    y = np.minimum(t, c)
    delta = (t <= c).astype(np.int8)
    w = x + u
    ds = Dataset(y, delta, w, x=x, t=t, c=c)
    return ds if with_truth else ds.without_truth()


def _invert_cumulative(lambda0: GridFunction, target):
    """Solve L0(t) = target by bisection on [0, tau] (L0 strictly increasing)."""
    tau = lambda0.tau
    lo = np.zeros_like(target)
    hi = np.full_like(target, tau)
    tol = _BISECT_REL_TOL * tau
    # fixed iteration count: halving reaches tol well before 50 steps
    steps = max(1, int(np.ceil(np.log2(tau / tol))) + 2)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = lambda0.cumulative(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# -- CSV contract ------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def write_csv(dataset: Dataset, path, with_truth: bool = False):
    """Write the dataset CSV: header y,delta,w1..wm[,x1..xm,t,c].

    Floats use shortest round-trip decimals so a reload is bit-exact.
    """
    m = dataset.dim
    cols = ["y", "delta"] + [f"w{j+1}" for j in range(m)]
    if with_truth:
        if not dataset.has_truth:
            raise ValueError("dataset carries no hidden truth")
        cols += [f"x{j+1}" for j in range(m)] + ["t", "c"]
    lines = [",".join(cols)]
    for i in range(dataset.n):
        row = [_fmt(dataset.y[i]), str(int(dataset.delta[i]))]
        row += [_fmt(v) for v in dataset.w[i]]
        if with_truth:
            row += [_fmt(v) for v in dataset.x[i]]
            row += [_fmt(dataset.t[i]), _fmt(dataset.c[i])]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    idx = {name: j for j, name in enumerate(header)}
    if "y" not in idx or "delta" not in idx:
        raise ValueError("dataset CSV must have y and delta columns")
    m = sum(1 for name in header if name.startswith("w") and name[1:].isdigit())
    if m == 0:
        raise ValueError("dataset CSV must have w1..wm columns")
    data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    y = data[:, idx["y"]]
    delta = data[:, idx["delta"]].astype(np.int8)
    w = data[:, [idx[f"w{j+1}"] for j in range(m)]]
    kwargs = {}
    if "t" in idx and "c" in idx and "x1" in idx:
        kwargs = {
            "x": data[:, [idx[f"x{j+1}"] for j in range(m)]],
            "t": data[:, idx["t"]],
            "c": data[:, idx["c"]],
        }
    return Dataset(y, delta, w, **kwargs)
