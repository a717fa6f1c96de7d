"""Test objectives with certified constants, plus stochastic-gradient noise models.

Every objective carries an exact analytic gradient, certified smoothness and
strong-convexity constants (L, mu), and its optimal value f_star.  Noise
models describe how stochastic gradients are produced and carry a variance
certificate sigma2 used by all bound computations downstream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numpy.random import Generator

SYMMETRY_TOL = 1e-10
EIG_REL_TOL = 1e-10
FSTAR_GRAD_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _short_hash(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:8]


def _log1pexp(t: np.ndarray) -> np.ndarray:
    """log(1 + exp(t)), overflow-safe."""
    return np.logaddexp(0.0, t)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense feature matrix with per-sample labels.

    labels are either binary (+1/-1, classification) or real (regression);
    `label_kind` records which contract the data satisfies.
    """

    features: np.ndarray
    labels: np.ndarray
    n: int
    d: int
    label_kind: str
    info: dict = field(default_factory=dict)


def make_dataset(features: np.ndarray, labels: np.ndarray, info: Optional[dict] = None) -> Dataset:
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be a (n, d) matrix with n >= 1")
    if labels.shape != (features.shape[0],):
        raise ValueError("labels must be a length-n vector")
    if not np.all(np.isfinite(features)) or not np.all(np.isfinite(labels)):
        raise ValueError("dataset contains non-finite entries")
    binary = bool(np.all(np.isin(labels, (-1.0, 1.0))))
    return Dataset(
        features=_freeze(features),
        labels=_freeze(labels),
        n=features.shape[0],
        d=features.shape[1],
        label_kind="binary" if binary else "real",
        info=dict(info or {}),
    )


def load_dataset_csv(path: str) -> Dataset:
    """Dense CSV loader: one row per sample, last column is the label."""
    raw = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if raw.shape[1] < 2:
        raise ValueError("CSV needs at least one feature column plus a label column")
    return make_dataset(raw[:, :-1], raw[:, -1], info={"source": path})


def make_synthetic_classification(n: int, d: int, separation: float, seed: int) -> Dataset:
    """Two Gaussian clusters at +/- separation * u along a random unit direction u.

    Labels are an exactly balanced shuffled +1/-1 split, so the class balance
    holds by construction rather than in probability.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    labels = np.concatenate([np.ones(n - n // 2), -np.ones(n // 2)])
    rng.shuffle(labels)
    features = labels[:, None] * (separation * u)[None, :] + rng.standard_normal((n, d))
    return make_dataset(features, labels, info={"direction": u, "separation": separation, "seed": seed})


# --- objective payloads -------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticPayload:
    A: np.ndarray
    b: np.ndarray


@dataclass(frozen=True, eq=False)
class LeastSquaresPayload:
    data: Dataset

    @property
    def X(self) -> np.ndarray:
        return self.data.features

    @property
    def y(self) -> np.ndarray:
        return self.data.labels


@dataclass(frozen=True, eq=False)
class LogisticPayload:
    data: Dataset
    lam: float

    @property
    def X(self) -> np.ndarray:
        return self.data.features

    @property
    def y(self) -> np.ndarray:
        return self.data.labels


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """An objective with exact gradient and certified constants.

    L and mu certify the quadratic upper/lower curvature bounds; f_star is
    exact for quadratic / least-squares and a cached high-precision solve for
    logistic.
    """

    dimension: int
    kind: str
    payload: object
    L: float
    mu: float
    f_star: float
    x_star: Optional[np.ndarray]
    label: str

    @property
    def dataset(self) -> Optional[Dataset]:
        return getattr(self.payload, "data", None)


# --- certified extreme eigenvalues --------------------------------------


def _rayleigh(A: np.ndarray, v: np.ndarray) -> float:
    return float(v @ (A @ v))


def _power_iterate(A: np.ndarray, apply, rel_tol: float, max_iter: int) -> float:
    """Rayleigh quotient of the dominant eigenvector of `apply`, w.r.t. A."""
    d = A.shape[0]
    v = np.ones(d) / np.sqrt(d)
    v += 1e-3 * np.cos(np.arange(d) + 1.0)  # break symmetry deterministically
    v /= np.linalg.norm(v)
    rho = _rayleigh(A, v)
    if rho < 0:
        raise ValueError("matrix is not positive semidefinite (negative Rayleigh quotient)")
    for _ in range(max_iter):
        w = apply(v)
        v = w / np.linalg.norm(w)
        rho_new = _rayleigh(A, v)
        if rho_new < 0:
            raise ValueError("matrix is not positive semidefinite (negative Rayleigh quotient)")
        if abs(rho_new - rho) <= rel_tol * abs(rho_new):
            return rho_new
        rho = rho_new
    return rho


def _power_lambda_max(A: np.ndarray, rel_tol: float = EIG_REL_TOL, max_iter: int = 100000) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    return _power_iterate(A, lambda v: A @ v, rel_tol, max_iter)


def _power_extreme_eigs(A: np.ndarray, rel_tol: float = EIG_REL_TOL, max_iter: int = 100000) -> tuple[float, float]:
    """Largest and smallest eigenvalue of an SPD matrix.

    Power iteration for the top, inverse power iteration for the bottom,
    both run to relative Rayleigh-quotient tolerance.  Definiteness is
    guarded twice: a Cholesky factorization up front and a sign check on
    every Rayleigh quotient along the way.
    """
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError("matrix is not positive definite") from None
    lam_max = _power_iterate(A, lambda v: A @ v, rel_tol, max_iter)
    lam_min = _power_iterate(A, lambda v: np.linalg.solve(A, v), rel_tol, max_iter)
    if lam_min <= 0:
        raise ValueError("matrix is not positive definite")
    return lam_max, lam_min


# --- constructors --------------------------------------------------------


def make_quadratic(A: np.ndarray, b: np.ndarray) -> ProblemSpec:
    """f(x) = 1/2 x'Ax - b'x for symmetric positive definite A."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if b.shape != (A.shape[0],):
        raise ValueError("b must have the same dimension as A")
    asym = np.max(np.abs(A - A.T)) if A.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(A))):
        raise ValueError(f"A is not symmetric (max asymmetry {asym:.3e})")
    A = 0.5 * (A + A.T)
    lam_max, lam_min = _power_extreme_eigs(A)
    x_star = np.linalg.solve(A, b)
    f_star = 0.5 * float(x_star @ (A @ x_star)) - float(b @ x_star)
    return ProblemSpec(
        dimension=A.shape[0],
        kind="quadratic",
        payload=QuadraticPayload(A=_freeze(A), b=_freeze(b)),
        L=lam_max,
        mu=lam_min,
        f_star=f_star,
        x_star=_freeze(x_star),
        label=f"quadratic-d{A.shape[0]}-{_short_hash(A, b)}",
    )


def make_least_squares(X: np.ndarray, y: np.ndarray) -> ProblemSpec:
    """f(x) = 1/(2n) ||Xx - y||^2 with full-column-rank X."""
    data = make_dataset(X, y)
    X, y, n = data.features, data.labels, data.n
    C = (X.T @ X) / n
    lam_max, lam_min = _power_extreme_eigs(C)
    x_star = np.linalg.solve(C, X.T @ y / n)
    f_star = 0.5 * float(np.sum((X @ x_star - y) ** 2)) / n
    return ProblemSpec(
        dimension=data.d,
        kind="least_squares",
        payload=LeastSquaresPayload(data=data),
        L=lam_max,
        mu=lam_min,
        f_star=f_star,
        x_star=_freeze(x_star),
        label=f"least_squares-n{n}-d{data.d}-{_short_hash(X, y)}",
    )


def _accelerated_descent(grad, x0: np.ndarray, L: float, mu: float, gtol: float, max_iter: int = 500000) -> np.ndarray:
    """Deterministic accelerated gradient descent to gradient norm <= gtol.

    Constant-momentum Nesterov scheme for strongly convex smooth objectives;
    plain gradient descent would need ~L/mu times more iterations at the
    conditioning we care about.
    """
    kappa = L / mu
    theta = (np.sqrt(kappa) - 1.0) / (np.sqrt(kappa) + 1.0)
    x = x0.copy()
    yv = x0.copy()
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= gtol:
            return x
        x_new = yv - grad(yv) / L
        yv = x_new + theta * (x_new - x)
        x = x_new
    raise RuntimeError(f"high-precision solve did not reach gradient norm {gtol:.1e}")


def make_logistic(data: Dataset, lam: float) -> ProblemSpec:
    """Regularized logistic regression over +/-1 labels.

    L is certified as lam_max(X'X)/(4n) + lam via power iteration; mu = lam.
    f_star is solved once to gradient norm <= 1e-10 and cached.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0 (strong convexity certificate requires it)")
    if data.label_kind != "binary":
        raise ValueError("logistic regression needs labels in {-1, +1}")
    X, n = data.features, data.n
    L = _power_lambda_max(X.T @ X) / (4.0 * n) + lam
    payload = LogisticPayload(data=data, lam=lam)
    spec = ProblemSpec(
        dimension=data.d,
        kind="logistic_l2",
        payload=payload,
        L=L,
        mu=lam,
        f_star=np.nan,
        x_star=None,
        label=f"logistic-n{n}-d{data.d}-{_short_hash(X, data.labels, np.array([lam]))}",
    )
    x_star = _accelerated_descent(lambda x: full_gradient(spec, x), np.zeros(data.d), L, lam, FSTAR_GRAD_TOL)
    return replace(spec, f_star=objective(spec, x_star), x_star=_freeze(x_star))


# --- evaluation ----------------------------------------------------------


def _check_point(p: ProblemSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dimension,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.dimension},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite entries")
    return x


def objective(p: ProblemSpec, x: np.ndarray) -> float:
    x = _check_point(p, x)
    pl = p.payload
    if p.kind == "quadratic":
        return 0.5 * float(x @ (pl.A @ x)) - float(pl.b @ x)
    if p.kind == "least_squares":
        r = pl.X @ x - pl.y
        return 0.5 * float(r @ r) / pl.X.shape[0]
    if p.kind == "logistic_l2":
        t = -pl.y * (pl.X @ x)
        return float(np.mean(_log1pexp(t))) + 0.5 * pl.lam * float(x @ x)
    raise ValueError(f"unknown problem kind {p.kind!r}")


def full_gradient(p: ProblemSpec, x: np.ndarray) -> np.ndarray:
    x = _check_point(p, x)
    pl = p.payload
    if p.kind == "quadratic":
        return pl.A @ x - pl.b
    if p.kind == "least_squares":
        return pl.X.T @ (pl.X @ x - pl.y) / pl.X.shape[0]
    if p.kind == "logistic_l2":
        s = _sigmoid(-pl.y * (pl.X @ x))
        return -(pl.X.T @ (pl.y * s)) / pl.X.shape[0] + pl.lam * x
    raise ValueError(f"unknown problem kind {p.kind!r}")


def _sample_gradient(p: ProblemSpec, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Mean loss gradient over the given sample indices plus the full regularizer."""
    pl = p.payload
    if p.kind == "least_squares":
        Xb = pl.X[idx]
        return Xb.T @ (Xb @ x - pl.y[idx]) / idx.size
    if p.kind == "logistic_l2":
        Xb, yb = pl.X[idx], pl.y[idx]
        s = _sigmoid(-yb * (Xb @ x))
        return -(Xb.T @ (yb * s)) / idx.size + pl.lam * x
    raise ValueError(f"problem kind {p.kind!r} has no per-sample losses")


# --- noise models ---------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """How stochastic gradients are produced, with a variance certificate.

    For additive Gaussian noise the certificate is exact: the perturbation
    has total variance sigma**2 split isotropically across coordinates.  For
    minibatch sampling the certificate is an empirically estimated upper
    bound (see estimate_sigma2).
    """

    kind: str
    sigma: float = 0.0
    batch_size: int = 0
    sigma2_certificate: Optional[float] = None

    @property
    def label(self) -> str:
        if self.kind == "additive_gaussian":
            return f"additive(sigma={self.sigma:g})"
        return f"minibatch(s={self.batch_size})"


def additive_noise(sigma: float) -> NoiseModel:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return NoiseModel(kind="additive_gaussian", sigma=float(sigma), sigma2_certificate=float(sigma) ** 2)


def minibatch_noise(batch_size: int) -> NoiseModel:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return NoiseModel(kind="minibatch", batch_size=int(batch_size))


def stochastic_gradient(p: ProblemSpec, nm: NoiseModel, x: np.ndarray, rng: Generator) -> np.ndarray:
    """One unbiased stochastic gradient draw at x."""
    if nm.kind == "additive_gaussian":
        g = full_gradient(p, x)
        if nm.sigma == 0.0:
            return g
        return g + rng.standard_normal(p.dimension) * (nm.sigma / np.sqrt(p.dimension))
    if nm.kind == "minibatch":
        data = p.dataset
        if data is None:
            raise ValueError(f"problem kind {p.kind!r} has no dataset to sample minibatches from")
        if nm.batch_size > data.n:
            raise ValueError(f"batch_size {nm.batch_size} exceeds dataset size {data.n}")
        idx = rng.choice(data.n, size=nm.batch_size, replace=False)
        return _sample_gradient(p, x, idx)
    raise ValueError(f"unknown noise kind {nm.kind!r}")


def estimate_sigma2(
    p: ProblemSpec,
    nm: NoiseModel,
    probe_points: list[np.ndarray],
    n_mc: int,
    rng: Generator,
) -> float:
    """Certified upper estimate of the gradient-noise variance.

    Returns the max over probe points of the Monte Carlo mean of
    ||gtilde - grad f||^2, inflated by (1 + 3/sqrt(n_mc)) so the result is a
    valid certificate up to sampling slack.
    """
    if n_mc < 100:
        raise ValueError("n_mc must be >= 100")
    if len(probe_points) < 1:
        raise ValueError("need at least one probe point")
    worst = 0.0
    for x in probe_points:
        x = _check_point(p, x)
        g = full_gradient(p, x)
        if nm.kind == "additive_gaussian":
            noise = rng.standard_normal((n_mc, p.dimension)) * (nm.sigma / np.sqrt(p.dimension))
            est = float(np.mean(np.sum(noise**2, axis=1)))
        else:
            acc = 0.0
            for _ in range(n_mc):
                r = stochastic_gradient(p, nm, x, rng) - g
                acc += float(r @ r)
            est = acc / n_mc
        worst = max(worst, est)
    return worst * (1.0 + 3.0 / np.sqrt(n_mc))


def certify_minibatch(
    p: ProblemSpec,
    nm: NoiseModel,
    probe_points: list[np.ndarray],
    n_mc: int,
    rng: Generator,
) -> NoiseModel:
    """Attach an estimated variance certificate to a minibatch noise model."""
    return replace(nm, sigma2_certificate=estimate_sigma2(p, nm, probe_points, n_mc, rng))
