"""Exact squared-exponential GP machinery shared by every aggregator.

Local experts are plain GPs trained on data partitions: this module holds
the kernel, the log-marginal likelihood and its analytic gradient,
shared-hyperparameter training across partitions, and posterior
prediction per expert. Everything downstream (PoE-family rules, NPAE,
the graphical-model aggregator) consumes the experts built here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ._linalg import chol_jitter
from .errors import DimensionError, FitError, NumericalError

LOG_2PI = math.log(2.0 * math.pi)

# Bounds (in log space) for the optimizer; wide enough to be inactive for
# any sane problem, tight enough to keep exp() finite.
_LOG_BOUNDS = (-15.0, 15.0)


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Shared kernel/noise parameters for all experts.

    ``lengthscale`` holds one entry per input dimension, or a single
    entry shared by every dimension (isotropic, the default). All values
    are strictly positive.
    """

    lengthscale: np.ndarray
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscale, dtype=float)).ravel()
        object.__setattr__(self, "lengthscale", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not (
            np.all(np.isfinite(ls))
            and np.all(ls > 0)
            and math.isfinite(self.signal_variance)
            and self.signal_variance > 0
            and math.isfinite(self.noise_variance)
            and self.noise_variance > 0
        ):
            raise ValueError("hyperparameters must be finite and strictly positive")

    def __eq__(self, other):
        if not isinstance(other, Hyperparameters):
            return NotImplemented
        return (
            np.array_equal(self.lengthscale, other.lengthscale)
            and self.signal_variance == other.signal_variance
            and self.noise_variance == other.noise_variance
        )

    def log_vector(self) -> np.ndarray:
        """Flat log-parameter vector: (log l_1..l_k, log sigma_f^2, log sigma^2)."""
        return np.concatenate(
            [np.log(self.lengthscale), [math.log(self.signal_variance), math.log(self.noise_variance)]]
        )

    @classmethod
    def from_log_vector(cls, v: np.ndarray) -> "Hyperparameters":
        v = np.asarray(v, dtype=float)
        return cls(np.exp(v[:-2]), math.exp(v[-2]), math.exp(v[-1]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "lengthscale": self.lengthscale.tolist(),
                "signal_variance": self.signal_variance,
                "noise_variance": self.noise_variance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Hyperparameters":
        obj = json.loads(text)
        return cls(np.asarray(obj["lengthscale"], dtype=float), obj["signal_variance"], obj["noise_variance"])


@dataclass(frozen=True)
class NormalizationState:
    """Per-column offsets and scales applied to a dataset."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs X (n x d) and targets y (n,), with no NaN/Inf entries."""

    X: np.ndarray
    y: np.ndarray
    normalization_state: NormalizationState | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DimensionError(f"X must be 2-D, got ndim={X.ndim}")
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise DimensionError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains NaN or Inf entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _check_lengthscale(hp: Hyperparameters, d: int) -> np.ndarray:
    ls = hp.lengthscale
    if ls.size not in (1, d):
        raise DimensionError(f"lengthscale has {ls.size} entries for {d}-dimensional inputs")
    return ls


def kernel_matrix(X: np.ndarray, X2: np.ndarray, hp: Hyperparameters) -> np.ndarray:
    """Squared-exponential kernel matrix.

    k(x, x') = sigma_f^2 * exp(-1/2 * sum_k (x_k - x'_k)^2 / l_k^2)
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X.shape[1] != X2.shape[1]:
        raise DimensionError(f"inputs have {X.shape[1]} and {X2.shape[1]} columns")
    ls = _check_lengthscale(hp, X.shape[1])
    sq = cdist(X / ls, X2 / ls, "sqeuclidean")
    return hp.signal_variance * np.exp(-0.5 * sq)


def kernel_eval(x: np.ndarray, x2: np.ndarray, hp: Hyperparameters) -> float:
    """Kernel value between two points; symmetric, in (0, sigma_f^2]."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.size != x2.size:
        raise DimensionError(f"points have dimensions {x.size} and {x2.size}")
    return float(kernel_matrix(x[None, :], x2[None, :], hp)[0, 0])


@dataclass(frozen=True, eq=False)
class TrainedExpert:
    """One partition plus its factorized covariance, ready for prediction.

    ``chol_C`` is the lower Cholesky factor of C = K + sigma^2 I (plus any
    jitter applied), and ``alpha`` solves C alpha = y.
    """

    data: Dataset
    hp: Hyperparameters
    chol_C: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0


def train_expert(data: Dataset, hp: Hyperparameters) -> TrainedExpert:
    """Factorize one partition's covariance for O(n^2) prediction."""
    K = kernel_matrix(data.X, data.X, hp)
    C = K + hp.noise_variance * np.eye(data.n)
    L, jitter = chol_jitter(C)
    alpha = cho_solve((L, True), data.y)
    return TrainedExpert(data=data, hp=hp, chol_C=L, alpha=alpha, jitter=jitter)


def _lml_from_factors(L: np.ndarray, alpha: np.ndarray, y: np.ndarray) -> float:
    n = y.size
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def log_marginal_likelihood(data: Dataset, hp: Hyperparameters) -> float:
    """Gaussian log-marginal likelihood of ``data`` under ``hp``.

    Computed via Cholesky of C = K + sigma^2 I; never inverts C
    explicitly. Equals -1/2 y' C^-1 y - 1/2 log|C| - n/2 log(2 pi).
    """
    expert = train_expert(data, hp)
    return _lml_from_factors(expert.chol_C, expert.alpha, data.y)


def _lml_and_grad(data: Dataset, hp: Hyperparameters) -> tuple[float, np.ndarray]:
    """Value and gradient of the lml over (log l_k.., log sigma_f^2, log sigma^2).

    Each component is 1/2 tr((alpha alpha' - C^-1) dC/dtheta_j).
    """
    X, y = data.X, data.y
    n = data.n
    K = kernel_matrix(X, X, hp)
    C = K + hp.noise_variance * np.eye(n)
    L, _ = chol_jitter(C)
    alpha = cho_solve((L, True), y)
    value = _lml_from_factors(L, alpha, y)

    Cinv = cho_solve((L, True), np.eye(n))
    A = np.outer(alpha, alpha) - Cinv
    k = hp.lengthscale.size
    grad = np.empty(k + 2)
    if k == 1:
        D = cdist(X, X, "sqeuclidean") / hp.lengthscale[0] ** 2
        grad[0] = 0.5 * np.sum(A * (K * D))
    else:
        for j in range(k):
            Dj = cdist(X[:, j : j + 1], X[:, j : j + 1], "sqeuclidean") / hp.lengthscale[j] ** 2
            grad[j] = 0.5 * np.sum(A * (K * Dj))
    grad[k] = 0.5 * np.sum(A * K)
    grad[k + 1] = 0.5 * hp.noise_variance * np.trace(A)
    return value, grad


def lml_gradient(data: Dataset, hp: Hyperparameters) -> np.ndarray:
    """Analytic lml gradient in log-parameter space."""
    return _lml_and_grad(data, hp)[1]


@dataclass(frozen=True)
class FitOptions:
    """Settings for shared-hyperparameter optimization.

    ``restarts`` counts total optimization runs: the first starts at the
    given init, the rest at seeded log-space perturbations of it.
    """

    restarts: int = 3
    max_iter: int = 200
    grad_tol: float = 1e-5
    seed: int = 0
    perturb_scale: float = 0.5
    ard: bool = False


def fit_shared_hyperparameters(
    partitions: Sequence[Dataset],
    init: Hyperparameters,
    opts: FitOptions | None = None,
) -> Hyperparameters:
    """Maximize the summed per-partition lml over one shared parameter set.

    All experts share a single theta; the objective is the factorized
    marginal likelihood sum_i log p(y_i | X_i, theta), optimized with
    L-BFGS-B in log-parameter space. The returned theta never scores
    worse than ``init``.
    """
    opts = opts or FitOptions()
    datasets = list(partitions)
    if not datasets or any(ds.n == 0 for ds in datasets):
        raise ValueError("need at least one non-empty partition")
    d = datasets[0].d
    if any(ds.d != d for ds in datasets):
        raise DimensionError("partitions disagree on input dimension")
    if opts.ard and init.lengthscale.size == 1:
        init = Hyperparameters(np.full(d, init.lengthscale[0]), init.signal_variance, init.noise_variance)
    _check_lengthscale(init, d)

    def objective(logv: np.ndarray) -> tuple[float, np.ndarray]:
        hp = Hyperparameters.from_log_vector(logv)
        total = 0.0
        grad = np.zeros(logv.size)
        for ds in datasets:  # fixed order keeps the reduction deterministic
            v, g = _lml_and_grad(ds, hp)
            total += v
            grad += g
        return -total, -grad

    x0 = init.log_vector()
    rng = np.random.default_rng(opts.seed)
    starts = [x0] + [
        x0 + opts.perturb_scale * rng.standard_normal(x0.size) for _ in range(opts.restarts - 1)
    ]
    bounds = [_LOG_BOUNDS] * x0.size

    candidates: list[tuple[float, np.ndarray]] = []
    failures: list[dict] = []
    try:
        f0, _ = objective(x0)
        candidates.append((f0, x0))
    except NumericalError as exc:
        failures.append({"start": x0.tolist(), "error": str(exc)})
    for start in starts:
        try:
            res = minimize(
                objective,
                np.clip(start, *_LOG_BOUNDS),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": opts.max_iter, "gtol": opts.grad_tol},
            )
        except (NumericalError, FloatingPointError) as exc:
            failures.append({"start": start.tolist(), "error": str(exc)})
            continue
        if math.isfinite(res.fun):
            candidates.append((float(res.fun), res.x))
        else:
            failures.append({"start": start.tolist(), "error": "non-finite objective"})
    if not candidates:
        raise FitError("all optimizer restarts failed", failures)
    best = min(candidates, key=lambda t: t[0])
    return Hyperparameters.from_log_vector(best[1])


def predict(
    expert: TrainedExpert,
    X_star: np.ndarray,
    hp: Hyperparameters | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of one expert at the test inputs.

    mean = k(X_i, x*)' C^-1 y_i; variance = k(x*,x*) + sigma^2 - k' C^-1 k,
    floored just below sigma^2 against roundoff. ``hp`` must match the
    parameters the expert was factorized with.
    """
    if hp is not None and hp != expert.hp:
        raise ValueError("hyperparameters differ from those used to factorize the expert")
    hp = expert.hp
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star[:, None]
    if X_star.shape[1] != expert.data.d:
        raise DimensionError(
            f"test inputs have {X_star.shape[1]} columns, expert was trained on {expert.data.d}"
        )
    k_star = kernel_matrix(expert.data.X, X_star, hp)
    means = k_star.T @ expert.alpha
    w = solve_triangular(expert.chol_C, k_star, lower=True)
    variances = hp.signal_variance + hp.noise_variance - np.sum(w * w, axis=0)
    floor = hp.noise_variance * (1.0 - 1e-10)
    return means, np.maximum(variances, floor)
