"""EM-fitted Gaussian graphical model over (latent target, expert means).

The target prediction and the M expert predictions at the test points
are modeled as one (M+1)-variate Gaussian whose sparse precision is
estimated by graphical lasso. Because the target column is unobserved,
its sample-covariance blocks are filled in by EM: the E-step replaces
the latent row/column of S with its conditional expectation under the
current precision, the M-step re-solves the penalized likelihood. The
final aggregated mean is the conditional-Gaussian map

    y_A(x*) = latent_mean + Sigma_{ y mu }' Sigma_{ mu mu }^-1 (mu(x*) - expert_means)

built from blocks of the converged covariance. Index 0 of every
(M+1)-sized structure is the latent target, throughout.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from ._linalg import chol_jitter
from .baselines import ExpertPredictions, gpoe
from .errors import DimensionError
from .glasso import PrecisionEstimate, glasso_solve

LATENT = 0

INIT_SCHEMES = ("mean_of_experts", "gpoe")


@dataclass(frozen=True)
class EmggmConfig:
    """Aggregation settings: penalty, iteration budget, and initialization.

    ``lam`` may be the string "auto", which resolves to
    0.5 * sqrt(log(M+1) / n_t) at aggregation time.

    ``penalize_latent`` keeps the sparsity penalty off the latent
    row/column by default: the latent target is there to absorb the
    experts' common covariance, and penalizing its edges makes the
    unidentified latent blocks bleed toward zero (one KKT shrink of
    size lambda per M-step) until the target decouples entirely. With
    the penalty restricted to expert-expert edges the objective is
    invariant to the latent scale, so the iteration stays anchored to
    the initialization.
    """

    lam: float | str = "auto"
    max_iters: int = 20
    conv_tol: float = 1e-4
    init_scheme: str = "mean_of_experts"
    glasso_tol: float = 1e-6
    glasso_max_iter: int = 500
    penalize_latent: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.conv_tol <= 0:
            raise ValueError("conv_tol must be positive")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init_scheme!r}; choose from {INIT_SCHEMES}")


@dataclass(eq=False)
class JointCovarianceModel:
    """EM workspace: sample covariance S of (latent, experts) plus the
    current precision/covariance estimates.

    Only the latent row/column of S changes across E-steps; the
    expert-expert block is fixed by the observed predictions. Column
    means removed during centering are kept for the final un-centering.
    """

    S: np.ndarray
    expert_means: np.ndarray
    latent_mean: float
    Omega: np.ndarray | None = None
    Sigma: np.ndarray | None = None
    iteration: int = 0


def resolve_lambda(lam: float | str, n_experts: int, n_test: int) -> float:
    if isinstance(lam, str):
        if lam != "auto":
            raise ValueError(f"lambda must be a number or 'auto', got {lam!r}")
        return 0.5 * math.sqrt(math.log(n_experts + 1) / n_test)
    value = float(lam)
    if value < 0:
        raise ValueError("lambda must be non-negative")
    return value


def init_latent(preds: ExpertPredictions, scheme: str = "mean_of_experts") -> np.ndarray:
    """Starting guess for the unobserved target at each test point."""
    if scheme == "mean_of_experts":
        return preds.means.mean(axis=1)
    if scheme == "gpoe":
        return gpoe(preds)[0]
    raise ValueError(f"unknown init scheme {scheme!r}; choose from {INIT_SCHEMES}")


def joint_sample_covariance(y0: np.ndarray, preds: ExpertPredictions) -> JointCovarianceModel:
    """Centered sample covariance of (y0, expert means) across test points.

    Each column is centered by its own mean over the n_t test points;
    S = Z'Z / n_t for the centered matrix Z.
    """
    y0 = np.asarray(y0, dtype=float).ravel()
    n_t, M = preds.means.shape
    if y0.size != n_t:
        raise DimensionError(f"latent init has {y0.size} entries for {n_t} test points")
    if n_t < 2:
        raise ValueError("need at least 2 test points to form a sample covariance")
    if n_t < M + 2:
        warnings.warn(
            f"only {n_t} test points for {M} experts: the sample covariance is "
            "rank-deficient and the solver will lean on jitter",
            RuntimeWarning,
        )
    Z = np.column_stack([y0, preds.means])
    col_means = Z.mean(axis=0)
    Zc = Z - col_means
    S = Zc.T @ Zc / n_t
    return JointCovarianceModel(
        S=S, expert_means=col_means[1:], latent_mean=float(col_means[LATENT])
    )


def e_step(model: JointCovarianceModel) -> JointCovarianceModel:
    """Replace the latent blocks of S with their conditional expectations.

    With A = Sigma_mm^-1 Sigma_my under the current estimate:
        S_my <- S_mm A
        S_yy <- Sigma_yy - Sigma_ym A + A' S_mm A
    The expert-expert block S_mm is left untouched.
    """
    if model.Sigma is None:
        raise ValueError("model has no covariance estimate yet; run an M-step first")
    Sigma_mm = model.Sigma[1:, 1:]
    Sigma_my = model.Sigma[1:, LATENT]
    Sigma_yy = model.Sigma[LATENT, LATENT]
    S_mm = model.S[1:, 1:]

    L, _ = chol_jitter(Sigma_mm)
    A = cho_solve((L, True), Sigma_my)
    S_my = S_mm @ A
    S_yy = Sigma_yy - Sigma_my @ A + A @ (S_mm @ A)

    model.S[LATENT, 1:] = S_my
    model.S[1:, LATENT] = S_my
    model.S[LATENT, LATENT] = S_yy
    return model


def m_step(
    model: JointCovarianceModel,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 500,
    penalize_latent: bool = False,
) -> PrecisionEstimate:
    """Refresh Omega/Sigma by solving the penalized likelihood on the
    current S, warm-starting from the previous precision.

    Unless ``penalize_latent`` is set, the penalty applies to the
    expert-expert off-diagonals only (see EmggmConfig)."""
    if model.Omega is not None:
        # near-singular S means huge precision entries; scale the solver's
        # absolute entry tolerance so sweeps stop at a sane relative accuracy
        tol = tol * max(1.0, float(np.max(np.abs(model.Omega))))
    if lam > 0 and not penalize_latent:
        p = model.S.shape[0]
        penalty = np.full((p, p), float(lam))
        penalty[LATENT, :] = 0.0
        penalty[:, LATENT] = 0.0
        lam_arg: float | np.ndarray = penalty
    else:
        lam_arg = lam
    est = glasso_solve(
        model.S, lam_arg, tol=tol, max_iter=max_iter, init=model.Omega, plateau_tol=1e-9
    )
    model.Omega = est.Omega
    model.Sigma = est.Sigma
    return est


def emggm_aggregate(
    preds: ExpertPredictions, cfg: EmggmConfig | None = None
) -> tuple[np.ndarray, dict]:
    """Aggregate expert means through the EM-fitted graphical model.

    Returns the per-test-point means and a JSON-serializable diagnostics
    dict: resolved lambda, per-iteration penalized objective before and
    after each M-step, precision change, and wall time. Iterations stop
    at ``max_iters`` or when the relative max-norm change of Omega drops
    below ``conv_tol``; if the loop exhausts its budget the last iterate
    is returned with ``converged`` set to False.
    """
    cfg = cfg or EmggmConfig()
    n_t, M = preds.means.shape
    y0 = init_latent(preds, cfg.init_scheme)
    model = joint_sample_covariance(y0, preds)
    lam = resolve_lambda(cfg.lam, M, n_t)

    m_step(model, lam, cfg.glasso_tol, cfg.glasso_max_iter, cfg.penalize_latent)
    iterations: list[dict] = []
    converged = False
    for t in range(1, cfg.max_iters + 1):
        tic = time.perf_counter()
        e_step(model)
        previous = model.Omega.copy()
        est = m_step(model, lam, cfg.glasso_tol, cfg.glasso_max_iter, cfg.penalize_latent)
        scale = max(float(np.max(np.abs(previous))), 1e-300)
        change = float(np.max(np.abs(model.Omega - previous))) / scale
        model.iteration = t
        iterations.append(
            {
                "iteration": t,
                "objective_start": est.objective_trace[0],
                "objective": est.objective_trace[-1],
                "omega_change": change,
                "wall_time_s": time.perf_counter() - tic,
            }
        )
        if change < cfg.conv_tol:
            converged = True
            break

    Sigma_mm = model.Sigma[1:, 1:]
    Sigma_my = model.Sigma[1:, LATENT]
    L, _ = chol_jitter(Sigma_mm)
    w = cho_solve((L, True), Sigma_my)
    means = model.latent_mean + (preds.means - model.expert_means) @ w

    diagnostics = {
        "lambda": lam,
        "converged": converged,
        "n_iterations": len(iterations),
        "iterations": iterations,
    }
    return means, diagnostics
