"""Conditional-independence aggregation baselines: PoE, GPoE, BCM, RBCM, GRBCM.

All rules combine per-test-point expert means and variances through
weighted precision sums:

    precision = sum_i beta_i / var_i   [+ (1 - sum_i beta_i) / prior_var]
    mean      = (1 / precision) * sum_i beta_i * mean_i / var_i

The bracketed prior-correction term distinguishes the committee-machine
family (BCM, RBCM) from the plain products (PoE, GPoE). GRBCM replaces
the experts with base-augmented ones and the prior with the base expert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError
from .gp import Dataset, Hyperparameters, TrainedExpert, predict, train_expert
from .partition import Partitioning

WEIGHT_SCHEMES = ("uniform_one", "uniform_inv_M", "diff_entropy")


@dataclass(frozen=True, eq=False)
class ExpertPredictions:
    """Per-expert posterior means/variances plus the shared prior variance.

    ``means`` and ``variances`` are n_t x M (one column per expert);
    ``prior_variance`` is k(x*,x*) + sigma^2 per test point. Variances
    must be strictly positive; prior >= posterior is deliberately not
    required (it can fail under model mismatch).
    """

    means: np.ndarray
    variances: np.ndarray
    prior_variance: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        prior = np.asarray(self.prior_variance, dtype=float).ravel()
        if means.shape != variances.shape:
            raise DimensionError("means and variances must have identical shape")
        if prior.size != means.shape[0]:
            raise DimensionError("prior_variance length must equal the number of test points")
        if not (np.all(variances > 0) and np.all(prior > 0)):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "prior_variance", prior)

    @property
    def n_test(self) -> int:
        return self.means.shape[0]

    @property
    def n_experts(self) -> int:
        return self.means.shape[1]


def collect_predictions(
    experts: list[TrainedExpert], X_star: np.ndarray, hp: Hyperparameters | None = None
) -> ExpertPredictions:
    """Run every expert on the test inputs and stack the results."""
    if not experts:
        raise ValueError("need at least one expert")
    hp = hp or experts[0].hp
    cols = [predict(e, X_star, hp) for e in experts]
    means = np.column_stack([m for m, _ in cols])
    variances = np.column_stack([v for _, v in cols])
    prior = np.full(means.shape[0], hp.signal_variance + hp.noise_variance)
    return ExpertPredictions(means, variances, prior)


@dataclass(frozen=True, eq=False)
class Weights:
    """Per-test-point expert importances beta (n_t x M)."""

    beta: np.ndarray
    scheme: str


def compute_weights(preds: ExpertPredictions, scheme: str) -> Weights:
    """Expert importance weights.

    uniform_one: all ones; uniform_inv_M: all 1/M; diff_entropy: the
    differential-entropy gain 1/2 (log prior_var - log var_i) per point.
    """
    if scheme not in WEIGHT_SCHEMES:
        raise ValueError(f"unknown weight scheme {scheme!r}; choose from {WEIGHT_SCHEMES}")
    shape = preds.means.shape
    if scheme == "uniform_one":
        beta = np.ones(shape)
    elif scheme == "uniform_inv_M":
        beta = np.full(shape, 1.0 / preds.n_experts)
    else:
        beta = 0.5 * (np.log(preds.prior_variance)[:, None] - np.log(preds.variances))
    return Weights(beta=beta, scheme=scheme)


def poe_family_aggregate(
    preds: ExpertPredictions, weights: Weights, use_prior_correction: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted product of expert Gaussians, optionally prior-corrected.

    Without the correction this is PoE/GPoE; with it, BCM/RBCM. The
    combined precision must stay positive at every test point.
    """
    beta = weights.beta
    if beta.shape != preds.means.shape:
        raise DimensionError("weights shape does not match predictions")
    prec = beta / preds.variances
    agg_prec = prec.sum(axis=1)
    if use_prior_correction:
        agg_prec = agg_prec + (1.0 - beta.sum(axis=1)) / preds.prior_variance
    bad = np.where(agg_prec <= 0)[0]
    if bad.size:
        raise NumericalError(f"non-positive aggregated precision at test index {bad[0]}")
    variance = 1.0 / agg_prec
    mean = variance * np.sum(prec * preds.means, axis=1)
    return mean, variance


def poe(preds: ExpertPredictions) -> tuple[np.ndarray, np.ndarray]:
    """Product of experts: beta = 1, no prior correction."""
    return poe_family_aggregate(preds, compute_weights(preds, "uniform_one"), False)


def gpoe(preds: ExpertPredictions, scheme: str = "uniform_inv_M") -> tuple[np.ndarray, np.ndarray]:
    """Generalized product of experts; defaults to the uniform 1/M weights."""
    return poe_family_aggregate(preds, compute_weights(preds, scheme), False)


def bcm(preds: ExpertPredictions) -> tuple[np.ndarray, np.ndarray]:
    """Bayesian committee machine: beta = 1 with the prior correction."""
    return poe_family_aggregate(preds, compute_weights(preds, "uniform_one"), True)


def rbcm(preds: ExpertPredictions, scheme: str = "diff_entropy") -> tuple[np.ndarray, np.ndarray]:
    """Robust BCM: entropy-gain weights with the prior correction."""
    return poe_family_aggregate(preds, compute_weights(preds, scheme), True)


def grbcm_base_index(M: int, seed: int) -> int:
    """The seeded random draw selecting GRBCM's base partition."""
    return int(np.random.default_rng(seed).integers(M))


def grbcm_aggregate(
    partitioning: Partitioning,
    hp: Hyperparameters,
    X_star: np.ndarray,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized robust BCM over base-augmented experts.

    A base partition is drawn by ``seed``; every other partition i is
    merged with it and an expert trained on the union predicts with
    weight beta (first augmented expert: 1; the rest: entropy gain
    relative to the base expert). The base expert itself plays the role
    the prior plays in RBCM.
    """
    M = len(partitioning.subsets)
    if M < 2:
        raise ValueError("GRBCM needs at least 2 partitions")
    base_idx = grbcm_base_index(M, seed)
    base_data = partitioning.subsets[base_idx]
    base_expert = train_expert(base_data, hp)
    mu_b, var_b = predict(base_expert, X_star, hp)

    mu_cols, var_cols = [], []
    for i, subset in enumerate(partitioning.subsets):
        if i == base_idx:
            continue
        merged = Dataset(
            np.vstack([base_data.X, subset.X]),
            np.concatenate([base_data.y, subset.y]),
        )
        expert = train_expert(merged, hp)
        m, v = predict(expert, X_star, hp)
        mu_cols.append(m)
        var_cols.append(v)
    mu = np.column_stack(mu_cols)
    var = np.column_stack(var_cols)

    beta = 0.5 * (np.log(var_b)[:, None] - np.log(var))
    beta[:, 0] = 1.0
    prec = beta / var
    agg_prec = prec.sum(axis=1) + (1.0 - beta.sum(axis=1)) / var_b
    bad = np.where(agg_prec <= 0)[0]
    if bad.size:
        raise NumericalError(f"non-positive aggregated precision at test index {bad[0]}")
    variance = 1.0 / agg_prec
    mean = variance * (
        np.sum(prec * mu, axis=1) + (1.0 - beta.sum(axis=1)) / var_b * mu_b
    )
    return mean, variance
