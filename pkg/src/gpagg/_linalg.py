"""Cholesky factorization with the shared diagonal-jitter escalation policy.

On failure the diagonal is inflated by 1e-10 * mean(diag), escalating
tenfold up to 1e-4 * mean(diag); past that the factorization is declared
hopeless and a NumericalError carries the last jitter tried.
"""

import numpy as np

from .errors import NumericalError

JITTER_START = 1e-10
JITTER_MAX = 1e-4


def chol_jitter(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a symmetric matrix, jittering on failure.

    Returns ``(L, jitter)`` where ``L @ L.T == A + jitter * I`` and
    ``jitter`` is 0.0 when no inflation was needed.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix contains non-finite entries")
    scale = float(np.mean(np.diag(A)))
    if scale <= 0.0:
        scale = 1.0
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    rel = JITTER_START
    while rel <= JITTER_MAX:
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(A.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise NumericalError(
        f"Cholesky failed after escalating jitter to {JITTER_MAX * scale:.3e}",
        jitter=JITTER_MAX * scale,
    )


def spd_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc
    Linv = np.linalg.solve(L, np.eye(A.shape[0]))
    return Linv.T @ Linv
