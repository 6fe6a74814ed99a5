"""
Dense matrix primitives used by the DMD fit.

Thin wrappers around LAPACK (through numpy) that pin down the conventions the
rest of the package relies on: descending singular values, deterministic
eigenpair ordering, a scale-invariant pseudo-inverse cutoff, and optimal
hard-threshold rank selection for data with unknown noise level.

A rank policy is one of

* ``"full"``: keep every singular value,
* ``"hard_threshold"``: optimal hard threshold (see :func:`optimal_rank`),
* an ``int`` k: keep the leading k singular values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidInputError, NumericalError, ParameterError

RankPolicy = Union[str, int]

RANK_POLICIES = ("full", "hard_threshold")

# Singular values below this fraction of the largest are never kept by the
# hard-threshold policy. On noise-free data the median singular value is
# round-off, so the threshold alone would admit directions that carry no signal.
NUMERICAL_FLOOR = 1e-10


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.singular_values)


@dataclass(frozen=True)
class EigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return `a` as a 2-D float or complex array, rejecting empty or non-finite input."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must have at least one row and column")
    if not np.issubdtype(arr.dtype, np.complexfloating):
        arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return arr


def check_rank_policy(policy: RankPolicy, rows=None, cols=None) -> RankPolicy:
    if isinstance(policy, (bool, np.bool_)):
        raise ParameterError(f"invalid rank policy {policy!r}")
    if isinstance(policy, (int, np.integer)):
        k = int(policy)
        limit = min(rows, cols) if rows is not None and cols is not None else None
        if k < 1 or (limit is not None and k > limit):
            raise ParameterError(
                f"fixed rank must satisfy 1 <= k <= {limit if limit is not None else 'min(rows, cols)'}, got {k}"
            )
        return k
    if policy not in RANK_POLICIES:
        raise ParameterError(
            f"rank policy must be an integer or one of {RANK_POLICIES}, got {policy!r}"
        )
    return policy


def gavish_donoho_coefficient(beta: float) -> float:
    """Polynomial approximation of the optimal threshold coefficient for unknown noise."""
    return 0.56 * beta**3 - 0.95 * beta**2 + 1.82 * beta + 1.43


def optimal_rank(singular_values, rows: int, cols: int) -> int:
    """
    Number of singular values above the optimal hard threshold.

    The threshold is ``omega(beta) * median(sigma)`` with
    ``beta = min(rows, cols) / max(rows, cols)``. At least 1 is returned.
    """
    s = np.asarray(singular_values, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ParameterError("singular_values must be a non-empty 1-D sequence")
    if rows < 1 or cols < 1:
        raise ParameterError("rows and cols must be positive")
    beta = min(rows, cols) / max(rows, cols)
    tau = gavish_donoho_coefficient(beta) * np.median(s)
    return max(1, int(np.count_nonzero(s > tau)))


def svd(a, rank_policy: RankPolicy = "full") -> SvdResult:
    """Thin SVD truncated per `rank_policy`; ``v`` is returned un-conjugated (A = U S V*)."""
    a = as_matrix(a)
    rows, cols = a.shape
    rank_policy = check_rank_policy(rank_policy, rows, cols)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc

    if rank_policy == "full":
        k = len(s)
    elif rank_policy == "hard_threshold":
        k = optimal_rank(s, rows, cols)
        if s[0] > 0:
            k = min(k, max(1, int(np.count_nonzero(s > NUMERICAL_FLOOR * s[0]))))
    else:
        k = rank_policy
    return SvdResult(u=u[:, :k], singular_values=s[:k], v=vh[:k].conj().T)


def _ordering(values: np.ndarray) -> np.ndarray:
    # descending modulus, ties by descending imaginary part
    return np.lexsort((-values.imag, -np.abs(values)))


def eig(a) -> EigResult:
    """
    Eigendecomposition of a small square matrix.

    Pairs are ordered by descending ``|lambda|``, ties broken by descending
    imaginary part. Eigenvectors have unit 2-norm. Real input goes through the
    real LAPACK driver, so complex eigenvalues come out in exact conjugate pairs.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ParameterError(f"eig requires a square matrix, got shape {a.shape}")
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        # LAPACK geev does not report its iteration count; 30*n is its internal cap
        raise NumericalError(
            f"eigenvalue iteration did not converge: {exc}", iterations=30 * a.shape[0]
        ) from exc
    values = values.astype(np.complex128)
    vectors = vectors.astype(np.complex128)
    order = _ordering(values)
    return EigResult(eigenvalues=values[order], eigenvectors=vectors[:, order])


def pinv(a) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with cutoff ``max(rows, cols) * eps * sigma_1``."""
    a = as_matrix(a)
    rows, cols = a.shape
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    if s.size == 0 or s[0] == 0:
        return np.zeros((cols, rows), dtype=a.dtype)
    cutoff = max(rows, cols) * np.finfo(np.float64).eps * s[0]
    keep = s > cutoff
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * inv) @ u.conj().T
