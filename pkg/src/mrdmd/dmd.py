"""
Exact dynamic mode decomposition of a single snapshot window.

The fit follows the standard four steps: thin SVD of the leading snapshots,
projection of the propagator onto the POD basis, eigendecomposition of the
projected operator, and lifting of its eigenvectors to exact DMD modes
``X2 V S^-1 W``. Amplitudes are the least-squares coefficients of the first
snapshot, and the continuous-time expansion is evaluated in window-local time.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import numerics
from .errors import (
    InvalidInputError,
    ParameterError,
    RankDeficiencyError,
    WindowTooSmallError,
)


@dataclass(frozen=True)
class SnapshotMatrix:
    """N x M real data matrix sampled at ``t0, t0 + dt, ..., t0 + (M-1) dt``."""

    data: np.ndarray
    dt: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise InvalidInputError(f"snapshot data must be 2-D, got shape {data.shape}")
        if np.iscomplexobj(data):
            raise InvalidInputError("snapshot data must be real-valued")
        data = np.ascontiguousarray(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("snapshot data contains NaN or Inf entries")
        if data.shape[1] < 2:
            raise WindowTooSmallError(
                f"need at least 2 snapshots, got {data.shape[1]}"
            )
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive and finite, got {self.dt}")
        if not np.isfinite(self.t0):
            raise ParameterError("t0 must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def n_space(self) -> int:
        return self.data.shape[0]

    @property
    def n_time(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_time)


@dataclass(frozen=True)
class DmdResult:
    """Modes, spectrum and amplitudes of one window, ordered by ascending ``|omega|``."""

    modes: np.ndarray
    lambdas: np.ndarray
    omegas: np.ndarray
    amplitudes: np.ndarray
    dt: float
    t0: float
    window_len: int
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_dropped: int = 0

    @property
    def rank(self) -> int:
        return len(self.lambdas)

    def subset(self, indices) -> "DmdResult":
        """A result restricted to the modes at `indices`, keeping their order."""
        idx = np.asarray(indices, dtype=int)
        return replace(
            self,
            modes=self.modes[:, idx],
            lambdas=self.lambdas[idx],
            omegas=self.omegas[idx],
            amplitudes=self.amplitudes[idx],
        )


def split_pairs(x: SnapshotMatrix):
    """Return ``(X1, X2)``: columns ``0..M-2`` and ``1..M-1`` of the data."""
    if x.n_time < 2:
        raise WindowTooSmallError(f"need at least 2 snapshots, got {x.n_time}")
    return x.data[:, :-1], x.data[:, 1:]


def amplitudes(modes, x1) -> np.ndarray:
    """Least-squares coefficients ``b = pinv(modes) @ x1``."""
    modes = numerics.as_matrix(modes, "modes")
    x1 = np.asarray(x1)
    if x1.ndim != 1 or x1.shape[0] != modes.shape[0]:
        raise ParameterError(
            f"x1 must be a vector of length {modes.shape[0]}, got shape {x1.shape}"
        )
    return numerics.pinv(modes) @ x1


def fit(x: SnapshotMatrix, rank_policy: numerics.RankPolicy = "hard_threshold") -> DmdResult:
    """Exact DMD of the window `x`."""
    x1, x2 = split_pairs(x)
    rank_policy = numerics.check_rank_policy(rank_policy, *x1.shape)
    svd = numerics.svd(x1, rank_policy)
    s = svd.singular_values
    if np.any(s <= 0):
        raise RankDeficiencyError(
            f"retained singular value is zero (rank {svd.rank}); use a smaller fixed rank"
        )

    # X2 V S^-1, shared by the projected operator and the exact modes
    lifted = (x2 @ svd.v) / s
    atilde = svd.u.conj().T @ lifted
    if np.isrealobj(x.data):
        atilde = atilde.real
    eigs = numerics.eig(atilde)
    lambdas = eigs.eigenvalues
    modes = lifted @ eigs.eigenvectors

    scale = max(1.0, float(np.max(np.abs(lambdas))))
    alive = np.abs(lambdas) > len(lambdas) * np.finfo(np.float64).eps * scale
    norms = np.linalg.norm(modes, axis=0)
    alive &= norms > 0
    n_dropped = int(np.count_nonzero(~alive))
    lambdas = lambdas[alive]
    modes = modes[:, alive] / norms[alive]

    omegas = np.log(lambdas) / x.dt
    order = np.lexsort((-omegas.imag, np.abs(omegas)))
    lambdas, omegas, modes = lambdas[order], omegas[order], modes[:, order]

    if len(lambdas):
        b = amplitudes(modes, x.data[:, 0])
    else:
        b = np.zeros(0, dtype=np.complex128)
    return DmdResult(
        modes=modes,
        lambdas=lambdas,
        omegas=omegas,
        amplitudes=b,
        dt=x.dt,
        t0=x.t0,
        window_len=x.n_time,
        singular_values=s,
        n_dropped=n_dropped,
    )


def _times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if t.ndim != 1 or not np.all(np.isfinite(t)):
        raise InvalidInputError("times must be a finite 1-D sequence")
    return t


def reconstruct(r: DmdResult, times, real: bool = False) -> np.ndarray:
    """
    Evaluate ``sum_k b_k psi_k exp(omega_k (t - t0))`` at each time.

    Returns an ``N x len(times)`` complex matrix, or its real part when `real`.
    Times outside the fitted window are forecasts.
    """
    t = _times(times)
    dynamics = np.exp(np.outer(r.omegas, t - r.t0)) * r.amplitudes[:, None]
    out = r.modes.astype(np.complex128, copy=False) @ dynamics
    return out.real if real else out


def background_foreground_split(r: DmdResult, x: SnapshotMatrix, rho: float):
    """
    Split `x` into a low-rank background and a sparse foreground.

    The background is the real reconstruction from modes with ``|omega| <= rho``
    (rho in units of 1/time); the foreground is the remainder, so the two sum
    to the data exactly.
    """
    if not rho >= 0:
        raise ParameterError(f"rho must be non-negative, got {rho}")
    keep = np.flatnonzero(np.abs(r.omegas) <= rho)
    background = reconstruct(r.subset(keep), x.times, real=True)
    foreground = x.data - background
    return background, foreground
