"""
Deterministic synthetic fields with known modes, spectra and object tracks.

Every generator is a direct evaluation of a closed-form expression at the
snapshot times, so the returned ground truth reproduces the data exactly. 2-D
fields live on ``x = linspace(-L, L, nx)``, ``y = linspace(-L, L, ny)`` and are
flattened row-major (``y`` is the slow index), matching the snapshot file
header's ``grid_ny, grid_nx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

from .dmd import SnapshotMatrix
from .errors import ParameterError

KINDS = ("four_mode_video", "moving_gaussians", "linear_system", "traveling_wave")

_RECORD = 128.0

# Per-kind defaults. Top-level keys (grid, n_time, dt) are split off into the
# spec's own fields; everything else lands in ``params``.
DEFAULTS = {
    "four_mode_video": dict(
        grid=(64, 64),
        n_time=256,
        dt=_RECORD / 256,
        extent=50.0,
        blob_std=6.0,
        wavenumber=0.2,
        # periods sit a factor sqrt(2) from the one-cycle thresholds of the
        # neighbouring levels, for records split with rho = 1
        period_slow=_RECORD / np.sqrt(2),
        period_fast=_RECORD / (2 * np.sqrt(2)),
        t_off=_RECORD / 2,
        t_on=3 * _RECORD / 4,
    ),
    "moving_gaussians": dict(
        grid=(64, 64),
        n_time=512,
        dt=0.5,
        extent=50.0,
        sigma=0.1,
        fast_center=(-18.0, 20.0),
        slow_center=(-20.0, -9.0),
        velocity=1 / 40,
        speed_ratio=10.0,
    ),
    "linear_system": dict(
        grid=50,
        n_time=40,
        dt=1.0,
        eigenvalues=(0.95 * np.exp(0.3j), 0.95 * np.exp(-0.3j), 0.9),
    ),
    "traveling_wave": dict(
        grid=200,
        n_time=100,
        dt=1.0,
        length=100.0,
        speed=0.5,
        width=5.0,
        x0=20.0,
    ),
}

_TOP_LEVEL = ("grid", "n_time", "dt")


@dataclass(frozen=True)
class ScenarioSpec:
    """
    Parameterised description of a synthetic field.

    ``grid`` is ``(nx, ny)`` for 2-D kinds or an int N for 1-D kinds. Use
    :meth:`default` to get a fully populated spec and override selectively.
    """

    kind: str
    grid: object
    n_time: int
    dt: float
    seed: int = 0
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        grid = self.grid
        if isinstance(grid, (list, tuple)):
            grid = tuple(int(g) for g in grid)
            if len(grid) != 2 or min(grid) < 1:
                raise ParameterError(f"grid must be (nx, ny) with both >= 1, got {self.grid}")
        else:
            grid = int(grid)
            if grid < 1:
                raise ParameterError(f"grid size must be >= 1, got {self.grid}")
        two_d = self.kind in ("four_mode_video", "moving_gaussians")
        if two_d != isinstance(grid, tuple):
            raise ParameterError(
                f"{self.kind} needs a {'2-D (nx, ny)' if two_d else '1-D integer'} grid, got {self.grid}"
            )
        if int(self.n_time) != self.n_time or self.n_time < 2:
            raise ParameterError(f"n_time must be an integer >= 2, got {self.n_time}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if int(self.seed) != self.seed:
            raise ParameterError(f"seed must be an integer, got {self.seed}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ParameterError(f"unknown parameter(s) for {self.kind}: {sorted(unknown)}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "n_time", int(self.n_time))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @classmethod
    def default(cls, kind: str, seed: int = 0, **overrides) -> "ScenarioSpec":
        if kind not in KINDS:
            raise ParameterError(f"unknown scenario kind {kind!r}; expected one of {KINDS}")
        merged = dict(DEFAULTS[kind])
        unknown = set(overrides) - set(merged)
        if unknown:
            raise ParameterError(f"unknown parameter(s) for {kind}: {sorted(unknown)}")
        merged.update(overrides)
        top = {k: merged.pop(k) for k in _TOP_LEVEL}
        return cls(kind=kind, seed=seed, params=merged, **top)

    def param(self, name):
        if name in self.params:
            return self.params[name]
        return DEFAULTS[self.kind][name]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_time)


@dataclass(frozen=True)
class GroundTruth:
    """
    Known decomposition of a generated field.

    ``modes`` holds unit-norm spatial fields as columns and ``time_series`` the
    matching coefficients per snapshot. For stationary-mode scenarios the data
    equal ``Re(modes @ time_series)``; for translating objects the modes are the
    t = 0 templates and ``tracks`` (object name to ``M x 2`` centres) carries
    the motion. ``eigenvalues`` is set for linear systems.
    """

    names: tuple
    modes: np.ndarray
    time_series: np.ndarray
    tracks: Mapping = field(default_factory=dict)
    eigenvalues: Optional[np.ndarray] = None
    grid: Optional[tuple] = None

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    def field(self) -> np.ndarray:
        """``Re(modes @ time_series)``; the data itself only for stationary modes."""
        return (self.modes @ self.time_series).real


def _require(cond, message):
    if not cond:
        raise ParameterError(message)


def _mesh(spec):
    nx, ny = spec.grid
    extent = float(spec.param("extent"))
    _require(extent > 0, f"extent must be positive, got {extent}")
    x = np.linspace(-extent, extent, nx)
    y = np.linspace(-extent, extent, ny)
    return np.meshgrid(x, y)


def _unit(v):
    v = np.asarray(v, dtype=np.complex128).ravel()
    return v / np.linalg.norm(v)


def gen_four_mode_video(spec: ScenarioSpec):
    """
    Four localised spatial modes with distinct temporal behaviour.

    Mode 1 is a stationary blob with constant amplitude. Modes 2 to 4 are
    wave packets (a Gaussian envelope times a carrier ``exp(i k x)``) whose
    phase rotates: mode 2 slowly over the whole record, mode 3 quickly until
    ``t_off``, mode 4 quickly from ``t_on`` on.
    """
    _require(spec.kind == "four_mode_video", f"expected a four_mode_video spec, got {spec.kind}")
    std = float(spec.param("blob_std"))
    kappa = float(spec.param("wavenumber"))
    t_slow = float(spec.param("period_slow"))
    t_fast = float(spec.param("period_fast"))
    t_off = float(spec.param("t_off"))
    t_on = float(spec.param("t_on"))
    _require(std > 0, "blob_std must be positive")
    _require(t_slow > 0 and t_fast > 0, "periods must be positive")
    _require(t_off <= t_on, "t_off must not come after t_on")

    xx, yy = _mesh(spec)
    c = 0.5 * float(spec.param("extent"))
    centers = [(-c, c), (c, c), (-c, -c), (c, -c)]
    modes = []
    for j, (x0, y0) in enumerate(centers):
        blob = np.exp(-((xx - x0) ** 2 + (yy - y0) ** 2) / (2 * std**2))
        if j:
            blob = blob * np.exp(1j * kappa * (xx - x0))
        modes.append(_unit(blob))
    modes = np.stack(modes, axis=1)

    t = spec.times
    series = np.stack(
        [
            np.ones_like(t, dtype=np.complex128),
            np.exp(2j * np.pi * t / t_slow),
            np.exp(2j * np.pi * t / t_fast) * (t < t_off),
            np.exp(2j * np.pi * t / t_fast) * (t >= t_on),
        ]
    )
    truth = GroundTruth(
        names=("background", "slow", "fast_off", "fast_on"),
        modes=modes,
        time_series=series,
        tracks={f"mode{j + 1}": np.tile(centers[j], (spec.n_time, 1)) for j in range(4)},
        grid=(spec.grid[1], spec.grid[0]),
    )
    return SnapshotMatrix(truth.field(), spec.dt, 0.0), truth


def gen_moving_gaussians(spec: ScenarioSpec):
    """
    Two Gaussians ``exp(-sigma |r - r0|^2)`` translating at different speeds.

    The fast object moves along +x at ``speed_ratio * velocity``, the slow one
    along +y at ``velocity``. The true modes are the objects at t = 0.
    """
    _require(spec.kind == "moving_gaussians", f"expected a moving_gaussians spec, got {spec.kind}")
    sigma = float(spec.param("sigma"))
    v = float(spec.param("velocity"))
    ratio = float(spec.param("speed_ratio"))
    _require(sigma > 0, "sigma must be positive")
    _require(np.isfinite(v) and np.isfinite(ratio), "velocity and speed_ratio must be finite")
    fx, fy = map(float, spec.param("fast_center"))
    sx, sy = map(float, spec.param("slow_center"))

    xx, yy = _mesh(spec)
    t = spec.times
    fast_track = np.column_stack([fx + ratio * v * t, np.full_like(t, fy)])
    slow_track = np.column_stack([np.full_like(t, sx), sy + v * t])

    def blob(x0, y0):
        return np.exp(-sigma * (xx - x0) ** 2 - sigma * (yy - y0) ** 2).ravel()

    data = np.stack([blob(*f) + blob(*s) for f, s in zip(fast_track, slow_track)], axis=1)
    templates = np.stack([blob(fx, fy), blob(sx, sy)], axis=1)
    norms = np.linalg.norm(templates, axis=0)
    truth = GroundTruth(
        names=("fast", "slow"),
        modes=(templates / norms).astype(np.complex128),
        time_series=np.outer(norms, np.ones(spec.n_time)).astype(np.complex128),
        tracks={"fast": fast_track, "slow": slow_track},
        grid=(spec.grid[1], spec.grid[0]),
    )
    return SnapshotMatrix(data, spec.dt, 0.0), truth


def _conjugate_closed(values, tol=1e-12):
    remaining = list(values)
    while remaining:
        lam = remaining.pop(0)
        if abs(lam.imag) <= tol * max(1.0, abs(lam)):
            continue
        partner = [i for i, mu in enumerate(remaining) if abs(mu - np.conj(lam)) <= tol * max(1.0, abs(lam))]
        if not partner:
            return False
        remaining.pop(partner[0])
    return True


def gen_linear_system(spec: ScenarioSpec):
    """
    Orbit ``x_{j+1} = A x_j`` of a real operator with a prescribed spectrum.

    ``A = Q B Q^T`` where B is block diagonal (a 2x2 rotation-scaling block per
    conjugate pair, a scalar per real eigenvalue) and Q has orthonormal columns
    drawn from the seeded generator, as is the block-coordinate start vector.
    The truth carries the eigenvalues in the order given and the corresponding
    unit eigenvectors of A.
    """
    _require(spec.kind == "linear_system", f"expected a linear_system spec, got {spec.kind}")
    values = np.atleast_1d(np.asarray(spec.param("eigenvalues"), dtype=np.complex128))
    n = spec.grid
    _require(values.ndim == 1 and values.size >= 1, "eigenvalues must be a non-empty sequence")
    _require(np.all(np.isfinite(values)), "eigenvalues must be finite")
    _require(values.size <= n, f"{values.size} eigenvalues do not fit a state of dimension {n}")
    _require(_conjugate_closed(values), "eigenvalues must be closed under complex conjugation")

    rng = np.random.default_rng(spec.seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, values.size)))
    start = rng.standard_normal(values.size)

    # blocks in the order eigenvalues appear, each conjugate pair once
    block = np.zeros((values.size, values.size))
    vecs = np.zeros((values.size, values.size), dtype=np.complex128)
    coords = np.zeros(values.size, dtype=np.complex128)
    used = np.zeros(values.size, dtype=bool)
    col = 0
    for i, lam in enumerate(values):
        if used[i]:
            continue
        used[i] = True
        if abs(lam.imag) <= 1e-12 * max(1.0, abs(lam)):
            block[col, col] = lam.real
            vecs[col, i] = 1.0
            coords[i] = start[col]
            col += 1
            continue
        j = next(
            k for k in range(i + 1, values.size)
            if not used[k] and abs(values[k] - np.conj(lam)) <= 1e-12 * max(1.0, abs(lam))
        )
        used[j] = True
        a, b = lam.real, lam.imag
        block[col : col + 2, col : col + 2] = [[a, -b], [b, a]]
        # [[a, -b], [b, a]] (1, -i) = (a + ib) (1, -i)
        vecs[col : col + 2, i] = np.array([1.0, -1.0j]) / np.sqrt(2)
        vecs[col : col + 2, j] = np.array([1.0, 1.0j]) / np.sqrt(2)
        alpha = (start[col] + 1j * start[col + 1]) / np.sqrt(2)
        coords[i], coords[j] = alpha, np.conj(alpha)
        col += 2

    data = np.empty((n, spec.n_time))
    state = start.copy()
    for k in range(spec.n_time):
        data[:, k] = q @ state
        state = block @ state

    exponents = np.arange(spec.n_time)
    truth = GroundTruth(
        names=tuple(f"lambda{i + 1}" for i in range(values.size)),
        modes=q @ vecs,
        time_series=coords[:, None] * values[:, None] ** exponents,
        eigenvalues=values.copy(),
    )
    return SnapshotMatrix(data, spec.dt, 0.0), truth


def gen_traveling_wave(spec: ScenarioSpec):
    """
    ``u(x, t) = exp(-(x - x0 - c t)^2 / w^2)`` on ``[0, length]`` without wrap-around.

    Returns the snapshots together with a truth holding the t = 0 profile and
    the crest position per snapshot.
    """
    _require(spec.kind == "traveling_wave", f"expected a traveling_wave spec, got {spec.kind}")
    length = float(spec.param("length"))
    c = float(spec.param("speed"))
    w = float(spec.param("width"))
    x0 = float(spec.param("x0"))
    _require(length > 0, "length must be positive")
    _require(w > 0, "width must be positive")
    _require(np.isfinite(c), "speed must be finite")

    x = np.linspace(0.0, length, spec.grid)
    crest = x0 + c * spec.times
    data = np.exp(-((x[:, None] - crest[None, :]) ** 2) / w**2)
    profile = data[:, 0]
    norm = np.linalg.norm(profile)
    truth = GroundTruth(
        names=("wave",),
        modes=(profile / norm)[:, None].astype(np.complex128) if norm > 0 else profile[:, None].astype(np.complex128),
        time_series=np.full((1, spec.n_time), norm, dtype=np.complex128),
        tracks={"wave": np.column_stack([crest, np.zeros_like(crest)])},
    )
    return SnapshotMatrix(data, spec.dt, 0.0), truth


_GENERATORS = {
    "four_mode_video": gen_four_mode_video,
    "moving_gaussians": gen_moving_gaussians,
    "linear_system": gen_linear_system,
    "traveling_wave": gen_traveling_wave,
}


def generate(spec: ScenarioSpec):
    """Dispatch on ``spec.kind``; returns ``(SnapshotMatrix, GroundTruth)``."""
    return _GENERATORS[spec.kind](spec)
