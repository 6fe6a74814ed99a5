"""Shared test fixtures that are not part of the library."""
import numpy as np

from mrdmd import scenarios


def random_spectrum(rng, rank):
    """Conjugate-closed spectrum of `rank` values mixing decaying and oscillating terms."""
    n_pairs = int(rng.integers(0, rank // 2 + 1))
    values = []
    for _ in range(n_pairs):
        r = rng.uniform(0.85, 1.0)
        theta = rng.uniform(0.1, 2.5)
        values += [r * np.exp(1j * theta), r * np.exp(-1j * theta)]
    while len(values) < rank:
        values.append(complex(rng.choice([-1, 1]) * rng.uniform(0.8, 1.0)))
    return np.array(values)


def linear_oracle(seed, n=50, m=40, rank=None):
    rng = np.random.default_rng(1000 + seed)
    if rank is None:
        rank = int(rng.integers(2, 9))
    values = random_spectrum(rng, rank)
    spec = scenarios.ScenarioSpec.default("linear_system", seed=seed, grid=n, n_time=m, eigenvalues=tuple(values))
    return scenarios.generate(spec)


def match_spectra(fitted, true):
    """Max distance after pairing each true eigenvalue with its nearest unused fit."""
    fitted = list(fitted)
    worst = 0.0
    for lam in true:
        i = int(np.argmin([abs(mu - lam) for mu in fitted]))
        worst = max(worst, abs(fitted.pop(i) - lam))
    return worst


SST_GRID = (32, 64)
SST_QUADRANT = (slice(16, 32), slice(32, 64))


def sst_like_field(ta, tb, noise=0.01, seed=0, n_time=256):
    """
    Gridded temperature-like field (ny x nx = 32 x 64) with a warm transient.

    Base state cooling toward the poles, a seasonal cycle whose phase lags with
    longitude, and a Gaussian warm anomaly in the lower-right quadrant switched
    on over ``[ta, tb)`` with a sin^2 envelope. Returns ``(data, quadrant_mask)``.
    """
    ny, nx = SST_GRID
    lat = np.linspace(-1, 1, ny)[:, None]
    lon = np.linspace(0, 1, nx)[None, :]
    t = np.arange(n_time, dtype=float)
    base = (25 - 8 * lat**2) + 0 * lon
    season = 3 * lat * np.ones_like(lon)
    phase = 2 * np.pi * lon * np.ones_like(lat)
    bump = 2.5 * np.exp(-((lat - 0.5) ** 2) / 0.04 - (lon - 0.75) ** 2 / 0.01)
    env = np.where((t >= ta) & (t < tb), np.sin(np.pi * (t - ta) / (tb - ta)) ** 2, 0.0)
    data = np.stack(
        [(base + season * np.sin(2 * np.pi * tt / 52 - phase) + bump * e).ravel() for tt, e in zip(t, env)],
        axis=1,
    )
    data += noise * np.random.default_rng(seed).standard_normal(data.shape)
    mask = np.zeros(SST_GRID, dtype=bool)
    mask[SST_QUADRANT] = True
    return data, mask.ravel()


def quadrant_fraction(mode, mask):
    energy = np.abs(mode) ** 2
    return float(energy[mask].sum() / energy.sum())
