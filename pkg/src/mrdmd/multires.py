"""
Multi-resolution DMD: recursive slow-mode extraction on a binary time tree.

Each node fits DMD to its bin, keeps the modes that complete at most ``rho``
cycles over the bin, subtracts their reconstruction at every original snapshot
time, and hands the residual to two children covering the halves of the bin.
The resulting tree evaluates as

    x(t) = sum over levels l, bins j, retained k of
           f_lj(t) * b_k * psi_k * exp(omega_k * (t - t_start_lj))

where ``f_lj`` is the indicator of bin (l, j).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from . import dmd, numerics
from .errors import NodeLookupError, NumericalError, ParameterError, WindowTooSmallError

SLOW_CRITERIA = ("abs", "imag")

# A bin whose residual norm is below this fraction of the full data norm is
# round-off left over from its ancestors and is not fitted.
RESIDUAL_FLOOR = 1e-12


class ForecastWarning(UserWarning):
    """Evaluation requested outside the decomposed time domain."""


@dataclass(frozen=True)
class MrdmdConfig:
    """
    Parameters of the recursive decomposition.

    rank_policy may be a single policy or a sequence with one entry per level
    (the last entry repeats for deeper levels). sampling is None to fit every
    snapshot of a bin, or an int M_bin >= 2 to fit at most M_bin evenly strided
    snapshots per bin. slow_criterion selects whether the cycles-per-bin test
    uses ``|omega|`` ("abs") or ``|imag(omega)|`` ("imag").
    """

    max_levels: int = 3
    rho: float = 1.0
    rank_policy: Union[numerics.RankPolicy, Sequence[numerics.RankPolicy]] = "hard_threshold"
    sampling: Optional[int] = None
    min_bin_snapshots: int = 2
    slow_criterion: str = "abs"

    def __post_init__(self):
        if isinstance(self.max_levels, bool) or int(self.max_levels) != self.max_levels or self.max_levels < 1:
            raise ParameterError(f"max_levels must be an integer >= 1, got {self.max_levels}")
        if not (isinstance(self.rho, (int, float)) and self.rho >= 0):
            raise ParameterError(f"rho must be non-negative, got {self.rho}")
        if self.sampling is not None and (int(self.sampling) != self.sampling or self.sampling < 2):
            raise ParameterError(f"fixed_per_bin sampling needs M_bin >= 2, got {self.sampling}")
        if int(self.min_bin_snapshots) != self.min_bin_snapshots or self.min_bin_snapshots < 2:
            raise ParameterError(
                f"min_bin_snapshots must be an integer >= 2, got {self.min_bin_snapshots}"
            )
        if self.slow_criterion not in SLOW_CRITERIA:
            raise ParameterError(
                f"slow_criterion must be one of {SLOW_CRITERIA}, got {self.slow_criterion!r}"
            )
        policies = self.rank_policy
        if isinstance(policies, (list, tuple)):
            if not policies:
                raise ParameterError("rank_policy sequence must not be empty")
            object.__setattr__(self, "rank_policy", tuple(policies))
            for p in self.rank_policy:
                numerics.check_rank_policy(p)
        else:
            numerics.check_rank_policy(policies)

    def rank_policy_at(self, level: int) -> numerics.RankPolicy:
        if isinstance(self.rank_policy, tuple):
            return self.rank_policy[min(level, len(self.rank_policy)) - 1]
        return self.rank_policy


@dataclass(frozen=True, eq=False)
class MrdmdNode:
    """One (level, bin) cell of the tree. Levels and bins are 1-based."""

    level: int
    bin: int
    start: int
    stop: int
    t_start: float
    t_end: float
    fit: Optional[dmd.DmdResult]
    retained: tuple
    slow_modes: dmd.DmdResult
    children: tuple = ()
    truncated: bool = False
    diagnostics: tuple = ()
    data: Optional[np.ndarray] = field(default=None, repr=False)
    residual: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def retained_count(self) -> int:
        return self.slow_modes.rank

    @property
    def n_snapshots(self) -> int:
        return self.stop - self.start

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class MrdmdTree:
    root: MrdmdNode
    config: MrdmdConfig
    n_space: int
    n_time: int
    global_t0: float
    global_t1: float
    dt_original: float

    def nodes(self) -> Iterator[MrdmdNode]:
        """All nodes, level-major then bin-minor."""
        layer = [self.root]
        while layer:
            yield from layer
            layer = [c for node in layer for c in node.children]

    def level_nodes(self, level: int) -> list:
        return [n for n in self.nodes() if n.level == level]

    @property
    def depth(self) -> int:
        return max(n.level for n in self.nodes())

    def node(self, level: int, bin: int) -> MrdmdNode:
        if level < 1 or bin < 1 or bin > 2 ** (level - 1):
            raise NodeLookupError(f"no bin {bin} at level {level} (J = 2^(level-1))")
        node = self.root
        # walk the binary expansion of the zero-based bin index, most significant first
        for depth in range(level - 2, -1, -1):
            if not node.children:
                raise NodeLookupError(f"node ({level}, {bin}) was not reached by the recursion")
            node = node.children[((bin - 1) >> depth) & 1]
        return node


@dataclass(frozen=True)
class SpectrumRecord:
    level: int
    bin: int
    t_start: float
    t_end: float
    omegas: np.ndarray
    retained: np.ndarray


def slow_mode_filter(r: dmd.DmdResult, bin_duration: float, rho: float, criterion: str = "abs") -> np.ndarray:
    """Indices of modes completing at most `rho` cycles over `bin_duration`."""
    if not bin_duration > 0:
        raise ParameterError(f"bin_duration must be positive, got {bin_duration}")
    if criterion not in SLOW_CRITERIA:
        raise ParameterError(f"unknown slow criterion {criterion!r}")
    rate = np.abs(r.omegas) if criterion == "abs" else np.abs(r.omegas.imag)
    cycles = rate * bin_duration / (2 * np.pi)
    return np.flatnonzero(cycles <= rho)


def _empty_result(n_space: int, dt: float, t0: float, window_len: int) -> dmd.DmdResult:
    return dmd.DmdResult(
        modes=np.zeros((n_space, 0), dtype=np.complex128),
        lambdas=np.zeros(0, dtype=np.complex128),
        omegas=np.zeros(0, dtype=np.complex128),
        amplitudes=np.zeros(0, dtype=np.complex128),
        dt=dt,
        t0=t0,
        window_len=window_len,
    )


def _subsample(n: int, m_bin: Optional[int]) -> int:
    """Stride giving at most m_bin evenly spaced snapshots out of n."""
    if m_bin is None or n <= m_bin:
        return 1
    return max(1, (n - 1) // (m_bin - 1))


def _build(block, level, bin, start, x, config, keep_data, floor):
    n = block.shape[1]
    dt = x.dt
    t_start = x.t0 + start * dt
    t_end = x.t0 + (start + n) * dt
    diagnostics = []
    fit = None
    retained = np.zeros(0, dtype=int)

    if np.linalg.norm(block) <= floor:
        diagnostics.append("negligible residual; nothing to fit")
    else:
        stride = _subsample(n, config.sampling)
        window = dmd.SnapshotMatrix(block[:, ::stride][:, : (config.sampling or n)], dt * stride, t_start)
        policy = config.rank_policy_at(level)
        if not isinstance(policy, str):
            # deep bins may hold fewer snapshot pairs than a fixed rank asks for
            policy = min(int(policy), window.n_space, window.n_time - 1)
        try:
            fit = dmd.fit(window, policy)
        except NumericalError as exc:
            diagnostics.append(f"fit failed: {exc}")
        else:
            if fit.n_dropped:
                diagnostics.append(f"dropped {fit.n_dropped} zero-eigenvalue mode(s)")
            retained = slow_mode_filter(fit, t_end - t_start, config.rho, config.slow_criterion)

    if fit is not None:
        slow = fit.subset(retained)
    else:
        slow = _empty_result(block.shape[0], dt, t_start, n)

    if slow.rank:
        residual = block - dmd.reconstruct(slow, t_start + dt * np.arange(n), real=True)
    else:
        residual = block

    children = ()
    truncated = False
    if level < config.max_levels:
        left = (n + 1) // 2
        right = n - left
        if right < config.min_bin_snapshots:
            truncated = True
            diagnostics.append(
                f"bin of {n} snapshots not split: halves would hold fewer than "
                f"{config.min_bin_snapshots}"
            )
        else:
            children = (
                _build(residual[:, :left], level + 1, 2 * bin - 1, start, x, config, keep_data, floor),
                _build(residual[:, left:], level + 1, 2 * bin, start + left, x, config, keep_data, floor),
            )

    return MrdmdNode(
        level=level,
        bin=bin,
        start=start,
        stop=start + n,
        t_start=t_start,
        t_end=t_end,
        fit=fit,
        retained=tuple(int(i) for i in retained),
        slow_modes=slow,
        children=children,
        truncated=truncated,
        diagnostics=tuple(diagnostics),
        data=block if keep_data else None,
        residual=residual if keep_data else None,
    )


def decompose(x: dmd.SnapshotMatrix, config: MrdmdConfig = MrdmdConfig(), keep_data: bool = False) -> MrdmdTree:
    """
    Build the mrDMD tree of `x`.

    With `keep_data`, every node also stores its input block and the residual it
    passed on, which makes the telescoping identity checkable.
    """
    if x.n_time < config.min_bin_snapshots:
        raise WindowTooSmallError(
            f"root window has {x.n_time} snapshots, fewer than min_bin_snapshots={config.min_bin_snapshots}"
        )
    root = _build(x.data, 1, 1, 0, x, config, keep_data, RESIDUAL_FLOOR * np.linalg.norm(x.data))
    return MrdmdTree(
        root=root,
        config=config,
        n_space=x.n_space,
        n_time=x.n_time,
        global_t0=x.t0,
        global_t1=x.t0 + x.n_time * x.dt,
        dt_original=x.dt,
    )


def _route(node, t, idx, out, max_level):
    if node.slow_modes.rank and idx.size:
        out[:, idx] += dmd.reconstruct(node.slow_modes, t[idx], real=True)
    if not node.children or node.level >= max_level:
        return
    left, right = node.children
    goes_left = t[idx] < left.t_end
    _route(left, t, idx[goes_left], out, max_level)
    _route(right, t, idx[~goes_left], out, max_level)


def evaluate(tree: MrdmdTree, times, max_level: Optional[int] = None) -> np.ndarray:
    """
    Real ``N x len(times)`` reconstruction from every retained mode.

    Exactly one bin per level contributes at each time; the global right
    endpoint belongs to the last bin. Times outside the domain use the first or
    last bin of each level and raise a :class:`ForecastWarning`. `max_level`
    truncates the sum to the coarsest levels.
    """
    t = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if t.ndim != 1 or not np.all(np.isfinite(t)):
        raise ParameterError("times must be a finite 1-D sequence")
    if np.any((t < tree.global_t0) | (t > tree.global_t1)):
        warnings.warn(
            f"evaluating outside [{tree.global_t0}, {tree.global_t1}] is a forecast",
            ForecastWarning,
            stacklevel=2,
        )
    out = np.zeros((tree.n_space, t.size))
    _route(tree.root, t, np.arange(t.size), out, max_level or math.inf)
    return out


def indicator(tree: MrdmdTree, level: int, bin: int, times) -> np.ndarray:
    """The sifting function of bin (level, bin): 1 inside the bin, else 0."""
    node = tree.node(level, bin)
    t = np.atleast_1d(np.asarray(times, dtype=np.float64))
    inside = (t >= node.t_start) & (t < node.t_end)
    if node.t_end == tree.global_t1:
        inside |= t == tree.global_t1
    return inside.astype(np.float64)


def spectrum_map(tree: MrdmdTree) -> list:
    """Per-node full spectrum and retained flags, level-major then bin-minor."""
    records = []
    for node in tree.nodes():
        if node.fit is not None:
            omegas = node.fit.omegas.copy()
            flags = np.zeros(omegas.size, dtype=bool)
            flags[list(node.retained)] = True
        else:
            omegas = np.zeros(0, dtype=np.complex128)
            flags = np.zeros(0, dtype=bool)
        records.append(SpectrumRecord(node.level, node.bin, node.t_start, node.t_end, omegas, flags))
    return records


def mode_at(tree: MrdmdTree, level: int, bin: int, k: int):
    """Retained mode k (1-based) of bin (level, bin) as ``(psi, omega, b)``."""
    node = tree.node(level, bin)
    if k < 1 or k > node.retained_count:
        raise NodeLookupError(
            f"node ({level}, {bin}) retains {node.retained_count} mode(s); k={k} is out of range"
        )
    slow = node.slow_modes
    return slow.modes[:, k - 1].copy(), complex(slow.omegas[k - 1]), complex(slow.amplitudes[k - 1])
