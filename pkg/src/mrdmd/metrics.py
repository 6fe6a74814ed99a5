"""Comparison of decompositions against ground truth."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .dmd import DmdResult
from .errors import ParameterError
from .multires import MrdmdTree
from .scenarios import GroundTruth


class AbsoluteErrorWarning(RuntimeWarning):
    """The reference has zero norm, so an absolute error was returned."""


def _unit_pair(true_mode, recovered):
    a = np.asarray(true_mode, dtype=np.complex128).ravel()
    c = np.asarray(recovered, dtype=np.complex128).ravel()
    if a.shape != c.shape:
        raise ParameterError(f"mode lengths differ: {a.size} vs {c.size}")
    na, nc = np.linalg.norm(a), np.linalg.norm(c)
    if na == 0 or nc == 0:
        raise ParameterError("modes must be non-zero")
    return a / na, c / nc


def optimal_phase(true_mode, recovered) -> float:
    """Angle theta minimising ``|| true - exp(i theta) recovered ||`` for unit-normalised inputs."""
    a, c = _unit_pair(true_mode, recovered)
    return float(np.angle(np.vdot(c, a)))


def mode_error(true_mode, recovered) -> float:
    """
    Phase-aligned distance between two unit-normalised fields.

    ``min_theta || a - exp(i theta) c || = sqrt(2 - 2 |<c, a>|)``, which is 0 for
    fields equal up to a complex factor and sqrt(2) for orthogonal ones.
    """
    a, c = _unit_pair(true_mode, recovered)
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * abs(np.vdot(c, a)))))


def reconstruction_error(truth, approx) -> float:
    """
    Relative Frobenius error ``||truth - approx|| / ||truth||``.

    A zero-norm truth yields the absolute error with an
    :class:`AbsoluteErrorWarning`.
    """
    truth = np.asarray(truth)
    approx = np.asarray(approx)
    if truth.shape != approx.shape:
        raise ParameterError(f"shape mismatch: {truth.shape} vs {approx.shape}")
    diff = float(np.linalg.norm(truth - approx))
    ref = float(np.linalg.norm(truth))
    if ref == 0:
        warnings.warn("truth has zero norm; returning absolute error", AbsoluteErrorWarning, stacklevel=2)
        return diff
    return diff / ref


@dataclass(frozen=True)
class ModeMatch:
    """
    One true mode and its assigned recovered mode.

    ``source`` is ``(level, bin, k)`` for tree modes (all 1-based) or ``(index,)``
    for a single DMD fit (0-based). ``phase`` is the rotation applied to the
    recovered mode before measuring ``error``.
    """

    true_index: int
    name: str
    source: tuple
    error: float
    phase: float
    omega: complex

    @property
    def level(self):
        return self.source[0] if len(self.source) == 3 else None


@dataclass(frozen=True)
class ModeMatchReport:
    matches: tuple
    unmatched: tuple = ()

    def __len__(self):
        return len(self.matches)

    def __iter__(self):
        return iter(self.matches)

    def by_name(self, name: str) -> ModeMatch:
        for m in self.matches:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def levels(self) -> tuple:
        return tuple(m.level for m in self.matches)


def candidates(recovered: Union[MrdmdTree, DmdResult]):
    """``(source, mode, omega)`` for every recovered mode in deterministic order."""
    if isinstance(recovered, DmdResult):
        return [((i,), recovered.modes[:, i], complex(recovered.omegas[i])) for i in range(recovered.rank)]
    out = []
    for node in recovered.nodes():
        slow = node.slow_modes
        for k in range(slow.rank):
            out.append(((node.level, node.bin, k + 1), slow.modes[:, k], complex(slow.omegas[k])))
    return out


def error_matrix(truth: GroundTruth, cands) -> np.ndarray:
    """``J x C`` matrix of mode errors between true modes and candidates."""
    if not cands:
        return np.zeros((truth.n_modes, 0))
    rec = np.stack([np.asarray(mode, dtype=np.complex128).ravel() for _, mode, _ in cands], axis=1)
    true = np.asarray(truth.modes, dtype=np.complex128)
    if rec.shape[0] != true.shape[0]:
        raise ParameterError(f"mode lengths differ: {true.shape[0]} vs {rec.shape[0]}")
    rec = rec / np.linalg.norm(rec, axis=0)
    true = true / np.linalg.norm(true, axis=0)
    overlap = np.abs(true.conj().T @ rec)
    return np.sqrt(np.maximum(0.0, 2.0 - 2.0 * overlap))


def match_modes(truth: GroundTruth, recovered: Union[MrdmdTree, DmdResult]) -> ModeMatchReport:
    """
    Greedy one-to-one assignment of recovered modes to true modes.

    All (true, candidate) pairs are visited by increasing error; ties go to the
    lower level, then lower bin, then lower k, then the lower true index. A
    pair is accepted when neither side is taken yet. Report entries follow the
    true-mode order; true modes left without a candidate are listed in
    ``unmatched``.
    """
    return match_candidates(truth, candidates(recovered))


def match_candidates(truth: GroundTruth, cands) -> ModeMatchReport:
    """:func:`match_modes` over an explicit ``(source, mode, omega)`` candidate list."""
    if not cands:
        return ModeMatchReport(matches=(), unmatched=tuple(range(truth.n_modes)))
    errs = error_matrix(truth, cands)
    pairs = sorted(
        (errs[j, c], cands[c][0], j, c) for j in range(truth.n_modes) for c in range(len(cands))
    )
    taken_true, taken_cand, chosen = set(), set(), {}
    for err, _, j, c in pairs:
        if j in taken_true or c in taken_cand:
            continue
        taken_true.add(j)
        taken_cand.add(c)
        chosen[j] = c
    matches = []
    for j in sorted(chosen):
        source, mode, omega = cands[chosen[j]]
        matches.append(
            ModeMatch(
                true_index=j,
                name=truth.names[j],
                source=source,
                error=float(errs[j, chosen[j]]),
                phase=optimal_phase(truth.modes[:, j], mode),
                omega=omega,
            )
        )
    unmatched = tuple(j for j in range(truth.n_modes) if j not in chosen)
    return ModeMatchReport(matches=tuple(matches), unmatched=unmatched)
