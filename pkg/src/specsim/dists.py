"""Probability vectors over a token alphabet and the transforms on them.

Tokens are 1-based integers in [1, alphabet_size]; position i-1 of the
mass vector holds the probability of token i.  All entropies and
divergences are in bits.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AllZeroError,
    DegenerateError,
    LengthMismatchError,
    NoResidualMassError,
    SupportViolationError,
)

_SUM_TOL = 1e-9
_ZERO_TOL = 1e-12


class Dist:
    """Normalized probability vector. Construction renormalizes inputs to
    absorb floating-point drift; entries must be nonnegative and sum to 1
    within 1e-9 before renormalization."""

    __slots__ = ("mass", "_support")

    def __init__(self, raw) -> None:
        mass = np.asarray(raw, dtype=np.float64)
        if mass.ndim != 1:
            raise ValueError("distribution must be a 1-D vector")
        if np.any(mass < 0.0):
            raise ValueError("distribution entries must be nonnegative")
        total = float(mass.sum())
        if total < _ZERO_TOL:
            raise AllZeroError("no probability mass to normalize")
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(
                f"mass sums to {total!r}; use normalize() for unnormalized input"
            )
        mass = mass / total
        mass.setflags(write=False)
        self.mass = mass
        self._support = None

    @classmethod
    def _wrap(cls, mass: np.ndarray) -> "Dist":
        """Internal fast path for vectors already normalized."""
        d = object.__new__(cls)
        mass.setflags(write=False)
        d.mass = mass
        d._support = None
        return d

    def __len__(self) -> int:
        return self.mass.shape[0]

    def __repr__(self) -> str:
        return f"Dist({self.mass.tolist()!r})"

    def prob(self, token: int) -> float:
        return float(self.mass[token - 1])

    def support_indices(self) -> np.ndarray:
        """0-based indices of positive entries (cached; rows are immutable)."""
        if self._support is None:
            self._support = np.flatnonzero(self.mass > 0.0)
        return self._support

    def support(self) -> tuple[int, ...]:
        return tuple(int(i) + 1 for i in self.support_indices())

    def sample(self, rng) -> int:
        """One token drawn by inverse CDF (1-based)."""
        return rng.index_from(self.mass) + 1


def normalize(raw) -> Dist:
    """Dist proportional to a nonnegative vector.

    Raises AllZeroError when the input sums below 1e-12.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D vector")
    if np.any(arr < 0.0):
        raise ValueError("entries must be nonnegative")
    total = float(arr.sum())
    if total < _ZERO_TOL:
        raise AllZeroError("input sums to (nearly) zero")
    return Dist._wrap(arr / total)


def _paired(p: Dist, q: Dist) -> tuple[np.ndarray, np.ndarray]:
    if len(p) != len(q):
        raise LengthMismatchError(f"alphabet sizes differ: {len(p)} vs {len(q)}")
    return p.mass, q.mass


def tv_distance(p: Dist, q: Dist) -> float:
    """Total variation distance (1/2) * sum |p_i - q_i|, in [0, 1]."""
    pm, qm = _paired(p, q)
    return 0.5 * float(np.abs(pm - qm).sum())


def hm_distance(p: Dist, q: Dist) -> float:
    """Harmonic-mean sum: sum_i p_i q_i / (p_i + q_i), zero terms skipped."""
    pm, qm = _paired(p, q)
    denom = pm + qm
    mask = denom > 0.0
    return float((pm[mask] * qm[mask] / denom[mask]).sum())


def kl_divergence(p: Dist, q: Dist) -> float:
    """KL divergence in bits; requires support(p) within support(q)."""
    pm, qm = _paired(p, q)
    active = pm > 0.0
    if np.any(active & (qm <= 0.0)):
        raise SupportViolationError("p places mass where q has none")
    return float((pm[active] * np.log2(pm[active] / qm[active])).sum())


def entropy(p: Dist) -> float:
    """Shannon entropy in bits, with 0*log(0) = 0."""
    m = p.mass[p.mass > 0.0]
    return float(-(m * np.log2(m)).sum())


def entropy_of_masses(masses: np.ndarray) -> float:
    """Entropy in bits of a raw probability vector (tolerates zeros)."""
    m = np.asarray(masses, dtype=np.float64)
    m = m[m > 0.0]
    return float(-(m * np.log2(m)).sum())


def residual_dist(p_target: Dist, q_draft: Dist) -> Dist:
    """normalize(max(p - q, 0)): the post-rejection target distribution.

    Raises NoResidualMassError when p <= q entrywise (within 1e-12): in
    exact arithmetic that branch is unreachable, so hitting it means the
    rejection came from numerical drift and the caller should treat the
    pending token as accepted.
    """
    pm, qm = _paired(p_target, q_draft)
    res = np.maximum(pm - qm, 0.0)
    total = float(res.sum())
    if total < _ZERO_TOL:
        raise NoResidualMassError("p <= q entrywise; acceptance was certain")
    return Dist._wrap(res / total)


def without_replacement_update(q: Dist, rejected: int) -> Dist:
    """q with the rejected token zeroed and the rest renormalized."""
    qm = q.mass
    if not 1 <= rejected <= len(q):
        raise ValueError(f"token {rejected} outside alphabet of size {len(q)}")
    removed = float(qm[rejected - 1])
    if removed >= 1.0 - _ZERO_TOL:
        raise DegenerateError("rejected token held (almost) all the mass")
    out = qm.copy()
    out[rejected - 1] = 0.0
    return Dist._wrap(out / out.sum())
