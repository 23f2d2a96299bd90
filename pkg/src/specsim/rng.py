"""Seeded random number generation with a generator fixed in this repo.

Replayable experiments need bit-identical streams across platforms and
library versions, so nothing here delegates to a standard-library or numpy
default generator.  The core is SplitMix64: output i of a stream seeded
with s is mix64(s + i * GAMMA) (mod 2**64), which makes block generation a
pure vectorized function of a counter range.

Derived quantities are built only from that stream:

* uniforms   -- ((z >> 11) + 0.5) * 2**-53, strictly inside (0, 1)
* exponentials -- inverse CDF, -log(u)
* normals    -- Box-Muller
* gammas     -- Marsaglia-Tsang squeeze (alpha >= 1) with the usual
  boost for alpha < 1
"""

from __future__ import annotations

import hashlib

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_U64_GAMMA = np.uint64(_GAMMA)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53
_HALF_M53 = 2.0 ** -54


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def derive_seed(seed: int, *parts: object) -> int:
    """Stable 64-bit sub-seed for a labelled stream (cell, phase, run...)."""
    payload = repr((int(seed),) + tuple(parts)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


class Rng:
    """SplitMix64 stream with buffered scalar draws."""

    __slots__ = ("_state", "_buf", "_pos")

    _BLOCK = 4096

    def __init__(self, seed: int) -> None:
        self._state = int(seed) & _MASK
        self._buf = np.empty(0, dtype=np.float64)
        self._pos = 0

    def spawn(self, *parts: object) -> "Rng":
        """Independent stream labelled by ``parts``, derived from this seed."""
        return Rng(derive_seed(self._state, *parts))

    # -- raw stream ------------------------------------------------------

    def _raw(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            offsets = np.arange(1, n + 1, dtype=np.uint64) * _U64_GAMMA
            z = np.uint64(self._state) + offsets
            out = _mix(z)
        self._state = (self._state + n * _GAMMA) & _MASK
        return out

    # -- distributions ----------------------------------------------------

    def _fresh_uniforms(self, n: int) -> np.ndarray:
        bits = self._raw(n) >> _S11
        return bits.astype(np.float64) * _TWO_M53 + _HALF_M53

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles strictly inside (0, 1).

        Small requests are served from a block buffer (any buffered
        leftover at refill time is discarded, which is deterministic).
        """
        if n > 1024:
            return self._fresh_uniforms(n)
        if self._pos + n > self._buf.size:
            self._buf = self._fresh_uniforms(self._BLOCK)
            self._pos = 0
        out = self._buf[self._pos : self._pos + n].copy()
        self._pos += n
        return out

    def uniform(self) -> float:
        if self._pos >= self._buf.size:
            self._buf = self._fresh_uniforms(self._BLOCK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def exponentials(self, n: int) -> np.ndarray:
        """n strictly positive Exp(1) variates (inverse CDF)."""
        return -np.log(self.uniforms(n))

    def normals(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u1 = self.uniforms(m)
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def gamma(self, alpha: float) -> float:
        if alpha <= 0:
            raise ValueError(f"gamma shape must be positive, got {alpha}")
        if alpha < 1.0:
            # Boost: G(a) = G(a+1) * U^(1/a)
            return self.gamma(alpha + 1.0) * self.uniform() ** (1.0 / alpha)
        d = alpha - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        while True:
            x = float(self.normals(1)[0])
            v = (1.0 + c * x) ** 3
            if v <= 0.0:
                continue
            u = self.uniform()
            if u < 1.0 - 0.0331 * x ** 4:
                return d * v
            if np.log(u) < 0.5 * x * x + d * (1.0 - v + np.log(v)):
                return d * v

    def dirichlet(self, concentration: float, size: int) -> np.ndarray:
        g = np.array([self.gamma(concentration) for _ in range(size)])
        total = g.sum()
        if total <= 0.0:
            raise ValueError("dirichlet draw underflowed to zero mass")
        return g / total

    def index_from(self, masses: np.ndarray) -> int:
        """0-based index sampled proportionally to a nonnegative vector."""
        total = float(masses.sum())
        r = self.uniform() * total
        idx = int(np.searchsorted(np.cumsum(masses), r, side="right"))
        return min(idx, len(masses) - 1)
