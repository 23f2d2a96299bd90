"""Closed-form bounds linking drafted tokens, acceptance entropy and KL.

All logs are base 2, so the Tunstall numerator reads as a codeword bit
length.  The greedy-rejection-coding upper bound carries an unspecified
O(1) constant; it is exposed as a knob (default 4, matching the Poisson
functional representation constant) and must be reported next to any
number derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dists import entropy_of_masses
from .errors import BadParamError, InvalidMError, ZeroEntropyError
from .treeopt import AcceptanceModel

DEFAULT_GRS_CONSTANT = 4.0
M_SCAN_CAP = 10 ** 6


def tunstall_bound(k: int, alphabet_size: int, h_r_bits: float) -> float:
    """(log2 |alphabet| + log2(k+1)) / H[R]: expected-tokens upper bound."""
    if k < 0 or alphabet_size < 2:
        raise BadParamError("need k >= 0 and alphabet_size >= 2")
    if h_r_bits <= 0.0:
        raise ZeroEntropyError("bound undefined at zero acceptance entropy")
    return (math.log2(alphabet_size) + math.log2(k + 1)) / h_r_bits


def tunstall_bound_tight(k: int, alphabet_size: int, h_r_bits: float) -> float:
    """Tighter intermediate form log2(k(|alphabet|-1) + |alphabet|) / H[R]."""
    if k < 0 or alphabet_size < 2:
        raise BadParamError("need k >= 0 and alphabet_size >= 2")
    if h_r_bits <= 0.0:
        raise ZeroEntropyError("bound undefined at zero acceptance entropy")
    return math.log2(k * (alphabet_size - 1) + alphabet_size) / h_r_bits


def tunstall_leaf_count(k: int, alphabet_size: int) -> int:
    """Leaves of a Tunstall tree after k expansions: |alphabet| + k(|alphabet|-1)."""
    if k < 0 or alphabet_size < 2:
        raise BadParamError("need k >= 0 and alphabet_size >= 2")
    return alphabet_size + k * (alphabet_size - 1)


def codeword_bits(k: int, alphabet_size: int) -> int:
    """ceil(log2(leaf count)): the fixed codeword length in bits."""
    return (tunstall_leaf_count(k, alphabet_size) - 1).bit_length()


def _residual_parts(r: AcceptanceModel, d: int | None) -> tuple[np.ndarray, float]:
    if d is None:
        d = len(r.a)
    if not 1 <= d <= len(r.a):
        raise BadParamError(f"d must lie in [1, {len(r.a)}]")
    head = np.asarray(r.a[:d], dtype=np.float64)
    if float(head.sum()) > 1.0 + 1e-9:
        raise BadParamError("model entries sum above 1; cap the model first")
    p_res = max(0.0, 1.0 - float(head.sum()))
    return head, p_res


def lemma_m_validity_threshold(r: AcceptanceModel, d: int | None = None) -> float:
    """Smallest real m allowed: p_res / min_{i<=d} a(i)."""
    head, p_res = _residual_parts(r, d)
    if p_res == 0.0:
        return 0.0
    smallest = float(head.min())
    if smallest <= 0.0:
        raise BadParamError("a(i) must be positive up to d for the residual bound")
    return p_res / smallest


def lemma_m_bound(r: AcceptanceModel, k: int, m: int, d: int | None = None) -> float:
    """Residual-spread bound (log2(d+m) + log2(k+1)) / (H[R_res] + p_res log2 m).

    R_res keeps a(1..d) and lumps the residual mass into one extra entry;
    spreading that mass over m equal indices adds p_res * log2(m) entropy.
    Valid for integer m at or above p_res / min_{i<=d} a(i).
    """
    if k < 0:
        raise BadParamError("k must be >= 0")
    if m < 1:
        raise InvalidMError("m must be a positive integer")
    head, p_res = _residual_parts(r, d)
    if m < lemma_m_validity_threshold(r, d):
        raise InvalidMError(
            f"m={m} below validity threshold {lemma_m_validity_threshold(r, d):.6g}"
        )
    h_res = entropy_of_masses(np.append(head, p_res))
    denom = h_res + p_res * math.log2(m)
    if denom <= 0.0:
        raise ZeroEntropyError("bound undefined at zero residual entropy")
    return (math.log2(len(head) + m) + math.log2(k + 1)) / denom


def min_lemma_m_bound(
    r: AcceptanceModel, k: int, d: int | None = None, m_cap: int = M_SCAN_CAP
) -> tuple[float, int]:
    """Exact scan of the residual bound over integer m up to ``m_cap``.

    The bound is unimodal in m in practice, but the scan does not assume
    it; past the cap the log(d+m) numerator growth dominates the
    p_res*log(m) denominator gain for fixed d.
    """
    head, p_res = _residual_parts(r, d)
    m_min = max(1, math.ceil(lemma_m_validity_threshold(r, d) - 1e-12))
    if m_min > m_cap:
        raise BadParamError(f"validity threshold {m_min} exceeds the scan cap {m_cap}")
    h_res = entropy_of_masses(np.append(head, p_res))
    if h_res == 0.0:
        # single unit atom: p_res = 0 and the denominator vanishes for every m
        raise ZeroEntropyError("bound undefined at zero residual entropy")
    ms = np.arange(m_min, m_cap + 1, dtype=np.float64)
    numer = np.log2(len(head) + ms) + math.log2(k + 1)
    denom = h_res + p_res * np.log2(ms)
    values = numer / denom
    best = int(np.argmin(values))
    return float(values[best]), int(ms[best])


def entropy_sandwich(
    kl_bits: float,
    epsilon: float = 0.1,
    grs_constant: float = DEFAULT_GRS_CONSTANT,
) -> tuple[float, float, float]:
    """(lower, grs_upper, pfr_upper) bracket for the acceptance entropy.

    lower = KL; pfr_upper = KL + log2(KL+1) + 4; grs_upper = KL +
    (1+epsilon) log2(KL+1) + C with C the configurable stand-in for the
    unspecified O(1) term.
    """
    if kl_bits < 0.0:
        raise BadParamError("kl must be >= 0")
    if epsilon <= 0.0:
        raise BadParamError("epsilon must be positive")
    log_term = math.log2(kl_bits + 1.0)
    pfr_upper = kl_bits + log_term + 4.0
    grs_upper = kl_bits + (1.0 + epsilon) * log_term + grs_constant
    return kl_bits, grs_upper, pfr_upper


@dataclass(frozen=True)
class BoundReport:
    """All closed-form quantities for one (model, k) pair."""

    k: int
    h_r_bits: float
    tunstall: float
    tunstall_tight: float
    lemma_m: float | None
    m_star: int | None
    d: int
    kl_lower: float | None
    grs_upper: float | None
    pfr_upper: float | None
    epsilon: float
    grs_constant: float


def bound_report(
    r: AcceptanceModel,
    k: int,
    alphabet_size: int,
    kl_bits: float | None = None,
    epsilon: float = 0.1,
    grs_constant: float = DEFAULT_GRS_CONSTANT,
    d: int | None = None,
) -> BoundReport:
    h_r = r.entropy_bits()
    lemma = m_star = None
    head, _ = _residual_parts(r, d)
    try:
        lemma, m_star = min_lemma_m_bound(r, k, d)
    except (BadParamError, ZeroEntropyError):
        pass
    kl_lower = grs_upper = pfr_upper = None
    if kl_bits is not None:
        kl_lower, grs_upper, pfr_upper = entropy_sandwich(kl_bits, epsilon, grs_constant)
    return BoundReport(
        k=k,
        h_r_bits=h_r,
        tunstall=tunstall_bound(k, alphabet_size, h_r),
        tunstall_tight=tunstall_bound_tight(k, alphabet_size, h_r),
        lemma_m=lemma,
        m_star=m_star,
        d=len(head),
        kl_lower=kl_lower,
        grs_upper=grs_upper,
        pfr_upper=pfr_upper,
        epsilon=epsilon,
        grs_constant=grs_constant,
    )
