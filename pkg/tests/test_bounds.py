from __future__ import annotations

import math

import pytest

from specsim import (
    AcceptanceModel,
    bound_report,
    codeword_bits,
    entropy_sandwich,
    lemma_m_bound,
    min_lemma_m_bound,
    tunstall_bound,
    tunstall_bound_tight,
    tunstall_leaf_count,
)
from specsim.bounds import lemma_m_validity_threshold
from specsim.errors import BadParamError, InvalidMError, ZeroEntropyError


def test_tunstall_bound_examples():
    assert tunstall_bound(1, 2, 1.0) == pytest.approx(2.0)
    assert tunstall_bound_tight(1, 2, 1.0) == pytest.approx(math.log2(3))
    # doubling the entropy halves the bound
    assert tunstall_bound(5, 8, 2.0) == pytest.approx(tunstall_bound(5, 8, 1.0) / 2)
    with pytest.raises(ZeroEntropyError):
        tunstall_bound(1, 2, 0.0)


def test_tight_form_never_exceeds_loose():
    for k in range(0, 60):
        for v in (2, 3, 5, 16, 64):
            assert tunstall_bound_tight(k, v, 1.3) <= tunstall_bound(k, v, 1.3) + 1e-12


def test_leaf_count_and_codeword_bits_examples():
    assert tunstall_leaf_count(0, 4) == 4
    assert codeword_bits(0, 4) == 2
    assert tunstall_leaf_count(1, 2) == 3
    assert codeword_bits(1, 2) == 2
    # one expansion converts a leaf into |alphabet| children
    for v in (2, 5, 16):
        for k in range(0, 30):
            assert tunstall_leaf_count(k + 1, v) - tunstall_leaf_count(k, v) == v - 1


def test_lemma_m_bound_zero_residual():
    r = AcceptanceModel((0.5, 0.5))
    # p_res = 0: denominator is H = 1 bit regardless of m; m=1 minimizes
    for m in (1, 2, 10):
        assert lemma_m_bound(r, 3, m) == pytest.approx(
            (math.log2(2 + m) + 2.0) / 1.0
        )
    bound, m_star = min_lemma_m_bound(r, 3)
    assert m_star == 1
    assert bound == pytest.approx((math.log2(3) + 2.0))


def test_lemma_m_threshold_boundary():
    r = AcceptanceModel((0.5,))
    assert lemma_m_validity_threshold(r) == pytest.approx(1.0)
    lemma_m_bound(r, 2, 1)  # m = threshold exactly: valid
    with pytest.raises(InvalidMError):
        lemma_m_bound(AcceptanceModel((0.2,)), 2, 3)  # threshold 4
    with pytest.raises(InvalidMError):
        lemma_m_bound(r, 2, 0)


def test_min_lemma_m_never_above_sampled_valid_m():
    r = AcceptanceModel((0.45, 0.25, 0.1))
    k = 6
    best, m_star = min_lemma_m_bound(r, k)
    assert lemma_m_bound(r, k, m_star) == pytest.approx(best)
    thresh = math.ceil(lemma_m_validity_threshold(r))
    for m in (thresh, thresh + 1, thresh + 7, thresh + 100, 10_000):
        assert best <= lemma_m_bound(r, k, m) + 1e-12


def test_bound_grows_monotonically_past_large_m():
    # numerator growth dominates for fixed d once m is large
    r = AcceptanceModel((0.45, 0.25, 0.1))
    vals = [lemma_m_bound(r, 4, m) for m in (10**6, 2 * 10**6, 4 * 10**6)]
    assert vals[0] < vals[1] < vals[2]


def test_entropy_sandwich_examples():
    lower, grs, pfr = entropy_sandwich(0.0)
    assert (lower, pfr) == (0.0, 4.0)
    lower, grs, pfr = entropy_sandwich(3.0)
    assert pfr == pytest.approx(9.0)
    assert lower <= pfr
    # GRS constant is a visible knob
    _, grs_c5, _ = entropy_sandwich(3.0, epsilon=0.5, grs_constant=5.0)
    assert grs_c5 == pytest.approx(3.0 + 1.5 * 2.0 + 5.0)
    with pytest.raises(BadParamError):
        entropy_sandwich(-1.0)


def test_bound_report_fields():
    r = AcceptanceModel((0.6, 0.25, 0.1))
    rep = bound_report(r, 4, 8, kl_bits=1.5)
    assert rep.tunstall_tight <= rep.tunstall
    assert rep.lemma_m is not None and rep.m_star >= 1
    assert rep.kl_lower == 1.5
    assert rep.pfr_upper == pytest.approx(1.5 + math.log2(2.5) + 4.0)
    assert rep.h_r_bits > 0
    assert rep.tunstall >= 1.0 and rep.lemma_m >= 1.0
    rep_no_kl = bound_report(r, 4, 8)
    assert rep_no_kl.kl_lower is None
