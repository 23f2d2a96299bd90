from __future__ import annotations

import numpy as np
import pytest

from specsim import (
    Dist,
    Rng,
    entropy,
    hm_distance,
    kl_divergence,
    normalize,
    residual_dist,
    tv_distance,
    without_replacement_update,
)
from specsim.errors import (
    AllZeroError,
    DegenerateError,
    LengthMismatchError,
    NoResidualMassError,
    SupportViolationError,
)
from conftest import random_dist


def test_normalize_examples():
    assert normalize([2, 2]).mass.tolist() == [0.5, 0.5]
    assert normalize([1, 0, 0]).mass.tolist() == [1.0, 0.0, 0.0]
    assert normalize([0.3, 0, 0]).mass.tolist() == [1.0, 0.0, 0.0]


def test_normalize_all_zero():
    with pytest.raises(AllZeroError):
        normalize([0.0, 0.0])
    with pytest.raises(AllZeroError):
        normalize([1e-13, 0.0])


def test_dist_construction_rejects_far_from_normalized():
    with pytest.raises(ValueError):
        Dist([0.5, 0.4])
    # within tolerance: renormalized silently
    d = Dist([0.5, 0.5 + 1e-10])
    assert abs(d.mass.sum() - 1.0) < 1e-15


def test_tv_examples():
    assert tv_distance(Dist([0.5, 0.5]), Dist([0.5, 0.5])) == 0.0
    assert tv_distance(Dist([1, 0]), Dist([0, 1])) == 1.0
    assert tv_distance(Dist([0.5, 0.5]), Dist([0.25, 0.75])) == pytest.approx(0.25)


def test_tv_length_mismatch():
    with pytest.raises(LengthMismatchError):
        tv_distance(Dist([1, 0]), Dist([1, 0, 0]))


def test_hm_examples():
    d = Dist([0.5, 0.5])
    assert hm_distance(d, d) == pytest.approx(0.5)
    assert hm_distance(Dist([1, 0]), Dist([0, 1])) == 0.0
    # 0.5*0.25/0.75 + 0.5*0.75/1.25
    assert hm_distance(Dist([0.5, 0.5]), Dist([0.25, 0.75])) == pytest.approx(
        0.125 / 0.75 + 0.375 / 1.25
    )


def test_kl_examples():
    d = Dist([0.5, 0.5])
    assert kl_divergence(d, d) == 0.0
    assert kl_divergence(Dist([1, 0]), Dist([0.5, 0.5])) == pytest.approx(1.0)
    with pytest.raises(SupportViolationError):
        kl_divergence(Dist([0.5, 0.5]), Dist([1, 0]))


def test_entropy_examples():
    assert entropy(Dist([0.25] * 4)) == pytest.approx(2.0)
    assert entropy(Dist([1, 0, 0])) == 0.0
    assert entropy(Dist([0.5, 0.25, 0.25])) == pytest.approx(1.5)


def test_residual_examples():
    r = residual_dist(Dist([0.5, 0.3, 0.2]), Dist([0.2, 0.5, 0.3]))
    assert r.mass.tolist() == [1.0, 0.0, 0.0]
    assert residual_dist(Dist([1, 0]), Dist([0, 1])).mass.tolist() == [1.0, 0.0]
    with pytest.raises(NoResidualMassError):
        residual_dist(Dist([0.4, 0.6]), Dist([0.4, 0.6]))


def test_without_replacement_examples():
    assert without_replacement_update(Dist([0.5, 0.5]), 1).mass.tolist() == [0.0, 1.0]
    out = without_replacement_update(Dist([0.2, 0.5, 0.3]), 2)
    assert np.allclose(out.mass, [0.4, 0.0, 0.6])
    with pytest.raises(DegenerateError):
        without_replacement_update(Dist([1, 0]), 1)


def test_tv_hm_chain_on_many_random_pairs():
    # Appendix-style chain 1 - TV >= HM on 10^4 pairs, alphabets 2..32.
    rng = Rng(321)
    for trial in range(10_000):
        size = 2 + trial % 31
        p = random_dist(rng, size, sparse=trial % 3 == 0)
        q = random_dist(rng, size, sparse=trial % 5 == 0)
        tv = tv_distance(p, q)
        hm = hm_distance(p, q)
        assert 0.0 <= tv <= 1.0
        assert tv_distance(p, q) == tv_distance(q, p)
        assert 1.0 - tv >= hm - 1e-12
    assert tv_distance(p, p) == 0.0
    assert hm_distance(p, p) == pytest.approx(0.5)


def test_residual_mixture_reconstructs_target():
    rng = Rng(77)
    for trial in range(2000):
        size = 2 + trial % 15
        p = random_dist(rng, size)
        q = random_dist(rng, size)
        overlap = np.minimum(p.mass, q.mass)
        beta = float(overlap.sum())
        if beta > 1.0 - 1e-9:
            continue
        res = residual_dist(p, q)
        recon = overlap + (1.0 - beta) * res.mass
        assert np.allclose(recon, p.mass, atol=1e-9)


def test_kl_nonnegative_and_zero_iff_equal():
    rng = Rng(55)
    for trial in range(2000):
        size = 2 + trial % 10
        p = random_dist(rng, size)
        q = random_dist(rng, size)
        kl = kl_divergence(p, q)
        assert kl >= -1e-12
        if kl < 1e-12:
            assert np.allclose(p.mass, q.mass)
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)
