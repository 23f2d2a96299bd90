from __future__ import annotations

import numpy as np
import pytest

from specsim import (
    AcceptanceModel,
    AcceptanceTally,
    Dist,
    MarkovSource,
    Rng,
    estimate_acceptance,
    exact_acceptance_oracle,
    expected_accepted,
    hm_distance,
    optimal_tree,
    random_source,
    topology_batch,
    topology_sequence,
    topology_specinfer,
    tv_distance,
)
from specsim.errors import BadParamError, NoDataError, TooLargeError
from specsim.verify import StepResult

from conftest import enumerate_trees


def test_model_validation():
    AcceptanceModel((0.5, 0.3, 0.2))
    with pytest.raises(BadParamError):
        AcceptanceModel((0.3, 0.5))  # increasing
    with pytest.raises(BadParamError):
        AcceptanceModel((1.2,))
    with pytest.raises(BadParamError):
        AcceptanceModel((0.5,), order=1)  # reserved interface


def test_oversummed_model_must_be_capped_before_entropy():
    raw = AcceptanceModel((0.8, 0.4))  # pooled estimates can oversum
    assert not raw.is_distribution()
    with pytest.raises(BadParamError):
        raw.entropy_bits()
    capped = raw.capped()
    assert sum(capped.a) == pytest.approx(1.0)
    assert capped.a[0] / capped.a[1] == pytest.approx(2.0)
    capped.entropy_bits()


def test_model_node_prob_and_entropy():
    m = AcceptanceModel((0.6, 0.2, 0.1))
    assert m.node_prob((1,)) == pytest.approx(0.6)
    assert m.node_prob((1, 2)) == pytest.approx(0.12)
    assert m.node_prob((4,)) == 0.0  # beyond the vector
    assert m.residual == pytest.approx(0.1)
    expected_h = -sum(x * np.log2(x) for x in (0.6, 0.2, 0.1, 0.1))
    assert m.entropy_bits() == pytest.approx(expected_h)


def test_model_serialization_roundtrip():
    m = AcceptanceModel((0.55, 0.25, 0.05))
    assert AcceptanceModel.parse(m.serialize()) == m


def test_optimal_tree_chain_example():
    scored = optimal_tree(AcceptanceModel((0.9, 0.05)), 3)
    assert scored.tree.nodes == {(1,), (1, 1), (1, 1, 1)}
    assert scored.score == pytest.approx(0.9 + 0.81 + 0.729)


def test_optimal_tree_batch_example():
    scored = optimal_tree(AcceptanceModel((0.25, 0.25, 0.25, 0.25)), 4)
    assert scored.tree.nodes == {(1,), (2,), (3,), (4,)}
    assert scored.score == pytest.approx(1.0)


def test_optimal_tree_k1():
    scored = optimal_tree(AcceptanceModel((0.7, 0.1)), 1)
    assert scored.tree.nodes == {(1,)}
    assert scored.score == pytest.approx(0.7)


def test_optimal_tree_bad_params():
    with pytest.raises(BadParamError):
        optimal_tree(AcceptanceModel((0.5,)), 0)
    with pytest.raises(BadParamError):
        optimal_tree(AcceptanceModel((0.0,)), 1)


def test_optimal_tree_deterministic_under_ties():
    # equal probabilities everywhere: ties resolve to shorter, then lex order
    m = AcceptanceModel((0.25, 0.25))
    a = optimal_tree(m, 5).tree
    b = optimal_tree(m, 5).tree
    assert a == b
    # depth-1 nodes win their ties against depth-2 nodes of equal score
    assert (2,) in a.nodes


def test_pop_order_trace_is_non_increasing():
    rng = Rng(5)
    raw = np.sort(rng.uniforms(4))[::-1]
    m = AcceptanceModel(tuple(raw / (raw.sum() + 0.3)))
    scored = optimal_tree(m, 30)
    # per_node preserves insertion order, i.e. the actual pop trace
    pops = list(scored.per_node.values())
    assert scored.score == pytest.approx(sum(pops))
    assert all(pops[i] >= pops[i + 1] - 1e-12 for i in range(len(pops) - 1))


def test_score_monotone_with_diminishing_returns():
    m = AcceptanceModel((0.55, 0.2, 0.1, 0.05))
    scores = [optimal_tree(m, k).score for k in range(1, 20)]
    diffs = [b - a for a, b in zip(scores, scores[1:])]
    assert all(d >= -1e-12 for d in diffs)
    assert all(d1 >= d2 - 1e-12 for d1, d2 in zip(diffs, diffs[1:]))


def test_greedy_matches_bruteforce_small():
    rng = Rng(88)
    trees_by_k = {k: enumerate_trees(k, 3) for k in range(1, 6)}
    for _ in range(10):
        raw = np.sort(rng.uniforms(3))[::-1]
        model = AcceptanceModel(tuple(raw / (raw.sum() + rng.uniform())))
        for k, all_trees in trees_by_k.items():
            best = max(
                sum(model.node_prob(n) for n in tree) for tree in all_trees
            )
            assert optimal_tree(model, k).score == pytest.approx(best)


def test_expected_accepted_examples():
    m = AcceptanceModel((0.6, 0.2, 0.1))
    assert expected_accepted(topology_batch(3), m) == pytest.approx(0.9)
    assert expected_accepted(topology_sequence(3), m) == pytest.approx(
        0.6 + 0.36 + 0.216
    )
    assert expected_accepted(topology_specinfer(3, 2), m) == pytest.approx(1.284)


def test_estimate_acceptance_ratios():
    m = estimate_acceptance({1: (70, 100), 2: (20, 100)})
    assert m.a == (0.7, 0.2)


def test_estimate_acceptance_pav_example():
    m = estimate_acceptance({1: (50, 100), 2: (60, 100)})
    assert m.a == (0.55, 0.55)


def test_estimate_acceptance_truncates_underpowered():
    m = estimate_acceptance({1: (70, 100), 2: (5, 40), 3: (50, 100)})
    assert m.a == (0.7,)


def test_estimate_acceptance_no_data():
    with pytest.raises(NoDataError):
        estimate_acceptance({})
    with pytest.raises(NoDataError):
        estimate_acceptance({1: (2, 50)})


def test_estimate_acceptance_keeps_raw_rates():
    # the projection itself never rescales; downstream consumers cap
    m = estimate_acceptance({1: (80, 100), 2: (30, 100)})
    assert m.a == (0.8, 0.3)


def test_tally_counting_protocol():
    tree = topology_specinfer(2, 1)  # nodes (1), (1,1), (1,2)
    tally = AcceptanceTally()
    # step 1: (1) accepted, then (1,1) rejected, (1,2) accepted
    tally.record(tree, StepResult((5, 6, 7), ((1,), (1, 2)), 2))
    # step 2: root child rejected outright
    tally.record(tree, StepResult((3,), (), 0))
    counts = tally.counts()
    # index 1 trials: (1) in both steps + (1,1) in step 1
    assert counts[1] == (1, 3)
    # index 2 trials: (1,2) in step 1 only (parent accepted there)
    assert counts[2] == (1, 1)


def _order0_pair(p_mass, q_mass):
    v = len(p_mass)
    return (
        MarkovSource(0, v, {(): Dist(p_mass)}),
        MarkovSource(0, v, {(): Dist(q_mass)}),
    )


def test_oracle_identical_models_chain():
    p = random_source(3, 1, 4)
    for node in ((1,), (1, 1), (1, 1, 1)):
        assert exact_acceptance_oracle("gsd", p, p, (), node) == pytest.approx(1.0)


def test_oracle_gsd_simple_is_one_minus_tv():
    p, q = _order0_pair([0.5, 0.3, 0.15, 0.05], [0.2, 0.2, 0.25, 0.35])
    got = exact_acceptance_oracle("gsd", p, q, (), (1,))
    want = 1.0 - tv_distance(p.conditional(()), q.conditional(()))
    assert got == pytest.approx(want)


def test_oracle_gsd_index2_hand_formula():
    # independent derivation: P[reject 1st = a] = max(0, Q(a)-P(a)); residual
    # after the first rejection does not depend on a; accept min(ratio, 1).
    p, q = _order0_pair([0.5, 0.3, 0.15, 0.05], [0.2, 0.2, 0.25, 0.35])
    pm, qm = p.conditional(()).mass, q.conditional(()).mass
    res = np.maximum(pm - qm, 0.0)
    res = res / res.sum()
    want = 0.0
    for a in range(4):
        w = max(0.0, qm[a] - pm[a])
        if w == 0.0:
            continue
        want += w * sum(
            min(qm[b] / (1 - qm[a]), res[b]) for b in range(4) if b != a
        )
    got = exact_acceptance_oracle("gsd", p, q, (), (2,))
    assert got == pytest.approx(want, abs=1e-12)


def test_oracle_ersd_simple_within_bounds():
    p, q = _order0_pair([0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4])
    p_row, q_row = p.conditional(()), q.conditional(())
    got = exact_acceptance_oracle("ersd", p, q, (), (1,), Rng(7), 400_000)
    assert hm_distance(p_row, q_row) - 0.01 <= got
    assert got <= 1.0 - tv_distance(p_row, q_row) + 0.01


def test_oracle_gsd_depth2_matches_simulation(rng):
    from specsim import DraftTree, draft_gsd, verify_gsd

    p = random_source(19, 1, 3)
    q = random_source(23, 1, 3)
    node = (1, 2)
    want = exact_acceptance_oracle("gsd", p, q, (), node)
    tree = DraftTree([(1,), (1, 1), (1, 2)])
    n = 150_000
    hits = 0
    for _ in range(n):
        drafted = draft_gsd(q, (), tree, rng)
        if node in verify_gsd(p, q, (), drafted, tree, rng).accepted_nodes:
            hits += 1
    assert hits / n == pytest.approx(want, abs=0.01)


def test_oracle_ersd_depth2_matches_simulation(rng):
    from specsim import DraftTree, draft_ersd, verify_ersd

    p = random_source(29, 1, 3)
    q = random_source(31, 1, 3)
    node = (2, 1)
    want = exact_acceptance_oracle("ersd", p, q, (), node, Rng(11), 500_000)
    tree = DraftTree([(1,), (2,), (2, 1)])
    n = 150_000
    hits = 0
    for _ in range(n):
        drafted = draft_ersd(q, (), tree, rng)
        if node in verify_ersd(p, q, (), drafted, tree, rng).accepted_nodes:
            hits += 1
    assert hits / n == pytest.approx(want, abs=0.01)


def test_oracle_size_guards():
    big = random_source(1, 0, 8)
    with pytest.raises(TooLargeError):
        exact_acceptance_oracle("gsd", big, big, (), (1,))
    small = random_source(1, 0, 4)
    with pytest.raises(TooLargeError):
        exact_acceptance_oracle("gsd", small, small, (), (1, 1, 1, 1))
