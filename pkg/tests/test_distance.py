import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fixture_models
from ergotest.distance import (batch_empirical_distance, distance_to_family, empirical_distance,
                               exact_distance, family_statistics, project_hmm, project_markov)
from ergotest.errors import AlphabetError
from ergotest.hypotheses import (EMConfig, FiniteSet, HMMOrder, MarkovOrder, MemberDesign,
                                 RefineConfig, Singleton, member_design)
from ergotest.processes import HMMModel, IIDModel, MarkovModel
from ergotest.symbolics import tail_weight, word_to_index
from ergotest.stats import frequency

ZERO, ONE = MarkovModel.constant(0), MarkovModel.constant(1)
binary = st.lists(st.integers(0, 1), min_size=1, max_size=40)
probs = st.floats(0.05, 0.95)


def direct_distance(x, model, depth):
    """Word-by-word sum with the global index weights."""
    import itertools

    total = 0.0
    for ell in range(1, depth + 1):
        for w in itertools.product(range(2), repeat=ell):
            total += 2.0 ** -word_to_index(w, 2) * abs(float(frequency(x, w)) - model.marginal(w))
    return total


def random_model(draw_p):
    kind, p = draw_p
    if kind == 0:
        return IIDModel.bernoulli(p[0])
    if kind == 1:
        return MarkovModel.binary(p[0], p[1])
    return HMMModel([[p[0], 1 - p[0]], [p[1], 1 - p[1]]], [[p[2], 1 - p[2]], [p[3], 1 - p[3]]])


models = st.tuples(st.integers(0, 2), st.lists(probs, min_size=4, max_size=4)).map(random_model)


def test_empirical_examples():
    assert empirical_distance("0000", ZERO, 4).value == 0.0
    # words longer than the sample have frequency 0, so they count against the model
    assert empirical_distance("0000", ZERO, 5).value == 2.0**-word_to_index((0,) * 5, 2)
    assert empirical_distance("0000", ONE, 1).value == 0.75
    assert empirical_distance("01", IIDModel.bernoulli(0.5), 1).value == 0.0


def test_exact_examples(model):
    assert exact_distance(model, model, 6).value == 0.0
    assert exact_distance(ZERO, ONE, 2).value == 0.890625


def test_tail_metadata():
    d = empirical_distance("0110", IIDModel.bernoulli(0.5), 3)
    assert d.tail_bound == tail_weight(3, 2) and d.depth == 3
    assert d.upper == d.value + d.tail_bound


@given(binary, models, st.integers(1, 4))
def test_matches_direct_sum(x, model, depth):
    assert empirical_distance(x, model, depth).value == pytest.approx(
        direct_distance(x, model, depth), abs=1e-12)


@given(models, models, st.integers(1, 5), st.integers(1, 3))
def test_truncation_sandwich(m1, m2, depth, extra):
    short = exact_distance(m1, m2, depth).value
    long = exact_distance(m1, m2, depth + extra).value
    assert short <= long <= short + tail_weight(depth, 2)


@given(models, models, st.integers(1, 6))
def test_symmetry_and_bounds(m1, m2, depth):
    d = exact_distance(m1, m2, depth).value
    assert d == exact_distance(m2, m1, depth).value
    assert 0.0 <= d <= 1.0 - tail_weight(depth, 2)


def test_triangle_on_random_triples():
    gen = np.random.default_rng(5)
    for _ in range(500):
        m1, m2, m3 = (random_model((gen.integers(3), gen.uniform(0.05, 0.95, 4))) for _ in range(3))
        d12 = exact_distance(m1, m2, 5).value
        d23 = exact_distance(m2, m3, 5).value
        d13 = exact_distance(m1, m3, 5).value
        assert d13 <= d12 + d23 + 1e-12


def test_alphabet_mismatch():
    with pytest.raises(AlphabetError):
        exact_distance(IIDModel([0.2, 0.3, 0.5]), ZERO, 2)
    with pytest.raises(AlphabetError):
        empirical_distance("0120", ZERO, 2)


def test_batch_equals_single():
    x = fixture_models()["hmm"].sample_paths(300, 20, seed=1)
    m = fixture_models()["markov1"]
    batch = batch_empirical_distance(x, m, 6)
    assert all(batch[i] == empirical_distance(x[i], m, 6).value for i in range(20))


def test_markov_projection_examples():
    res = project_markov("0101010101", 1, 6)
    np.testing.assert_array_equal(res.witness.transitions, [[0.0, 1.0], [1.0, 0.0]])
    assert res.distance.value < 0.01
    x = IIDModel.bernoulli(0.5).sample_path(10**4, seed=2)
    np.testing.assert_allclose(project_markov(x, 1, 8).witness.transitions, 0.5, atol=0.05)
    res = project_markov("0000", 1, 4)
    assert res.distance.value == 0.0
    assert res.witness.marginal((0, 0, 0, 0)) == 1.0
    assert res.diagnostics["unseen_contexts"] == [1]


@pytest.mark.parametrize("refine", [RefineConfig(), RefineConfig(enabled=True)])
def test_markov_witness_realizes_value(refine):
    x = fixture_models()["rotation"].sample_path(2000, seed=3)
    res = project_markov(x, 1, 6, refine)
    assert abs(res.distance.value - empirical_distance(x, res.witness, 6).value) <= 1e-12


def test_refinement_never_hurts():
    x = MarkovModel.binary(0.3, 0.6).sample_paths(1000, 30, seed=4)
    plain = family_statistics(x, MarkovOrder(1), 8)
    refined = family_statistics(x, MarkovOrder(1, refine=RefineConfig(enabled=True)), 8)
    assert np.all(refined <= plain)


def test_reducible_plug_in_is_avoided():
    # linear counts make the last-seen state absorbing; the statistic must stay small
    x = [0] * 48 + [1, 1]
    assert project_markov(x, 1, 5).distance.value < 0.01


def test_hmm_projection_examples():
    res = project_hmm("0000", 2, 3, EMConfig(restarts=5))
    assert res.distance.value < 1e-6
    x = "0110100010"
    one = project_hmm(x, 1, 4, EMConfig(restarts=3))
    np.testing.assert_allclose(one.witness.emission[0], [0.6, 0.4], atol=1e-9)
    assert one.distance.value == pytest.approx(
        empirical_distance(x, IIDModel([0.6, 0.4]), 4).value, abs=1e-12)


def test_hmm_projection_is_min_over_candidates():
    x = fixture_models()["hmm"].sample_path(400, seed=8)
    res = project_hmm(x, 2, 5, EMConfig(restarts=6))
    assert res.distance.value == pytest.approx(min(res.diagnostics["candidate_distances"]), abs=1e-12)
    polished = project_hmm(x, 2, 5, EMConfig(restarts=6, polish=True))
    assert polished.distance.value <= res.distance.value + 1e-15


def test_family_examples():
    assert distance_to_family("01", Singleton(IIDModel.bernoulli(0.5)), 1).distance.value == 0.0
    res = distance_to_family("0000", FiniteSet([ZERO, ONE]), 4)
    assert res.witness == ZERO and res.distance.value == 0.0
    a = distance_to_family("0101010101", MarkovOrder(1), 6)
    b = project_markov("0101010101", 1, 6)
    assert a.distance == b.distance and a.witness == b.witness


def test_projection_dominance_over_grid():
    family = MarkovOrder(1, refine=RefineConfig(enabled=True))
    members = member_design(family, MemberDesign(grid_step=0.1, margin=0.0))
    x = MarkovModel.binary(0.25, 0.65).sample_paths(500, 5, seed=6)
    stats = family_statistics(x, family, 6)
    for m in members:
        assert np.all(stats <= batch_empirical_distance(x, m, 6) + 1e-12)


def test_family_statistics_match_single_projection():
    x = MarkovModel.binary(0.3, 0.6).sample_paths(200, 8, seed=7)
    for family in (MarkovOrder(1), FiniteSet([ZERO, IIDModel.bernoulli(0.4)]),
                   HMMOrder(2, em=EMConfig(restarts=2, max_iter=30))):
        stats = family_statistics(x, family, 5)
        single = [distance_to_family(row, family, 5).distance.value for row in x]
        np.testing.assert_allclose(stats, single, rtol=0, atol=1e-12)
