import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fixture_models
from ergotest.errors import NonUniqueStationaryError, SpecError, StochasticMatrixError
from ergotest.processes import (HMMModel, IIDModel, MarkovModel, MixtureModel, RotationModel,
                                ergodic_components, model_from_spec, stationary_distribution)
from ergotest.stats import frequency_table


def words(length, a=2):
    return itertools.product(range(a), repeat=length)


def test_marginal_examples():
    assert IIDModel.bernoulli(0.5).marginal((0, 1)) == 0.25
    assert HMMModel([[1.0]], [[0.3, 0.7]]).marginal((1,)) == pytest.approx(0.7, abs=1e-15)
    assert MarkovModel.flip().marginal((0, 1)) == pytest.approx(0.5, abs=1e-15)
    assert RotationModel(0.3).marginal((0,)) == pytest.approx(0.5, abs=1e-15)
    assert RotationModel().marginal((0,)) == pytest.approx(0.5, abs=1e-15)


def test_constant_chain_sample():
    x = MarkovModel.constant(0).sample_path(5, seed=3)
    assert x.tolist() == [0, 0, 0, 0, 0]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_iid_sample_frequency(seed):
    x = IIDModel.bernoulli(0.5).sample_path(10**5, seed)
    assert abs(x.mean() - 0.5) <= 0.01


def test_sampling_is_deterministic(model):
    np.testing.assert_array_equal(model.sample_path(200, 9), model.sample_path(200, 9))
    np.testing.assert_array_equal(model.sample_paths(50, 3, 4), model.sample_paths(50, 3, 4))


def test_stationary_examples():
    pi, unique = stationary_distribution([[0, 1], [1, 0]])
    assert unique and np.allclose(pi, [0.5, 0.5], atol=1e-15)
    p = [0.2, 0.5, 0.3]
    pi, unique = stationary_distribution([p, p, p])
    assert unique and np.allclose(pi, p, atol=1e-15)
    pi, unique = stationary_distribution(np.eye(3))
    assert not unique
    assert np.allclose(pi @ np.eye(3), pi) and pi.sum() == pytest.approx(1.0)


@given(st.integers(2, 5).flatmap(lambda c: st.lists(
    st.lists(st.floats(0.01, 1.0), min_size=c, max_size=c), min_size=c, max_size=c)))
def test_stationary_law_is_invariant(rows):
    p = np.array(rows)
    p /= p.sum(axis=1, keepdims=True)
    pi, unique = stationary_distribution(p)
    assert unique
    np.testing.assert_allclose(pi @ p, pi, atol=1e-12)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_reducible_chain_needs_initial_law():
    with pytest.raises(NonUniqueStationaryError):
        MarkovModel(1, np.eye(2))
    m = MarkovModel(1, np.eye(2), initial=[0.25, 0.75])
    assert m.marginal((1,)) == pytest.approx(0.75)


def test_rejects_non_stochastic():
    with pytest.raises(StochasticMatrixError):
        MarkovModel(1, [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(StochasticMatrixError):
        HMMModel([[1.0]], [[-0.1, 1.1]])


def test_marginals_are_stationary(model):
    tables = model.marginal_tables(7)
    for ell in range(1, 7):
        short, long = tables[ell - 1], tables[ell]
        right = long.reshape(-1, 2).sum(axis=1)     # sum over the appended symbol
        left = long.reshape(2, -1).sum(axis=0)      # sum over the prepended symbol
        np.testing.assert_allclose(right, short, rtol=0, atol=1e-12)
        np.testing.assert_allclose(left, short, rtol=0, atol=1e-12)


def test_marginals_normalized(model):
    for ell in range(1, 7):
        assert abs(model.marginals(ell).sum() - 1.0) <= 1e-12


def test_single_word_marginal_matches_table(model):
    tables = model.marginal_tables(4)
    for ell in range(1, 5):
        for rank, w in enumerate(words(ell)):
            assert model.marginal(w) == pytest.approx(tables[ell - 1][rank], abs=1e-12)


@pytest.mark.parametrize("name", ["iid", "markov1", "markov2", "flip", "hmm", "rotation"])
def test_sampler_agrees_with_marginals(name):
    model = fixture_models()[name]
    table = frequency_table(model.sample_path(10**5, seed=17), 3, 2)
    for ell in range(1, 4):
        np.testing.assert_allclose(table.frequencies(ell), model.marginals(ell), atol=0.02)


def test_mixture_identity():
    c1, c2 = IIDModel.bernoulli(0.1), MarkovModel.binary(0.5, 0.9)
    mix = MixtureModel([0.4, 0.6], [c1, c2])
    for ell in range(1, 6):
        for w in words(ell):
            assert mix.marginal(w) == 0.4 * c1.marginal(w) + 0.6 * c2.marginal(w)


def test_mixture_paths_follow_one_component():
    mix = MixtureModel([0.5, 0.5], [MarkovModel.constant(0), MarkovModel.constant(1)])
    rows = mix.sample_paths(20, 40, seed=2)
    assert all(len(set(r.tolist())) == 1 for r in rows)
    assert 0 < rows[:, 0].mean() < 1


def test_ergodic_components():
    m1, m2, m3 = IIDModel.bernoulli(0.1), IIDModel.bernoulli(0.5), MarkovModel.flip()
    assert ergodic_components(MixtureModel([0.3, 0.7], [m1, m2])) == [(0.3, m1), (0.7, m2)]
    assert ergodic_components(MixtureModel([1.0], [m1])) == [(1.0, m1)]
    nested = MixtureModel([0.5, 0.5], [MixtureModel([0.5, 0.5], [m1, m2]), m3])
    assert [w for w, _ in ergodic_components(nested)] == [0.25, 0.25, 0.5]


def test_hmm_long_word_does_not_underflow():
    hmm = fixture_models()["hmm"]
    p = hmm.marginal((0, 1) * 300)
    assert 0.0 < p < 1e-100


def test_order_two_parity_chain_has_uniform_pairs():
    m = fixture_models()["markov2"]
    np.testing.assert_allclose(m.marginals(2), 0.25, atol=1e-12)


def test_rotation_marginals():
    rot = RotationModel()
    assert rot.marginal((0, 0, 0)) == 0.0
    # phase in [0, 1/2) and phase + angle (mod 1) in [0, 1/2): an arc of length angle - 1/2
    assert rot.marginal((0, 0)) == pytest.approx(rot.angle - 0.5, abs=1e-12)


def test_spec_round_trip(model):
    rebuilt = model_from_spec(model.to_spec())
    assert rebuilt == model
    np.testing.assert_allclose(rebuilt.marginals(4), model.marginals(4), atol=0)


@pytest.mark.parametrize("spec", [{"kind": "nope"}, {"kind": "iid"}, {"p": [1.0]},
                                  {"kind": "markov", "order": 1, "transitions": "x"}])
def test_bad_specs(spec):
    with pytest.raises(SpecError):
        model_from_spec(spec)
