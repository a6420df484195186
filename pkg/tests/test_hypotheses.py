import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergotest.distance import family_statistics
from ergotest.errors import AlphabetError, DesignError, SpecError
from ergotest.hypotheses import (EMConfig, FiniteSet, HMMOrder, MarkovOrder, MemberDesign,
                                 RefineConfig, Singleton, clamp_rows, design_from_spec,
                                 family_from_spec, member_design, simplex_grid)
from ergotest.processes import HMMModel, IIDModel, MarkovModel, MixtureModel


def test_singleton_design():
    m = IIDModel.bernoulli(0.3)
    assert member_design(Singleton(m)) == [m]


def test_finite_design():
    ms = [IIDModel.bernoulli(0.3), MarkovModel.flip()]
    assert member_design(FiniteSet(ms), MemberDesign(grid_step=0.5)) == ms


def test_markov_grid_count():
    members = member_design(MarkovOrder(1), MemberDesign(grid_step=0.25, margin=0.01))
    assert len(members) == 25
    p10 = sorted({round(m.transitions[0, 1], 6) for m in members})
    assert p10 == [0.01, 0.25, 0.5, 0.75, 0.99]


def test_random_members_reproducible():
    design = MemberDesign(grid_step=0.5, random=7, seed=3)
    a = member_design(MarkovOrder(2), design)
    b = member_design(MarkovOrder(2), design)
    assert len(a) == 3**4 + 7
    assert a == b
    other = member_design(MarkovOrder(2), MemberDesign(grid_step=0.5, random=7, seed=4))
    assert a[-7:] != other[-7:]


def test_zero_margin_skips_reducible_members():
    members = member_design(MarkovOrder(1), MemberDesign(grid_step=0.5, margin=0.0))
    # P(1|0)=0, P(1|1)=1 has two closed classes
    assert len(members) == 8


@given(st.integers(1, 3), st.integers(2, 3), st.floats(0.0, 0.2), st.integers(0, 20))
def test_clamping(order, a, margin, random):
    design = MemberDesign(random=random + 1, margin=margin, seed=random)
    for m in member_design(MarkovOrder(order, a), design):
        assert np.all(m.transitions >= margin - 1e-12)
        assert np.all(m.transitions <= 1 - margin + 1e-12)
        np.testing.assert_allclose(m.transitions.sum(axis=1), 1.0, atol=1e-12)


def test_hmm_design():
    members = member_design(HMMOrder(2), MemberDesign(grid_step=1.0, random=5, margin=0.05))
    assert len(members) == 4 + 5
    for m in members:
        assert isinstance(m, HMMModel)
        assert m.transition.min() >= 0.05 - 1e-12 and m.emission.min() >= 0.05 - 1e-12


def test_design_cap():
    with pytest.raises(DesignError):
        member_design(MarkovOrder(3), MemberDesign(grid_step=0.1, cap=1000))
    with pytest.raises(DesignError):
        member_design(MarkovOrder(1), MemberDesign())
    with pytest.raises(DesignError):
        simplex_grid(2, 0.3)


def test_clamp_rows_keeps_normalization():
    rows = clamp_rows(np.array([[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]]), 0.1)
    np.testing.assert_allclose(rows.sum(axis=1), 1.0)
    assert rows.min() >= 0.1 - 1e-12 and rows.max() <= 0.9 + 1e-12


def test_family_validation():
    with pytest.raises(SpecError):
        Singleton(MixtureModel([0.5, 0.5], [IIDModel.bernoulli(0.1), IIDModel.bernoulli(0.9)]))
    with pytest.raises(AlphabetError):
        FiniteSet([IIDModel.bernoulli(0.1), IIDModel([0.2, 0.3, 0.5])])


@pytest.mark.parametrize("family", [
    Singleton(IIDModel.bernoulli(0.4)),
    FiniteSet([IIDModel.bernoulli(0.4), MarkovModel.flip()]),
    MarkovOrder(2, refine=RefineConfig(enabled=True, width=0.1)),
    HMMOrder(3, em=EMConfig(restarts=4)),
])
def test_family_spec_round_trip(family):
    assert family_from_spec(family.to_spec()) == family
    assert design_from_spec(MemberDesign(random=3).to_spec()) == MemberDesign(random=3)


def test_markov_family_self_consistency():
    family = MarkovOrder(1)
    members = member_design(family, MemberDesign(grid_step=0.25, random=10, seed=1))
    for i, m in enumerate(members):
        stats = family_statistics(m.sample_paths(10**4, 20, seed=i), family, 8)
        assert np.mean(stats <= 0.05) >= 0.95
