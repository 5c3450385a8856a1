import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdec_grid.acceptance import (
    AcceptanceRule, NeighborhoodMass, Variant, build_bounded_neighborhood, exact_accept_prob,
    pooled_ratio_accept_prob, relaxed_distribution, residual_distribution, threshold_accept,
)
from specdec_grid.core import Categorical, Codebook, ContractError, nearest_neighbors, tvd


def test_exact_accept_examples():
    p = Categorical([0.3, 0.7])
    q = Categorical([0.6, 0.4])
    assert exact_accept_prob(p, q, 0) == pytest.approx(0.5, abs=1e-15)
    assert exact_accept_prob(p, q, 1) == 1.0
    assert all(exact_accept_prob(q, q, d) == 1.0 for d in range(2))
    with pytest.raises(ContractError):
        exact_accept_prob(p, Categorical([1.0, 0.0]), 1)


def test_residual_examples():
    res = residual_distribution(Categorical([0.5, 0.3, 0.2]), Categorical([0.2, 0.5, 0.3]))
    assert res.mass.tolist() == [1.0, 0.0, 0.0]
    res = residual_distribution(Categorical([0.6, 0.4]), Categorical([0.2, 0.8]))
    assert res.mass.tolist() == [1.0, 0.0]
    with pytest.raises(ContractError, match="degenerate residual"):
        residual_distribution(Categorical([0.5, 0.5]), Categorical([0.5, 0.5]))


def test_neighborhood_greedy_example():
    # 1-d codebook puts the walk from centre 3 in order 3, 2, 1, 0
    cb = Codebook(np.array([[0.0], [1.0], [2.0], [3.0]]))
    assert nearest_neighbors(cb, 3, 4) == [3, 2, 1, 0]
    p = Categorical([0.4, 0.3, 0.2, 0.1])
    nb = build_bounded_neighborhood(p, 3, cb, 4, 0.25)
    assert nb.members == (3, 2)
    assert nb.pooled == pytest.approx(0.3, abs=1e-15)
    assert nb.moved == pytest.approx(0.2, abs=1e-15)


def test_neighborhood_skips_and_continues():
    cb = Codebook(np.array([[0.0], [1.0], [2.0], [3.0]]))
    p = Categorical([0.05, 0.3, 0.2, 0.45])
    # walk 3,2,1,0: take 2 (0.2), skip 1 (0.5 > 0.26), take 0 (0.25)
    nb = build_bounded_neighborhood(p, 3, cb, 4, 0.26)
    assert nb.members == (3, 2, 0)
    assert nb.moved == pytest.approx(0.25, abs=1e-15)


def test_neighborhood_extremes():
    cb = Codebook(np.random.default_rng(0).normal(size=(5, 2)))
    p = Categorical([0.1, 0.2, 0.3, 0.25, 0.15])
    nb = build_bounded_neighborhood(p, 2, cb, 5, 0.0)
    assert nb.members == (2,) and nb.pooled == 0.3
    nb = build_bounded_neighborhood(p, 2, cb, 5, 1.0)
    assert sorted(nb.members) == [0, 1, 2, 3, 4]
    assert nb.pooled == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        build_bounded_neighborhood(p, 2, cb, 6, 0.1)


def test_pooled_ratio_examples():
    p = Categorical([0.2, 0.1, 0.7])
    q = Categorical([0.6, 0.2, 0.2])
    nb = NeighborhoodMass(0, (0, 1), 0.3, 0.1)
    assert pooled_ratio_accept_prob(p, q, 0, nb) == pytest.approx(0.5, abs=1e-15)
    assert pooled_ratio_accept_prob(p, q, 2, NeighborhoodMass(2, (2,), 0.7, 0.0)) == 1.0
    with pytest.raises(ContractError):
        pooled_ratio_accept_prob(p, q, 1, nb)


def test_threshold_examples():
    p = Categorical([0.2, 0.1, 0.7])
    nb = NeighborhoodMass(0, (0, 1), 0.3, 0.1)
    assert threshold_accept(p, 0, nb, 0.2)
    assert threshold_accept(p, 0, nb, 0.0)
    assert threshold_accept(p, 0, NeighborhoodMass(0, (0,), 0.0, 0.0), 0.0)
    assert not threshold_accept(p, 0, NeighborhoodMass(0, (0, 1, 2), 1.0, 0.8), 1.0 + 1e-9)


def test_rule_validation():
    AcceptanceRule(Variant.POOLED_THRESHOLD, k=3, delta=0.1, tau=0.5)
    for kw in ({"k": 0}, {"delta": -0.1}, {"delta": 1.5}, {"tau": -1.0}):
        with pytest.raises(ValueError):
            AcceptanceRule(Variant.POOLED_RATIO, **{"k": 2, **kw})
    assert AcceptanceRule(Variant.POOLED_RATIO, k=1000).k_for(16) == 16


def _one_step_law(p, q):
    """Closed-form marginal of one draft/verify step: accepted mass plus
    the rejected mass routed through the residual."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    accept = np.minimum(p, q)
    res = np.maximum(0.0, p - q)
    out = accept.copy()
    if res.sum() > 0:
        out += (1.0 - accept.sum()) * res / res.sum()
    return out


def _enumerated_step_law(p, q):
    v = len(p.mass)
    law = np.zeros(v)
    res = None
    for d in range(v):
        if q.mass[d] == 0:
            continue
        a = exact_accept_prob(p, q, d)
        law[d] += q.mass[d] * a
        if a < 1:
            res = res or residual_distribution(p, q)
            law += q.mass[d] * (1 - a) * res.mass
    return law


# masses below 1e-6 are zeroed: at ~1e-229 the positive part of p - q
# underflows to nothing even though a rejection is still possible
weight = st.one_of(st.just(0.0), st.floats(1e-6, 1.0))
simplex = st.integers(2, 6).flatmap(
    lambda v: st.tuples(
        st.lists(weight, min_size=v, max_size=v).filter(lambda w: sum(w) > 0.05),
        st.lists(weight, min_size=v, max_size=v).filter(lambda w: sum(w) > 0.05),
    )
)


@settings(max_examples=300, deadline=None)
@given(simplex)
def test_accept_residual_pair_is_exact(pair):
    p, q = (Categorical.normalized(w) for w in pair)
    law = _enumerated_step_law(p, q)
    assert np.abs(law - p.mass).max() < 1e-12
    assert np.abs(_one_step_law(p.mass, q.mass) - p.mass).max() < 1e-12


def _random_case(gen):
    v = int(gen.integers(2, 10))
    p = Categorical(gen.dirichlet(np.full(v, gen.choice([0.2, 1.0, 4.0]))))
    cb = Codebook(gen.normal(size=(v, int(gen.integers(1, 4)))))
    return v, p, cb, int(gen.integers(v)), int(gen.integers(1, v + 1)), float(gen.uniform())


def test_relaxed_distribution_tvd_equals_moved_and_stays_in_b_k():
    gen = np.random.default_rng(7)
    for _ in range(500):
        v, p, cb, center, k, delta = _random_case(gen)
        nb = build_bounded_neighborhood(p, center, cb, k, delta)
        relaxed = relaxed_distribution(p, nb)
        assert nb.members[0] == center
        assert set(nb.members) <= set(nearest_neighbors(cb, center, k))
        assert nb.moved <= delta
        assert tvd(relaxed, p) == pytest.approx(nb.moved, abs=1e-12)
        assert relaxed.mass[center] == pytest.approx(nb.pooled, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 1), st.floats(0, 1))
def test_pooled_mass_monotone_in_delta(seed, d1, d2):
    gen = np.random.default_rng(seed)
    v, p, cb, center, k, _ = _random_case(gen)
    lo, hi = sorted((d1, d2))
    assert (build_bounded_neighborhood(p, center, cb, k, lo).pooled
            <= build_bounded_neighborhood(p, center, cb, k, hi).pooled + 1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 1.5), st.floats(0, 1.5))
def test_threshold_monotone_in_tau(seed, t1, t2):
    gen = np.random.default_rng(seed)
    v, p, cb, center, k, delta = _random_case(gen)
    nb = build_bounded_neighborhood(p, center, cb, k, delta)
    hi, lo = max(t1, t2), min(t1, t2)
    if threshold_accept(p, center, nb, hi):
        assert threshold_accept(p, center, nb, lo)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 1))
def test_k1_reduces_to_exact(seed, delta):
    gen = np.random.default_rng(seed)
    v, p, cb, center, _, _ = _random_case(gen)
    q = Categorical(gen.dirichlet(np.ones(v)))
    nb = build_bounded_neighborhood(p, center, cb, 1, delta)
    assert nb.members == (center,)
    assert pooled_ratio_accept_prob(p, q, center, nb) == exact_accept_prob(p, q, center)
