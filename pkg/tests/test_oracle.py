import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_models
from specdec_grid.acceptance import build_bounded_neighborhood
from specdec_grid.core import Categorical, GridShape, tvd
from specdec_grid.engine import DecodeConfig, Models
from specdec_grid.locality import RejectionMode
from specdec_grid.models import Conditioning, ToyMarkovModel, build_toy_model, derive_drafter
from specdec_grid.oracle import (
    EnumerationLimit, decoder_law, max_abs_deviation, per_step_law, target_law,
)


def _chain_rule(model):
    """Joint law by looping over every complete grid."""
    v, n = model.vocab_size, model.shape.size
    out = {}
    for grid in itertools.product(range(v), repeat=n):
        prob = 1.0
        for t in range(n):
            prob *= float(model.evaluate(Conditioning(0), grid, t).mass[grid[t]])
        out[grid] = prob
    return out


def test_target_law_single_cell():
    model = build_toy_model(0, 4, GridShape(1, 1), 1.0)
    law = target_law(model, 0)
    assert [law.get((x,), 0.0) for x in range(4)] == model.row(4, 4, 0).mass.tolist()


def test_target_law_point_mass():
    table = np.zeros((4, 4, 3, 3))
    table[..., 1] = 1.0
    model = ToyMarkovModel(table, GridShape(2, 2), 1.0, 0)
    assert target_law(model, 0) == {(1, 1, 1, 1): 1.0}


def test_target_law_two_by_two():
    model = build_toy_model(3, 3, GridShape(2, 2), 1.0)
    law = target_law(model, 0)
    brute = _chain_rule(model)
    assert len(law) == 81
    assert abs(sum(law.values()) - 1.0) < 1e-12
    assert max_abs_deviation(law, brute) < 1e-15


def test_enumeration_guard():
    model = build_toy_model(0, 4, GridShape(3, 4), 1.0)
    with pytest.raises(EnumerationLimit):
        target_law(model, 0)
    with pytest.raises(EnumerationLimit):
        decoder_law(Models(model), DecodeConfig.make("baseline"))


@pytest.mark.parametrize("seed", range(5))
def test_baseline_law_is_bit_identical(seed):
    target = tiny_models(seed=seed).target
    assert decoder_law(Models(target), DecodeConfig.make("baseline")) == target_law(target, 0)


@pytest.mark.parametrize("window", [1, 2, 3])
@pytest.mark.parametrize("noise", [0.0, 0.3, 1.0])
def test_specdec_law_equals_target(window, noise):
    m = tiny_models(seed=7, noise=noise)
    law = decoder_law(m, DecodeConfig.make("specdec", window_tokens=window))
    assert max_abs_deviation(law, target_law(m.target, 0)) < 1e-9


def test_specdec_law_on_a_non_square_grid():
    target = build_toy_model(4, 3, GridShape(1, 4), 0.5)
    m = Models(target, derive_drafter(target, 1, 0.8))
    law = decoder_law(m, DecodeConfig.make("specdec", window_tokens=3))
    assert max_abs_deviation(law, target_law(target, 0)) < 1e-9


def test_mulosd_all_reject_law_equals_target():
    m = tiny_models(seed=1, vocab=3, side=2, r=2)
    cfg = DecodeConfig.make("mulosd", k=3, delta=0.1, tau=1.5, r=2)
    assert max_abs_deviation(decoder_law(m, cfg), target_law(m.target, 0)) < 1e-9


def test_mulosd_tau_zero_law_is_the_upsampled_drafter():
    m = tiny_models(seed=2, vocab=3, side=2, r=2)
    cfg = DecodeConfig.make("mulosd", k=3, delta=0.1, tau=0.0, r=2)
    law = decoder_law(m, cfg)
    q = m.drafter.evaluate(Conditioning(0), [], 0)
    expected = {}
    for y in range(3):
        grid = tuple(m.sampler.up([[y]]))
        expected[grid] = expected.get(grid, 0.0) + float(q.mass[y])
    assert max_abs_deviation(law, expected) < 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["specdec", "lantern", "mulosd"]),
       st.floats(0.0, 1.0), st.floats(0.0, 1.2), st.sampled_from(["raster", "naive", "expand:1"]))
def test_every_law_sums_to_one(seed, decoder, delta, tau, mode):
    r = 2 if decoder == "mulosd" else 1
    m = tiny_models(seed=seed, vocab=3, side=2, r=r)
    cfg = DecodeConfig.make(decoder, k=3, delta=delta, tau=tau, r=r, window_tokens=2,
                            mode=RejectionMode.parse(mode))
    law = decoder_law(m, cfg)
    assert abs(sum(law.values()) - 1.0) < 1e-9
    assert min(law.values()) >= 0


def _lantern_step_by_hand(p, q, codebook, k, delta):
    """sum_d q(d) [a_d 1{x=d} + (1 - a_d) residual_d(x)] with the residual
    taken against the relaxed target."""
    v = len(p.mass)
    law = np.zeros(v)
    for d in range(v):
        qd = float(q.mass[d])
        if qd == 0:
            continue
        nb = build_bounded_neighborhood(p, d, codebook, k, delta)
        a = min(1.0, nb.pooled / qd)
        law[d] += qd * a
        if a < 1:
            relaxed = p.mass.copy()
            relaxed[list(nb.members)] = 0.0
            relaxed[d] = nb.pooled
            res = np.maximum(0.0, relaxed - q.mass)
            law += qd * (1 - a) * res / res.sum()
    return law


@pytest.mark.parametrize("seed", range(4))
def test_per_step_law_matches_hand_derivation(seed):
    m = tiny_models(seed=seed, vocab=4, side=2, noise=0.6)
    cfg = DecodeConfig.make("lantern", k=4, delta=0.3)
    for pos in range(4):
        for prefix in itertools.product(range(4), repeat=pos):
            p = m.target.evaluate(Conditioning(0), prefix, pos)
            q = m.drafter.evaluate(Conditioning(0), prefix, pos)
            want = _lantern_step_by_hand(p, q, m.codebook, 4, 0.3)
            got = per_step_law(m, cfg, prefix, pos)
            assert np.abs(got.mass - want).max() < 1e-12


def test_per_step_law_baseline_and_specdec_are_exact():
    m = tiny_models(seed=3, vocab=3, side=2, noise=0.7)
    for decoder in ("baseline", "specdec"):
        cfg = DecodeConfig.make(decoder)
        for pos in range(4):
            for prefix in itertools.product(range(3), repeat=pos):
                p = m.target.evaluate(Conditioning(0), prefix, pos)
                assert tvd(per_step_law(m, cfg, prefix, pos), p) < 1e-12


def test_per_step_law_rejects_mulosd_and_short_prefix():
    m = tiny_models(seed=0, r=2)
    with pytest.raises(ValueError):
        per_step_law(m, DecodeConfig.make("mulosd", k=3, tau=0.1, r=2), (), 0)
    with pytest.raises(ValueError):
        per_step_law(tiny_models(), DecodeConfig.make("specdec"), (0,), 2)


def test_max_abs_deviation_counts_missing_keys():
    assert max_abs_deviation({(0,): 0.5, (1,): 0.5}, {(0,): 1.0}) == 0.5
    assert max_abs_deviation({}, {}) == 0.0


def test_uniform_categorical_helper():
    assert Categorical.uniform(4).mass.tolist() == [0.25] * 4
