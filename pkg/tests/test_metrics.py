import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import tiny_models
from specdec_grid.core import ContractError, GridShape, RandomSource, random_codebook
from specdec_grid.engine import DecodeConfig, DecodeTrace, Models, run_decoder
from specdec_grid.locality import RejectionMode
from specdec_grid.metrics import (
    CSV_COLUMNS, CostModel, consistency_check, effective_identity_gap, summarize, sweep_csv,
    theoretical_speedup,
)
from specdec_grid.models import build_block_sampler, build_toy_model, derive_drafter


def test_theoretical_speedup_spot_values():
    assert theoretical_speedup(4096, 256, 1.0) == 16.0
    assert round(theoretical_speedup(4096, 256, 0.0), 4) == 0.9412
    # 0.2 * 4096 + 256 = 1075.2
    assert theoretical_speedup(4096, 256, 0.8) == pytest.approx(4096 / 1075.2, rel=1e-15)
    assert round(4096 / 1075.2, 4) == 3.8095


def test_theoretical_speedup_preconditions():
    for args in ((0, 1, 0.5), (10, -1, 0.5), (10, 1, 1.5), (10, 1, -0.1)):
        with pytest.raises(ValueError):
            theoretical_speedup(*args)


@given(st.integers(1, 10_000), st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1))
def test_theoretical_speedup_monotone(t_p, t_q, a1, a2):
    lo, hi = sorted((a1, a2))
    if t_q == 0 and hi == 1.0:
        return  # denominator vanishes
    assert theoretical_speedup(t_p, t_q, lo) <= theoretical_speedup(t_p, t_q, hi)
    if hi - lo > 1e-9:  # below this the denominators can round together
        assert theoretical_speedup(t_p, t_q, lo) < theoretical_speedup(t_p, t_q, hi)
    assert theoretical_speedup(t_p, t_q + 1, lo) < theoretical_speedup(t_p, t_q, lo)


def four_x():
    target = build_toy_model(0, 16, GridShape(16, 16), 1.0)
    codebook = random_codebook(2, 16, 4)
    return Models(target, derive_drafter(target, 4, 0.3), build_block_sampler(7, codebook, 4), codebook)


def mulo(tau, mode="expand:3", seed=0):
    return DecodeConfig.make("mulosd", k=16, delta=0.1, tau=tau, r=4, mode=RejectionMode.parse(mode), seed=seed)


def test_tau_zero_speedup_by_formula():
    _, tr = run_decoder(four_x(), mulo(0.0), RandomSource(0))
    s = summarize(tr)
    c = tr.counters
    assert (c.target_seq_nfe, c.draft_seq_nfe, c.target_parallel_calls) == (0, 16, 4)
    assert s.measured_speedup == pytest.approx(256 / (16 + 4 + 0.05 * (4 + 3)), rel=1e-15)


def test_baseline_speedup_is_exactly_one():
    m = tiny_models(seed=0, vocab=8, side=8)
    _, tr = run_decoder(m, DecodeConfig.make("baseline"), RandomSource(0))
    assert summarize(tr).measured_speedup == 1.0


def test_all_reject_is_slower_than_baseline():
    _, tr = run_decoder(four_x(), mulo(2.0), RandomSource(0))
    assert summarize(tr).measured_speedup < 1.0


@pytest.mark.parametrize("tau", [0.0, 0.05, 0.1024, 0.3, 2.0])
def test_cost_fractions_sum_to_one(tau):
    _, tr = run_decoder(four_x(), mulo(tau), RandomSource(1))
    s = summarize(tr, CostModel(1.0, 0.7, 0.2))
    assert sum(s.cost_fractions.values()) == pytest.approx(1.0, abs=1e-9)
    assert set(s.cost_fractions) == {"draft", "verify", "resample", "samplers"}


def test_consistency_extremes_are_exact():
    for tau in (0.0, 2.0):
        _, tr = run_decoder(four_x(), mulo(tau), RandomSource(0))
        s = summarize(tr, CostModel.nfe_only())
        assert consistency_check(s) == 0.0


@pytest.mark.parametrize("noise", [0.0, 0.2, 0.5, 0.8, 1.0])
def test_naive_mode_consistency_small(noise):
    m = four_x()
    m = dataclasses.replace(m, drafter=derive_drafter(m.target, 4, noise))
    for seed in range(10):
        _, tr = run_decoder(m, mulo(0.1024, "naive", seed), RandomSource(seed))
        assert consistency_check(summarize(tr, CostModel.nfe_only())) < 0.05


@pytest.mark.parametrize("mode", ["raster", "expand:1", "expand:3"])
def test_effective_identity_with_expansion(mode):
    for seed in range(10):
        _, tr = run_decoder(four_x(), mulo(0.1024, mode, seed), RandomSource(seed))
        s = summarize(tr, CostModel.nfe_only())
        assert effective_identity_gap(s) < 1e-9
        assert s.a_effective <= s.acceptance_rate + 1e-12


def test_incomplete_trace_is_rejected():
    with pytest.raises(ContractError):
        summarize(DecodeTrace({}, GridShape(2, 2)))


def test_cost_model_validation():
    with pytest.raises(ValueError):
        CostModel(-1.0)
    assert CostModel.nfe_only() == CostModel(1.0, 0.0, 0.0)


def test_summary_report_keys():
    _, tr = run_decoder(four_x(), mulo(0.1), RandomSource(0))
    doc = summarize(tr).to_dict()
    assert set(doc) == {"config", "acceptance_rate", "a_effective", "counters", "cost_fractions",
                        "measured_speedup", "theoretical_speedup", "deviation"}
    assert set(doc["counters"]) == {"draft_seq_nfe", "target_seq_nfe", "target_parallel_calls",
                                    "downsample_calls", "upsample_calls"}


def test_sweep_csv_columns():
    row = dict(zip(CSV_COLUMNS, ["tau", 0.1, 0.5, 0.4, 1.2, 1.3, 0.01]), extra=1)
    text = sweep_csv([row])
    assert text.splitlines()[0] == "axis,value,acc_rate,a_effective,speedup_measured,speedup_theoretical,deviation"
    assert text.splitlines()[1] == "tau,0.1,0.5,0.4,1.2,1.3,0.01"
