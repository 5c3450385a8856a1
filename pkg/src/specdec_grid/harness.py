"""Toy assets, ablation sweeps and the oracle-backed verification suite."""

from __future__ import annotations

import dataclasses
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import core
from .acceptance import build_bounded_neighborhood, relaxed_distribution
from .config import ModelSection, RunConfig, VerifySection, default_tau_grid
from .core import Categorical, GridShape, RandomSource, tvd
from .engine import ConfigError, DecodeConfig, Decoder, Models, run_decoder
from .locality import RejectionMode, expand_rejections
from .metrics import CostModel, effective_identity_gap, summarize
from .models import (
    Conditioning, ToyBlockSampler, ToyMarkovModel, build_block_sampler, build_toy_model,
    derive_drafter, read_model, read_templates, write_model, write_templates,
)
from .oracle import ENUMERATION_LIMIT, EnumerationLimit, decoder_law, max_abs_deviation, per_step_law, target_law

TARGET_FILE = "target.model"
CODEBOOK_FILE = "codebook.csv"
TEMPLATES_FILE = "templates.txt"


def drafter_file(r: int) -> str:
    return f"drafter_r{r}.model"


@dataclass
class Assets:
    target: ToyMarkovModel
    drafters: dict[int, ToyMarkovModel]
    codebook: core.Codebook
    samplers: dict[int, ToyBlockSampler]
    noise: float = 0.0

    def models(self, config: DecodeConfig) -> Models:
        if config.decoder is Decoder.BASELINE:
            return Models(self.target, codebook=self.codebook)
        r = config.r
        if r == 1:
            drafter = derive_drafter(self.target, 1, self.noise)
        elif r in self.drafters:
            drafter = self.drafters[r]
        else:
            raise ConfigError(f"no drafter for r={r}; generated factors are {sorted(self.drafters)}")
        return Models(self.target, drafter, self.samplers.get(r), self.codebook)


def build_assets(m: ModelSection) -> Assets:
    shape = GridShape(m.height, m.width)
    for r in m.factors:
        if r < 1 or m.height % r or m.width % r:
            raise ConfigError(f"grid {m.height}x{m.width} is not divisible by r={r}")
    try:
        target = build_toy_model(m.seed, m.vocab, shape, m.temperature)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    codebook = core.random_codebook(m.codebook_seed, m.vocab, m.dim)
    drafters = {r: derive_drafter(target, r, m.noise, m.drafter_seed) for r in m.factors}
    samplers = {r: build_block_sampler(m.sampler_seed + r, codebook, r) for r in m.factors}
    return Assets(target, drafters, codebook, samplers, m.noise)


def write_assets(assets: Assets, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / TARGET_FILE]
    write_model(assets.target, paths[0])
    for r, drafter in sorted(assets.drafters.items()):
        paths.append(out / drafter_file(r))
        write_model(drafter, paths[-1])
    paths.append(out / CODEBOOK_FILE)
    core.write_codebook(assets.codebook, paths[-1])
    paths.append(out / TEMPLATES_FILE)
    write_templates([assets.samplers[r] for r in sorted(assets.samplers)], paths[-1])
    return paths


def read_assets(directory: Path, noise: float) -> Assets:
    target = read_model(directory / TARGET_FILE)
    codebook = core.read_codebook(directory / CODEBOOK_FILE)
    samplers = read_templates(directory / TEMPLATES_FILE, codebook)
    drafters = {}
    for path in sorted(directory.glob("drafter_r*.model")):
        drafters[int(path.stem.split("_r")[1])] = read_model(path)
    return Assets(target, drafters, codebook, samplers, noise)


# -- sweeps ------------------------------------------------------------------------

AXES = ("tau", "noise", "radius", "mode", "pooling_k")


def default_axis_values(axis: str, vocab: int) -> tuple:
    return {
        "tau": default_tau_grid(),
        "noise": (0.0, 0.25, 0.5, 0.75, 1.0),
        "radius": (1, 3, 5),
        "mode": ("raster", "naive", "expand:3"),
        "pooling_k": (1, vocab),
    }[axis]


def _point_config(cfg: RunConfig, axis: str, value) -> RunConfig:
    point = RunConfig.from_text(cfg.to_text())
    if axis == "tau":
        point.decode.tau = float(value)
    elif axis == "noise":
        point.model.noise = float(value)
    elif axis == "radius":
        point.decode.mode, point.decode.radius = "expand", int(value)
    elif axis == "mode":
        point.decode.mode = str(value)
    elif axis == "pooling_k":
        point.decode.k = int(value)
    return point


def run_point(cfg: RunConfig, axis: str, value, assets: Assets | None = None) -> dict:
    """Ensemble means for one operating point of a sweep."""
    assets = assets or build_assets(cfg.model)
    decode = cfg.decode_config(assets.target.vocab_size)
    if axis == "noise":
        assets = dataclasses.replace(assets, noise=float(value), drafters={
            r: derive_drafter(assets.target, r, float(value), cfg.model.drafter_seed)
            for r in assets.drafters
        })
    models = assets.models(decode)
    cost = cfg.cost_model()
    acc, aeff, meas, theo, dev = [], [], [], [], []
    for i in range(cfg.bench.seeds):
        seed = cfg.bench.base_seed + i
        _, trace = run_decoder(models, dataclasses.replace(decode, seed=seed), RandomSource(seed))
        s = summarize(trace, cost)
        acc.append(s.acceptance_rate)
        aeff.append(s.a_effective)
        meas.append(s.measured_speedup)
        theo.append(s.theoretical_speedup)
        dev.append(s.deviation)
    return {
        "axis": axis,
        "value": value,
        "acc_rate": float(np.mean(acc)),
        "a_effective": float(np.mean(aeff)),
        "speedup_measured": float(np.mean(meas)),
        "speedup_theoretical": float(np.mean(theo)),
        "deviation": float(np.mean(dev)),
    }


def _run_point_args(args):
    text, axis, value = args
    return run_point(RunConfig.from_text(text), axis, value)


def run_sweep(cfg: RunConfig) -> list[dict]:
    axis = cfg.bench.axis
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    values = cfg.bench.values or default_axis_values(axis, cfg.model.vocab)
    if axis == "mode":
        for v in values:
            try:
                RejectionMode.parse(str(v))
            except ValueError:
                raise ConfigError(f"unknown rejection mode {v!r}") from None
    if cfg.bench.seeds < 1:
        raise ConfigError("bench.seeds must be >= 1")
    points = [_point_config(cfg, axis, v) for v in values]
    cfg.decode_config()  # surface configuration errors before fanning out
    if cfg.bench.workers > 1:
        jobs = [(p.to_text(), axis, v) for p, v in zip(points, values)]
        with ProcessPoolExecutor(cfg.bench.workers) as pool:
            rows = list(pool.map(_run_point_args, jobs))
    else:
        assets = build_assets(cfg.model)
        rows = [run_point(p, axis, v, assets) for p, v in zip(points, values)]
    # order by axis value; categorical axes keep their listed order
    if axis != "mode":
        rows.sort(key=lambda row: float(row["value"]))
    return rows


# -- verification suite ------------------------------------------------------------

def _check(name, deviation, threshold, ok=None, **extra):
    ok = deviation <= threshold if ok is None else ok
    return {"check": name, "status": "pass" if ok else "fail",
            "deviation": float(deviation), "threshold": float(threshold), **extra}


def _skip(name, reason):
    return {"check": name, "status": "skip", "reason": reason}


def _tiny(v: VerifySection, seed: int, noise: float | None = None):
    shape = GridShape(v.height, v.width)
    target = build_toy_model(seed, v.vocab, shape, 1.0)
    drafter = derive_drafter(target, 1, v.noise if noise is None else noise)
    codebook = core.random_codebook(10_000 + seed, v.vocab, 2)
    return target, drafter, codebook


def check_specdec_exactness(v: VerifySection) -> dict:
    name = "specdec_exactness"
    worst = 0.0
    try:
        for seed in range(v.model_seeds):
            target, drafter, _ = _tiny(v, seed)
            law_p = target_law(target, 0)
            for window in range(1, v.window + 1):
                law = decoder_law(Models(target, drafter), DecodeConfig.make("specdec", window_tokens=window))
                worst = max(worst, max_abs_deviation(law, law_p))
    except EnumerationLimit as exc:
        return _skip(name, f"enumeration limit: {exc}")
    return _check(name, worst, 1e-9)


def check_baseline_identity(v: VerifySection) -> dict:
    name = "baseline_bit_identity"
    worst = 0.0
    try:
        for seed in range(v.model_seeds):
            target, _, _ = _tiny(v, seed)
            law = decoder_law(Models(target), DecodeConfig.make("baseline"))
            worst = max(worst, max_abs_deviation(law, target_law(target, 0)))
    except EnumerationLimit as exc:
        return _skip(name, f"enumeration limit: {exc}")
    return _check(name, worst, 0.0)


def check_mulosd_all_reject(v: VerifySection) -> dict:
    name = "mulosd_all_reject_exactness"
    if v.height % 2 or v.width % 2:
        return _skip(name, "grid not divisible by r=2")
    worst = 0.0
    try:
        for seed in range(v.model_seeds):
            target, _, codebook = _tiny(v, seed)
            drafter = derive_drafter(target, 2, v.noise)
            sampler = build_block_sampler(seed, codebook, 2)
            cfg = DecodeConfig.make("mulosd", k=v.vocab, delta=0.1, tau=1.5, r=2)
            law = decoder_law(Models(target, drafter, sampler, codebook), cfg)
            worst = max(worst, max_abs_deviation(law, target_law(target, 0)))
    except EnumerationLimit as exc:
        return _skip(name, f"enumeration limit: {exc}")
    return _check(name, worst, 1e-9)


def check_relaxed_tvd(v: VerifySection, seed: int = 0) -> dict:
    worst = -1.0
    rng = RandomSource(seed).numpy()
    for _ in range(v.tvd_samples):
        vocab = int(rng.integers(2, 12))
        p = Categorical(rng.dirichlet(np.full(vocab, rng.choice([0.2, 1.0, 5.0]))))
        cb = core.Codebook(rng.normal(size=(vocab, int(rng.integers(1, 4)))))
        center = int(rng.integers(vocab))
        k = int(rng.integers(1, vocab + 1))
        delta = float(rng.uniform())
        nb = build_bounded_neighborhood(p, center, cb, k, delta)
        worst = max(worst, tvd(relaxed_distribution(p, nb), p) - delta)
    return _check("lantern_relaxed_tvd_bound", worst, 1e-12)


def check_lantern_per_step(v: VerifySection) -> dict:
    name = "lantern_per_step_tvd_bound"
    if v.vocab ** (v.height * v.width) > ENUMERATION_LIMIT:
        return _skip(name, "enumeration limit: too many prefixes")
    worst = -1.0
    try:
        for seed in range(v.model_seeds):
            target, drafter, codebook = _tiny(v, seed)
            models = Models(target, drafter, codebook=codebook)
            cfg = DecodeConfig.make("lantern", k=v.vocab, delta=v.delta)
            for pos in range(target.shape.size):
                for prefix in itertools.product(range(v.vocab), repeat=pos):
                    law = per_step_law(models, cfg, prefix, pos)
                    p = target.evaluate(Conditioning(0), prefix, pos)
                    worst = max(worst, tvd(law, p) - v.delta)
    except EnumerationLimit as exc:
        return _skip(name, f"enumeration limit: {exc}")
    return _check(name, worst, 1e-12)


def check_lantern_reductions(v: VerifySection) -> dict:
    mismatches = 0
    for seed in range(v.trace_seeds):
        target, drafter, codebook = _tiny(v, seed % max(v.model_seeds, 1))
        spec = DecodeConfig.make("specdec", window_tokens=v.window)
        _, ref = run_decoder(Models(target, drafter), spec, RandomSource(seed))
        for k, delta in ((1, 0.4), (v.vocab, 0.0)):
            cfg = DecodeConfig.make("lantern", k=k, delta=delta, window_tokens=v.window)
            _, tr = run_decoder(Models(target, drafter, codebook=codebook), cfg, RandomSource(seed))
            mismatches += tr.comparable() != ref.comparable()
    return _check("lantern_reduces_to_specdec", mismatches, 0)


def check_mode_equivalence(v: VerifySection, side: int = 8, vocab: int = 8) -> dict:
    shape = GridShape(side, side)
    target = build_toy_model(0, vocab, shape, 1.0)
    codebook = core.random_codebook(1, vocab, 2)
    models = Models(target, derive_drafter(target, 2, 0.5), build_block_sampler(2, codebook, 2), codebook)
    mismatches = 0
    for seed in range(v.trace_seeds):
        base = dict(k=vocab, delta=0.1, tau=1.0 / vocab, r=2)
        _, big = run_decoder(models, DecodeConfig.make("mulosd", mode=RejectionMode.expand(side), **base),
                             RandomSource(seed))
        _, ras = run_decoder(models, DecodeConfig.make("mulosd", mode=RejectionMode.raster(), **base),
                             RandomSource(seed))
        mismatches += [it.expanded for it in big.iterations] != [it.expanded for it in ras.iterations]
    return _check("expand_large_radius_equals_raster", mismatches, 0)


def check_nfe_identity(v: VerifySection, side: int = 8, vocab: int = 8) -> dict:
    shape = GridShape(side, side)
    target = build_toy_model(0, vocab, shape, 1.0)
    codebook = core.random_codebook(1, vocab, 2)
    models = Models(target, derive_drafter(target, 2, 0.5), build_block_sampler(2, codebook, 2), codebook)
    worst = 0.0
    for seed in range(v.trace_seeds):
        for tau in (0.0, 0.05, 0.1, 0.2, 2.0):
            cfg = DecodeConfig.make("mulosd", k=vocab, delta=0.1, tau=tau, r=2)
            _, tr = run_decoder(models, cfg, RandomSource(seed))
            worst = max(worst, effective_identity_gap(summarize(tr, CostModel.nfe_only())))
    return _check("nfe_speedup_identity", worst, 1e-9)


def brute_force_expansion(rejected, radius, shape: GridShape, window) -> tuple[int, ...]:
    """Direct reading of the neighbourhood-union definition over every cell."""
    start, length = window
    t0 = min(rejected)
    out = []
    for u in range(start, start + length):
        iu, ju = u // shape.width, u % shape.width
        if u >= t0 and any(
            abs(iu - t // shape.width) <= radius and abs(ju - t % shape.width) <= radius
            for t in rejected
        ):
            out.append(u)
    return tuple(out)


def check_geometry(v: VerifySection) -> dict:
    bad = 0
    for h in range(1, v.geometry_max_side + 1):
        for w in range(1, v.geometry_max_side + 1):
            shape = GridShape(h, w)
            window = (0, shape.size)
            for size in (1, 2, 3):
                for rt in itertools.combinations(range(shape.size), size):
                    for radius in range(0, 6):
                        got = expand_rejections(rt, RejectionMode.expand(radius), shape, window)
                        bad += got != brute_force_expansion(rt, radius, shape, window)
    return _check("local_expansion_geometry", bad, 0)


SUITE = (
    check_baseline_identity,
    check_specdec_exactness,
    check_mulosd_all_reject,
    check_relaxed_tvd,
    check_lantern_per_step,
    check_lantern_reductions,
    check_mode_equivalence,
    check_nfe_identity,
    check_geometry,
)


def run_verify(cfg: RunConfig) -> list[dict]:
    return [check(cfg.verify) for check in SUITE]
