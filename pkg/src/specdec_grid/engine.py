"""Decoding loops: sequential baseline, speculative decoding, pooled
(LANTERN-style) speculative decoding and multi-scale local speculative
decoding.

Every loop is ``while len(tokens) < N: step(...)`` over a window-step
function. The oracle drives the same step functions with an enumerating
chooser, so anything that touches randomness goes through ``rng``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

from . import acceptance as acc
from .acceptance import AcceptanceRule, Variant
from .core import Categorical, Chooser, Codebook, GridShape, RNG_ALGORITHM, TokenGrid
from .locality import RejectionMode, expand_rejections
from .models import Conditioning, ToyBlockSampler, ToyMarkovModel, down_sample, up_sample


class ConfigError(ValueError):
    """Decoder, models and parameters do not fit together."""


class Decoder(str, Enum):
    BASELINE = "baseline"
    SPECDEC = "specdec"
    LANTERN = "lantern"
    MULOSD = "mulosd"


_RULE_FOR = {
    Decoder.SPECDEC: Variant.EXACT,
    Decoder.LANTERN: Variant.POOLED_RATIO,
    Decoder.MULOSD: Variant.POOLED_THRESHOLD,
}


@dataclass(frozen=True)
class DecodeConfig:
    decoder: Decoder = Decoder.MULOSD
    rule: AcceptanceRule = field(default_factory=AcceptanceRule)
    mode: RejectionMode = field(default_factory=lambda: RejectionMode.expand(3))
    r: int = 2
    draft_window_rows: int = 1
    # draft length for the single-scale decoders
    window_tokens: int = 4
    seed: int = 0
    conditioning: int = 0

    def __post_init__(self):
        object.__setattr__(self, "decoder", Decoder(self.decoder))
        want = _RULE_FOR.get(self.decoder)
        if want is not None and self.rule.variant is not want:
            raise ConfigError(f"{self.decoder.value} needs a {want.value} rule, got {self.rule.variant.value}")
        if self.decoder is Decoder.MULOSD:
            if self.r < 2:
                raise ConfigError(f"mulosd needs r >= 2, got r={self.r}")
            if self.draft_window_rows < 1:
                raise ConfigError("draft_window_rows must be >= 1")
        elif self.decoder in (Decoder.SPECDEC, Decoder.LANTERN):
            if self.r != 1:
                raise ConfigError(f"{self.decoder.value} drafts at target resolution; r must be 1, got {self.r}")
            if self.window_tokens < 1:
                raise ConfigError("window_tokens must be >= 1")

    @classmethod
    def make(cls, decoder, *, k: int = 1, delta: float = 0.0, tau: float = 0.0, **kw) -> "DecodeConfig":
        decoder = Decoder(decoder)
        rule = AcceptanceRule(_RULE_FOR.get(decoder, Variant.EXACT), k, delta, tau)
        if decoder is not Decoder.MULOSD:
            kw.setdefault("r", 1)
        return cls(decoder=decoder, rule=rule, **kw)

    def to_dict(self) -> dict:
        return {
            "decoder": self.decoder.value,
            "rule": {"variant": self.rule.variant.value, "k": self.rule.k,
                     "delta": self.rule.delta, "tau": self.rule.tau},
            "mode": {"kind": self.mode.kind.value, "radius": self.mode.radius},
            "r": self.r,
            "draft_window_rows": self.draft_window_rows,
            "window_tokens": self.window_tokens,
            "seed": self.seed,
            "conditioning": self.conditioning,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeConfig":
        d = dict(d)
        d["rule"] = AcceptanceRule(**d["rule"])
        d["mode"] = RejectionMode(**d["mode"])
        return cls(**d)


@dataclass
class Counters:
    draft_seq_nfe: int = 0
    target_seq_nfe: int = 0
    target_parallel_calls: int = 0
    downsample_calls: int = 0
    upsample_calls: int = 0


@dataclass
class IterationRecord:
    window_start: int
    window_len: int  # positions finalized by this iteration
    drafted: list[int]
    draft_tokens: list[int]
    accepted: list[bool]  # verifier decisions, in drafted order
    accept_probs: Optional[list[float]]
    rejected: list[int]  # R_T
    expanded: list[int]  # R_X (positions resampled or discarded)
    resampled: list[tuple[int, int]]  # (position, token)


@dataclass
class DecodeTrace:
    config: dict
    shape: GridShape
    r: int = 1
    iterations: list[IterationRecord] = field(default_factory=list)
    counters: Counters = field(default_factory=Counters)
    tokens: list[int] = field(default_factory=list)
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def complete(self) -> bool:
        return len(self.tokens) == self.shape.size

    @property
    def grid(self) -> TokenGrid:
        return TokenGrid(self.shape, tuple(self.tokens))

    @property
    def drafted_total(self) -> int:
        return sum(len(it.drafted) for it in self.iterations)

    @property
    def accepted_total(self) -> int:
        return sum(sum(it.accepted) for it in self.iterations)

    @property
    def expanded_total(self) -> int:
        return sum(len(it.expanded) for it in self.iterations)

    def comparable(self) -> tuple:
        """Everything except the config echo; used for trace-identity checks."""
        return ([asdict(it) for it in self.iterations], asdict(self.counters), list(self.tokens))

    def to_dict(self) -> dict:
        grid = self.grid
        return {
            "config": self.config,
            "rng_algorithm": self.rng_algorithm,
            "shape": [self.shape.height, self.shape.width],
            "r": self.r,
            "iterations": [
                {
                    "window_start": it.window_start,
                    "window_len": it.window_len,
                    "drafted": it.drafted,
                    "draft_tokens": it.draft_tokens,
                    "accepted": it.accepted,
                    "accept_probs": it.accept_probs,
                    "rejected": it.rejected,
                    "expanded": it.expanded,
                    "resampled": [list(x) for x in it.resampled],
                }
                for it in self.iterations
            ],
            "counters": asdict(self.counters),
            "grid": grid.rows(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeTrace":
        shape = GridShape(*d["shape"])
        its = [IterationRecord(**{**it, "resampled": [tuple(x) for x in it["resampled"]]})
               for it in d["iterations"]]
        tokens = [t for row in d["grid"] for t in row]
        return cls(d["config"], shape, d["r"], its, Counters(**d["counters"]), tokens,
                   d.get("rng_algorithm", RNG_ALGORITHM))


@dataclass(frozen=True)
class Models:
    """The model bundle a decoder needs; unused slots may be None."""

    target: ToyMarkovModel
    drafter: Optional[ToyMarkovModel] = None
    sampler: Optional[ToyBlockSampler] = None
    codebook: Optional[Codebook] = None
    downsampler: Optional[ToyBlockSampler] = None

    @property
    def down(self):
        return self.downsampler if self.downsampler is not None else self.sampler


# -- window steps --------------------------------------------------------------

def _baseline_step(target, cond, tokens: list[int], rng: Chooser, trace: DecodeTrace) -> None:
    p = target.evaluate(cond, tokens, len(tokens))
    tokens.append(rng.categorical(p))
    trace.counters.target_seq_nfe += 1


def _speculative_step(models: Models, config: DecodeConfig, cond, tokens: list[int],
                      rng: Chooser, trace: DecodeTrace) -> None:
    """Draft a window, verify it in one call, keep the accepted run, replace
    the first rejection from the residual, discard the rest."""
    target, drafter = models.target, models.drafter
    n = len(tokens)
    length = min(config.window_tokens, target.shape.size - n)
    work = list(tokens)
    qs: list[Categorical] = []
    for i in range(length):
        q = drafter.evaluate(cond, work, n + i)
        qs.append(q)
        work.append(rng.categorical(q))
    trace.counters.draft_seq_nfe += length
    drafts = work[n:]

    ps = [target.evaluate(cond, work, n + i) for i in range(length)]
    trace.counters.target_parallel_calls += 1

    lantern = config.decoder is Decoder.LANTERN
    if lantern:
        k = config.rule.k_for(target.vocab_size)
    accepted: list[bool] = []
    probs: list[float] = []
    rejected: list[int] = []
    resampled: list[tuple[int, int]] = []
    for i in range(length):
        p, q, d = ps[i], qs[i], drafts[i]
        if lantern:
            nb = acc.build_bounded_neighborhood(p, d, models.codebook, k, config.rule.delta)
            prob = acc.pooled_ratio_accept_prob(p, q, d, nb)
        else:
            prob = acc.exact_accept_prob(p, q, d)
        probs.append(prob)
        ok = rng.bernoulli(prob)
        accepted.append(ok)
        if ok:
            tokens.append(d)
            continue
        base = acc.relaxed_distribution(p, nb) if lantern else p
        tok = rng.categorical(acc.residual_distribution(base, q))
        tokens.append(tok)
        rejected.append(n + i)
        resampled.append((n + i, tok))
        break

    trace.iterations.append(IterationRecord(
        window_start=n,
        window_len=len(tokens) - n,
        drafted=list(range(n, n + length)),
        draft_tokens=drafts,
        accepted=accepted,
        accept_probs=probs,
        rejected=rejected,
        expanded=list(range(rejected[0], n + length)) if rejected else [],
        resampled=resampled,
    ))


def _mulosd_step(models: Models, config: DecodeConfig, cond, tokens: list[int],
                 rng: Chooser, trace: DecodeTrace) -> None:
    target, drafter, sampler = models.target, models.drafter, models.sampler
    big_w = target.shape.width
    low_h, low_w = drafter.shape.height, drafter.shape.width
    n = len(tokens)
    ctr = trace.counters

    # 7: down-sample the finalized prefix
    if n:
        rows = [tokens[i : i + big_w] for i in range(0, n, big_w)]
        low = down_sample(models.down, rows)
        ctr.downsample_calls += 1
    else:
        low = []
    low_n = len(low)

    # 1: draft complete low-res rows
    n_rows = min(config.draft_window_rows, low_h - low_n // low_w)
    for t in range(low_n, low_n + n_rows * low_w):
        low.append(rng.categorical(drafter.evaluate(cond, low, t)))
    ctr.draft_seq_nfe += n_rows * low_w
    low_rows = [low[i : i + low_w] for i in range(low_n, len(low), low_w)]

    # 2: up-sample
    drafts = up_sample(sampler, low_rows, tokens, low_width=low_w)
    ctr.upsample_calls += 1
    length = len(drafts)
    work = tokens + drafts

    # 3: one parallel verification call
    ps = [target.evaluate(cond, work, n + i) for i in range(length)]
    ctr.target_parallel_calls += 1

    # 4: threshold test on pooled mass
    k = config.rule.k_for(target.vocab_size)
    accepted = []
    for i in range(length):
        nb = acc.build_bounded_neighborhood(ps[i], drafts[i], models.codebook, k, config.rule.delta)
        accepted.append(acc.threshold_accept(ps[i], drafts[i], nb, config.rule.tau))
    rejected = [n + i for i, ok in enumerate(accepted) if not ok]

    # 5-6: expand, then resample sequentially on the hybrid prefix
    expanded: tuple[int, ...] = ()
    resampled = []
    if rejected:
        expanded = expand_rejections(rejected, config.mode, target.shape, (n, length))
        for u in expanded:
            tok = rng.categorical(target.evaluate(cond, work, u))
            work[u] = tok
            resampled.append((u, tok))
        ctr.target_seq_nfe += len(expanded)
    tokens[n:] = work[n:]

    trace.iterations.append(IterationRecord(
        window_start=n,
        window_len=length,
        drafted=list(range(n, n + length)),
        draft_tokens=list(drafts),
        accepted=accepted,
        accept_probs=None,
        rejected=rejected,
        expanded=list(expanded),
        resampled=resampled,
    ))


# -- validation ------------------------------------------------------------------

def check_models(models: Models, config: DecodeConfig) -> None:
    target = models.target
    if config.decoder is Decoder.BASELINE:
        return
    drafter = models.drafter
    if drafter is None:
        raise ConfigError(f"{config.decoder.value} needs a drafter")
    if drafter.vocab_size != target.vocab_size:
        raise ConfigError("drafter and target vocabularies differ")
    r = config.r
    h, w = target.shape.height, target.shape.width
    if h % r or w % r:
        raise ConfigError(f"target grid {h}x{w} is not divisible by r={r}")
    if drafter.shape != GridShape(h // r, w // r):
        raise ConfigError(f"drafter grid {drafter.shape} does not match target/r for r={r}")
    if config.decoder in (Decoder.LANTERN, Decoder.MULOSD) and models.codebook is None:
        raise ConfigError(f"{config.decoder.value} needs a codebook")
    if config.decoder is Decoder.MULOSD:
        if models.sampler is None:
            raise ConfigError("mulosd needs an up/down-sampler")
        if models.sampler.r != r or models.down.r != r:
            raise ConfigError(f"sampler factor does not match r={r}")
        if models.codebook.vocab_size != target.vocab_size:
            raise ConfigError("codebook size differs from the vocabulary")


def window_step(models: Models, config: DecodeConfig):
    """The step function for ``config.decoder``; signature (cond, tokens, rng, trace)."""
    if config.decoder is Decoder.BASELINE:
        return lambda cond, tokens, rng, trace: _baseline_step(models.target, cond, tokens, rng, trace)
    if config.decoder is Decoder.MULOSD:
        return lambda cond, tokens, rng, trace: _mulosd_step(models, config, cond, tokens, rng, trace)
    return lambda cond, tokens, rng, trace: _speculative_step(models, config, cond, tokens, rng, trace)


def run_decoder(models: Models, config: DecodeConfig, rng: Chooser) -> tuple[TokenGrid, DecodeTrace]:
    check_models(models, config)
    step = window_step(models, config)
    cond = Conditioning(config.conditioning)
    trace = DecodeTrace(config.to_dict(), models.target.shape, config.r)
    tokens: list[int] = []
    n_total = models.target.shape.size
    while len(tokens) < n_total:
        step(cond, tokens, rng, trace)
    trace.tokens = tokens
    return trace.grid, trace


# -- public entry points ------------------------------------------------------------

def decode_baseline(target: ToyMarkovModel, conditioning, rng: Chooser):
    cond = conditioning.seed_token if isinstance(conditioning, Conditioning) else int(conditioning)
    config = DecodeConfig.make(Decoder.BASELINE, conditioning=cond)
    return run_decoder(Models(target), config, rng)


def decode_specdec(target, drafter, config: DecodeConfig, rng: Chooser):
    if config.decoder is not Decoder.SPECDEC:
        raise ConfigError(f"decode_specdec given a {config.decoder.value} config")
    return run_decoder(Models(target, drafter), config, rng)


def decode_lantern(target, drafter, codebook: Codebook, config: DecodeConfig, rng: Chooser):
    if config.decoder is not Decoder.LANTERN:
        raise ConfigError(f"decode_lantern given a {config.decoder.value} config")
    return run_decoder(Models(target, drafter, codebook=codebook), config, rng)


def decode_mulosd(target, drafter, upsampler: ToyBlockSampler, downsampler: ToyBlockSampler,
                  config: DecodeConfig, rng: Chooser, codebook: Codebook | None = None):
    if config.decoder is not Decoder.MULOSD:
        raise ConfigError(f"decode_mulosd given a {config.decoder.value} config")
    codebook = codebook if codebook is not None else upsampler.codebook
    return run_decoder(Models(target, drafter, upsampler, codebook, downsampler), config, rng)

