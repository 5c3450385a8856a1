"""Exact output laws by brute-force enumeration.

``target_law`` multiplies conditionals along raster order. ``decoder_law``
runs the engine's own window-step functions under a chooser that explores
every random decision (draft draws, accept coins, residual draws and
resamples) as a weighted branch, and merges branches that reach the same
finalized prefix.
"""

from __future__ import annotations

from collections import defaultdict

from .core import Categorical, ContractError
from .engine import DecodeConfig, DecodeTrace, Decoder, Models, check_models, window_step
from .models import Conditioning

ENUMERATION_LIMIT = 10**6

GridDistribution = dict  # tuple of raster tokens -> probability


class EnumerationLimit(ContractError):
    """The instance is too large to enumerate exactly."""


def target_law(model, conditioning, limit: int = ENUMERATION_LIMIT) -> GridDistribution:
    v, n = model.vocab_size, model.shape.size
    if v**n > limit:
        raise EnumerationLimit(f"V^N = {v}^{n} exceeds enumeration limit {limit}")
    cond = conditioning if isinstance(conditioning, Conditioning) else Conditioning(int(conditioning))
    law: dict[tuple[int, ...], float] = {(): 1.0}
    for t in range(n):
        nxt = {}
        for prefix, w in law.items():
            p = model.evaluate(cond, prefix, t)
            for x in range(v):
                if p.mass[x] > 0:
                    nxt[prefix + (x,)] = w * float(p.mass[x])
        law = nxt
    return law


class _Replay:
    """Chooser that follows a scripted choice list, then takes the first
    option at every new choice point and remembers the alternatives."""

    def __init__(self, script: list):
        self.script = script
        self.taken: list = []
        self.branches: list[tuple[int, list]] = []
        self.weight = 1.0

    def _choose(self, options: list[tuple[object, float]]):
        depth = len(self.taken)
        if depth < len(self.script):
            value = self.script[depth]
            weight = dict(options)[value]
        else:
            value, weight = options[0]
            if len(options) > 1:
                self.branches.append((depth, [v for v, _ in options[1:]]))
        self.taken.append(value)
        self.weight *= weight
        return value

    def categorical(self, dist: Categorical) -> int:
        mass = dist.mass
        return self._choose([(x, float(mass[x])) for x in dist.support])

    def bernoulli(self, prob: float) -> bool:
        options = [(v, w) for v, w in ((True, prob), (False, 1.0 - prob)) if w > 0]
        return self._choose(options)


def enumerate_step(step, cond, prefix: tuple[int, ...], trace_factory, limit: int):
    """All outcomes of one window step from ``prefix`` as {new prefix: weight}.

    Returns (outcomes, branch count).
    """
    out: dict[tuple[int, ...], float] = defaultdict(float)
    stack: list[list] = [[]]
    leaves = 0
    while stack:
        script = stack.pop()
        chooser = _Replay(script)
        tokens = list(prefix)
        step(cond, tokens, chooser, trace_factory())
        leaves += 1
        if leaves > limit:
            raise EnumerationLimit(f"more than {limit} branches in one step")
        if chooser.weight > 0:
            out[tuple(tokens)] += chooser.weight
        for depth, alts in chooser.branches:
            head = chooser.taken[:depth]
            stack.extend(head + [v] for v in alts)
    return dict(out), leaves


def decoder_law(models: Models, config: DecodeConfig,
                limit: int = ENUMERATION_LIMIT) -> GridDistribution:
    """Exact law of the decoder's final grid."""
    target = models.target
    v, n = target.vocab_size, target.shape.size
    if v**n > limit:
        raise EnumerationLimit(f"V^N = {v}^{n} exceeds enumeration limit {limit}")
    check_models(models, config)
    step = window_step(models, config)
    cond = Conditioning(config.conditioning)

    def trace_factory():
        return DecodeTrace({}, target.shape, config.r)

    frontier: dict[tuple[int, ...], float] = {(): 1.0}
    done: dict[tuple[int, ...], float] = defaultdict(float)
    branches = 0
    while frontier:
        nxt: dict[tuple[int, ...], float] = defaultdict(float)
        # deterministic processing order keeps results reproducible bit-for-bit
        for prefix in sorted(frontier, key=lambda p: (len(p), p)):
            w = frontier[prefix]
            outcomes, leaves = enumerate_step(step, cond, prefix, trace_factory, limit)
            branches += leaves
            if branches > limit:
                raise EnumerationLimit(f"more than {limit} weighted branches")
            for new, wt in outcomes.items():
                target_map = done if len(new) == n else nxt
                target_map[new] += w * wt
        frontier = dict(nxt)
    return dict(done)


def per_step_law(models: Models, config: DecodeConfig, prefix, position: int,
                 limit: int = ENUMERATION_LIMIT) -> Categorical:
    """Law of the token the decoder emits at ``position`` when a window opens
    there after ``prefix``.

    Single-scale decoders only: for speculative ones this is a one-token
    draft window.
    """
    prefix = tuple(prefix)[:position]
    if len(prefix) != position:
        raise ContractError(f"prefix of length {len(prefix)} does not reach position {position}")
    if config.decoder is Decoder.MULOSD:
        raise ValueError("per-step laws are defined for baseline, specdec and lantern decoders")
    if config.decoder is not Decoder.BASELINE:
        config = DecodeConfig(**{**config.__dict__, "window_tokens": 1})
    check_models(models, config)
    step = window_step(models, config)
    cond = Conditioning(config.conditioning)
    outcomes, _ = enumerate_step(
        step, cond, prefix, lambda: DecodeTrace({}, models.target.shape, config.r), limit
    )
    mass = [0.0] * models.target.vocab_size
    for new, w in outcomes.items():
        mass[new[position]] += w
    return Categorical(mass)


def max_abs_deviation(a: GridDistribution, b: GridDistribution) -> float:
    keys = set(a) | set(b)
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys), default=0.0)


def total_mass(law: GridDistribution) -> float:
    return sum(law.values())
