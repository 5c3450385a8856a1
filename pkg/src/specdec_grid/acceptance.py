"""Acceptance rules: exact ratio test, pooled ratio test, pooled threshold test."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Categorical, Codebook, ContractError


class Variant(str, Enum):
    EXACT = "exact"
    POOLED_RATIO = "pooled_ratio"
    POOLED_THRESHOLD = "pooled_threshold"


@dataclass(frozen=True)
class AcceptanceRule:
    variant: Variant = Variant.EXACT
    k: int = 1
    delta: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is not Variant.EXACT:
            if self.k < 1:
                raise ValueError(f"neighbourhood size k must be >= 1, got {self.k}")
            if not 0.0 <= self.delta <= 1.0:
                raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")

    def k_for(self, vocab_size: int) -> int:
        return min(self.k, vocab_size)


@dataclass(frozen=True)
class NeighborhoodMass:
    center: int
    members: tuple[int, ...]
    pooled: float
    moved: float


def exact_accept_prob(p: Categorical, q: Categorical, draft: int) -> float:
    qd = q[draft]
    if qd <= 0:
        raise ContractError(f"draft {draft} has zero drafter mass")
    return min(1.0, p[draft] / qd)


def residual_distribution(p: Categorical, q: Categorical) -> Categorical:
    """norm(max(0, p - q)).

    Raises when the positive part is identically zero: then p == q and a
    rejection can never happen, so no caller should ask for it.
    """
    if len(p) != len(q):
        raise ContractError(f"vocabulary mismatch: {len(p)} vs {len(q)}")
    diff = np.maximum(0.0, p.mass - q.mass)
    total = diff.sum()
    if not total > 0.0:
        raise ContractError("degenerate residual: p and q coincide")
    return Categorical(diff / total)


def build_bounded_neighborhood(p: Categorical, center: int, codebook: Codebook, k: int,
                               delta: float) -> NeighborhoodMass:
    """Greedy nearest-first walk over B_k(center).

    A candidate joins when its mass keeps the moved total within ``delta``;
    otherwise it is skipped and the walk continues. Zero-mass candidates are
    skipped since moving them changes nothing.
    """
    if not 1 <= k <= codebook.vocab_size:
        raise ValueError(f"k={k} outside [1, {codebook.vocab_size}]")
    order = codebook.neighbor_order[center, :k]
    mass = p.mass
    members = [center]
    pooled = float(mass[center])
    moved = 0.0
    for x in order[1:]:
        px = float(mass[x])
        if px > 0 and moved + px <= delta:
            members.append(int(x))
            moved += px
            pooled += px
    return NeighborhoodMass(center, tuple(members), pooled, moved)


def relaxed_distribution(p: Categorical, nb: NeighborhoodMass) -> Categorical:
    """p with every member's mass aggregated onto the centre."""
    mass = p.mass.copy()
    mass[list(nb.members)] = 0.0
    mass[nb.center] = nb.pooled
    return Categorical(mass)


def pooled_ratio_accept_prob(p: Categorical, q: Categorical, draft: int,
                             neighborhood: NeighborhoodMass) -> float:
    if neighborhood.center != draft:
        raise ContractError("neighbourhood was not built around the draft")
    qd = q[draft]
    if qd <= 0:
        raise ContractError(f"draft {draft} has zero drafter mass")
    return min(1.0, neighborhood.pooled / qd)


def threshold_accept(p: Categorical, draft: int, neighborhood: NeighborhoodMass,
                     tau: float) -> bool:
    if neighborhood.center != draft:
        raise ContractError("neighbourhood was not built around the draft")
    return neighborhood.pooled >= tau
