"""How far the pooled-acceptance decoder's one-step law drifts from the
target conditional, compared against delta.

Enumerates every prefix of small grids and reports the share of steps whose
drift exceeds delta, plus a hand-built worst case.
"""

import argparse
import itertools

import numpy as np

from specdec_grid.acceptance import build_bounded_neighborhood, pooled_ratio_accept_prob
from specdec_grid.core import Categorical, Codebook, GridShape, random_codebook, tvd
from specdec_grid.engine import DecodeConfig, Models
from specdec_grid.models import Conditioning, build_toy_model, derive_drafter
from specdec_grid.oracle import per_step_law


def sweep(seeds: int, vocab: int, delta: float) -> None:
    steps = over = 0
    worst = 0.0
    for seed, noise, k in itertools.product(range(seeds), (0.25, 0.5, 0.75), (2, vocab)):
        target = build_toy_model(seed, vocab, GridShape(2, 2), 1.0)
        models = Models(target, derive_drafter(target, 1, noise), codebook=random_codebook(1000 + seed, vocab, 2))
        cfg = DecodeConfig.make("lantern", k=k, delta=delta)
        for pos in range(4):
            for prefix in itertools.product(range(vocab), repeat=pos):
                d = tvd(per_step_law(models, cfg, prefix, pos), target.evaluate(Conditioning(0), prefix, pos))
                worst = max(worst, d)
                over += d > delta + 1e-12
                steps += 1
    print(f"2x2 grids, V={vocab}, delta={delta}: {over}/{steps} steps drift beyond delta, worst {worst:.4f}")


def worst_case() -> None:
    # every draft pools the same far-away mass of token 0
    p = Categorical([0.6, 0.1, 0.1, 0.1, 0.1])
    q = Categorical([0.0, 0.25, 0.25, 0.25, 0.25])
    codebook = Codebook(np.array([[10.0], [0.0], [0.1], [0.2], [0.3]]))
    delta = 0.3
    law = np.zeros(5)
    for d in range(1, 5):
        nb = build_bounded_neighborhood(p, d, codebook, 5, delta)
        law[d] += q[d] * pooled_ratio_accept_prob(p, q, d, nb)
    print(f"hand-built case: accept mass {law.sum():.2f}, law {law.round(3).tolist()}, "
          f"tvd to p {tvd(Categorical(law / law.sum()), p):.2f} vs delta {delta}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--vocab", type=int, default=4)
    ap.add_argument("--delta", type=float, default=0.2)
    args = ap.parse_args()
    sweep(args.seeds, args.vocab, args.delta)
    worst_case()
