"""Ablation sweeps on the 4x toy (16x16 target, 4x4 drafter): tau with and
without pooling, the three rejection modes, and the expansion radius.

    python3 scripts/ablations.py --out results/ablations --seeds 200
"""

import argparse
import logging
from pathlib import Path

from specdec_grid.config import RunConfig
from specdec_grid.harness import run_sweep
from specdec_grid.metrics import sweep_csv

TAUS = "0,0.01,0.05,0.1,0.1024,0.15,0.2,0.3,0.5,1,2"

SWEEPS = {
    "tau_pooled": ["bench.axis=tau", f"bench.values={TAUS}", "decode.k=16"],
    "tau_unpooled": ["bench.axis=tau", f"bench.values={TAUS}", "decode.k=1"],
    "mode": ["bench.axis=mode"],
    "radius": ["bench.axis=radius", "bench.values=1,3,5"],
    "noise": ["bench.axis=noise"],
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/ablations"))
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", choices=sorted(SWEEPS), action="append")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.only or SWEEPS:
        overrides = SWEEPS[name] + [f"bench.seeds={args.seeds}", f"bench.workers={args.workers}"]
        rows = run_sweep(RunConfig.from_text("", overrides))
        (args.out / f"{name}.csv").write_text(sweep_csv(rows))
        logging.info("%s", name)
        for row in rows:
            logging.info("  %-10s acc %.3f  a_eff %.3f  speedup %.3f",
                         row["value"], row["acc_rate"], row["a_effective"], row["speedup_measured"])


if __name__ == "__main__":
    main()
