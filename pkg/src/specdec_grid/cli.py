"""``specdec-grid <command> --config <path> [--out <dir>] [--set key=value ...]``

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .config import RunConfig
from .core import ContractError, RandomSource
from .engine import ConfigError, run_decoder
from .metrics import summarize, sweep_csv

log = logging.getLogger("specdec_grid")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def cmd_gen_models(cfg: RunConfig, out: Path) -> int:
    assets = harness.build_assets(cfg.model)
    try:
        paths = harness.write_assets(assets, out)
    except OSError as exc:
        raise OSError(f"cannot write assets to {out}: {exc.strerror or exc}") from exc
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_decode(cfg: RunConfig, out: Path) -> int:
    decode = cfg.decode_config()
    try:
        assets = harness.read_assets(out, cfg.model.noise)
    except FileNotFoundError as exc:
        raise OSError(f"missing asset {exc.filename}; run gen-models first") from exc
    models = assets.models(decode)
    _, trace = run_decoder(models, decode, RandomSource(decode.seed))
    summary = summarize(trace, cfg.cost_model()).to_dict()
    summary["config"] = {"run": cfg.to_dict(), "decode": decode.to_dict()}
    trace_doc = trace.to_dict()
    trace_doc["config"] = summary["config"]
    _write(out / "trace.json", _dump(trace_doc))
    _write(out / "summary.json", _dump(summary))
    log.info("acceptance %.4f  speedup %.4f", summary["acceptance_rate"], summary["measured_speedup"])
    return EXIT_OK


def cmd_bench(cfg: RunConfig, out: Path) -> int:
    rows = harness.run_sweep(cfg)
    name = f"bench_{cfg.bench.axis}"
    _write(out / f"{name}.csv", sweep_csv(rows))
    _write(out / f"{name}.json", _dump({"config": cfg.to_dict(), "rows": rows}))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    results = harness.run_verify(cfg)
    _write(out / "verify.json", _dump({"config": cfg.to_dict(), "checks": results}))
    for r in results:
        log.info("%-36s %s", r["check"], r["status"].upper())
    return EXIT_CHECK if any(r["status"] == "fail" for r in results) else EXIT_OK


COMMANDS = {
    "gen-models": cmd_gen_models,
    "decode": cmd_decode,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specdec-grid", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, default=None, help="INI-style run config")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output / asset directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE")
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = RunConfig.load(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args.out)
    except (ConfigError, ContractError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
