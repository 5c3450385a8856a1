import pytest

from specdec_grid.core import GridShape, random_codebook
from specdec_grid.engine import Models
from specdec_grid.models import build_block_sampler, build_toy_model, derive_drafter


def tiny_models(seed=0, vocab=3, side=2, noise=0.5, r=1, temperature=1.0):
    """Target, drafter at 1/r resolution, codebook and (for r > 1) a block sampler."""
    target = build_toy_model(seed, vocab, GridShape(side, side), temperature)
    drafter = derive_drafter(target, r, noise)
    codebook = random_codebook(1000 + seed, vocab, 2)
    sampler = build_block_sampler(500 + seed, codebook, r) if r > 1 else None
    return Models(target, drafter, sampler, codebook)


GATE_LINES: list[str] = []


@pytest.fixture
def gate():
    """Record one pass/fail line for an acceptance criterion and assert it."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        GATE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in GATE_LINES:
            terminalreporter.write_line(line)
