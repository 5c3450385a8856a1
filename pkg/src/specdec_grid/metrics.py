"""NFE accounting, acceptance rates and the abstract cost model."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

from .core import ContractError
from .engine import Counters, DecodeTrace


@dataclass(frozen=True)
class CostModel:
    """Cost units per operation.

    One sequential forward pass costs ``c_seq`` for target and drafter
    alike; a parallel verification call costs ``c_par`` regardless of its
    length; each up/down-sampling call costs ``c_resample_overhead``.
    """

    c_seq: float = 1.0
    c_par: float = 1.0
    c_resample_overhead: float = 0.05

    def __post_init__(self):
        if min(self.c_seq, self.c_par, self.c_resample_overhead) < 0:
            raise ValueError("costs must be non-negative")

    @classmethod
    def nfe_only(cls, c_seq: float = 1.0) -> "CostModel":
        return cls(c_seq, 0.0, 0.0)


@dataclass
class RunSummary:
    config: dict
    n_tokens: int
    acceptance_rate: float
    a_effective: float
    counters: Counters
    simulated_cost: float
    baseline_cost: float
    measured_speedup: float
    theoretical_speedup: float
    cost_fractions: dict = field(default_factory=dict)
    deviation: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "acceptance_rate": self.acceptance_rate,
            "a_effective": self.a_effective,
            "counters": asdict(self.counters),
            "cost_fractions": self.cost_fractions,
            "measured_speedup": self.measured_speedup,
            "theoretical_speedup": self.theoretical_speedup,
            "deviation": self.deviation,
        }


def theoretical_speedup(t_p: int, t_q: int, a: float) -> float:
    """T_p / ((1 - a) T_p + T_q)."""
    if t_p < 1 or t_q < 0 or not 0.0 <= a <= 1.0:
        raise ValueError(f"need T_p >= 1, T_q >= 0, 0 <= a <= 1; got {t_p}, {t_q}, {a}")
    return t_p / ((1.0 - a) * t_p + t_q)


def acceptance_rate(trace: DecodeTrace) -> float:
    drafted = trace.drafted_total
    return trace.accepted_total / drafted if drafted else 0.0


def a_effective(trace: DecodeTrace) -> float:
    """1 - (sequential target samples) / N."""
    return 1.0 - trace.counters.target_seq_nfe / trace.shape.size


def summarize(trace: DecodeTrace, cost: CostModel = CostModel()) -> RunSummary:
    if not trace.complete:
        raise ContractError(f"trace holds {len(trace.tokens)} of {trace.shape.size} tokens")
    c = trace.counters
    n = trace.shape.size
    parts = {
        "draft": cost.c_seq * c.draft_seq_nfe,
        "verify": cost.c_par * c.target_parallel_calls,
        "resample": cost.c_seq * c.target_seq_nfe,
        "samplers": cost.c_resample_overhead * (c.upsample_calls + c.downsample_calls),
    }
    simulated = sum(parts.values())
    baseline = cost.c_seq * n
    fractions = {k: (v / simulated if simulated else 0.0) for k, v in parts.items()}
    a = acceptance_rate(trace)
    summary = RunSummary(
        config=trace.config,
        n_tokens=n,
        acceptance_rate=a,
        a_effective=a_effective(trace),
        counters=Counters(**asdict(c)),
        simulated_cost=simulated,
        baseline_cost=baseline,
        measured_speedup=baseline / simulated,
        theoretical_speedup=theoretical_speedup(n, c.draft_seq_nfe, a),
        cost_fractions=fractions,
    )
    summary.deviation = consistency_check(summary)
    return summary


def consistency_check(summary: RunSummary) -> float:
    """Relative gap between measured and formula speedup (accept-decision a)."""
    return abs(summary.measured_speedup - summary.theoretical_speedup) / summary.theoretical_speedup


def effective_identity_gap(summary: RunSummary) -> float:
    """Relative gap to T_p / ((1 - a_eff) T_p + T_q); zero under the NFE-only cost model."""
    s = theoretical_speedup(summary.n_tokens, summary.counters.draft_seq_nfe, summary.a_effective)
    return abs(summary.measured_speedup - s) / s


CSV_COLUMNS = ["axis", "value", "acc_rate", "a_effective", "speedup_measured",
               "speedup_theoretical", "deviation"]


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in CSV_COLUMNS})
    return buf.getvalue()
