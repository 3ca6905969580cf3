"""Answer and decomposition metrics, and dataset-level reports."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from qdecomp.comptree import Answer, AnswerSet, ScoredAnswer
from qdecomp.decomp import Op, Program

METRICS = ("p_at_1", "f1", "seq_exact", "seq_token", "seq_exact_within1", "seq_token_within1")


def _gold_keys(gold: Iterable[Answer | str]) -> set[str]:
    return {(g if isinstance(g, Answer) else Answer(g)).normalized_form for g in gold}


def p_at_1(pred: ScoredAnswer | None, gold: Iterable[Answer | str]) -> int:
    if pred is None:
        return 0
    return int(pred.key in _gold_keys(gold))


def f1(pred: AnswerSet, gold: Iterable[Answer | str]) -> float:
    p, g = pred.keys(), _gold_keys(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    hit = len(p & g)
    if hit == 0:
        return 0.0
    precision, recall = hit / len(p), hit / len(g)
    return 2 * precision * recall / (precision + recall)


def seq_accuracy(pred: Program, gold: Program, slack: int = 0) -> tuple[int, float]:
    """(exact, token fraction) over the three output tokens: operator, i, j."""
    if slack not in (0, 1):
        raise ValueError("slack must be 0 or 1")
    if pred.op is not gold.op:
        return 0, 0.0
    if gold.op is Op.SIMPQA:
        return 1, 1.0
    hits = [abs(pred.i - gold.i) <= slack, abs(pred.j - gold.j) <= slack]
    return int(all(hits)), (1 + sum(hits)) / 3


@dataclass
class EvalRecord:
    question: str
    gold: list[str] | None  # None: a decomposition-only record
    predicted: AnswerSet = field(default_factory=AnswerSet)
    top: ScoredAnswer | None = None
    comp_type: str = ""
    decomposed: bool | None = None
    gold_program: Program | None = None
    pred_program: Program | None = None

    def __post_init__(self) -> None:
        if self.gold is not None and not self.gold:
            raise ValueError("gold answers must be non-empty")
        if self.top is None:
            self.top = self.predicted.top()

    def scores(self) -> dict[str, float]:
        out: dict[str, float] = {}
        if self.gold is not None:
            out["p_at_1"] = float(p_at_1(self.top, self.gold))
            out["f1"] = f1(self.predicted, self.gold)
        if self.gold_program is not None and self.pred_program is not None:
            for slack, suffix in ((0, ""), (1, "_within1")):
                exact, token = seq_accuracy(self.pred_program, self.gold_program, slack)
                out["seq_exact" + suffix] = float(exact)
                out["seq_token" + suffix] = token
        return out


def _means(rows: Sequence[dict[str, float]]) -> dict[str, Any]:
    out: dict[str, Any] = {
        "n": len(rows),
        "n_answer": sum("p_at_1" in r for r in rows),
        "n_seq": sum("seq_exact" in r for r in rows),
    }
    for m in METRICS:
        vals = [r[m] for r in rows if m in r]
        out[m] = sum(vals) / len(vals) if vals else None
    return out


def report(records: Sequence[EvalRecord]) -> dict[str, Any]:
    """Mean of every metric overall and per comp_type; None marks n=0."""
    rows = [r.scores() for r in records]
    by_type: dict[str, list[dict[str, float]]] = defaultdict(list)
    for rec, row in zip(records, rows):
        by_type[rec.comp_type or "unknown"].append(row)
    chosen = [r.decomposed for r in records if r.decomposed is not None]
    return {
        "overall": _means(rows),
        "by_type": {k: _means(v) for k, v in sorted(by_type.items())},
        "decomposition_chosen": sum(chosen) / len(chosen) if chosen else None,
        "n_strategy": len(chosen),
    }


def report_json(summary: dict[str, Any]) -> str:
    return json.dumps(summary, indent=2, sort_keys=True)


def _cell(v: Any) -> str:
    if v is None:
        return "n=0"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def report_table(summary: dict[str, Any]) -> str:
    """Plain-text table, one row per group, columns aligned."""
    header = ["group", "n"] + list(METRICS)
    rows = [header]
    groups = [("overall", summary["overall"])] + list(summary["by_type"].items())
    for name, g in groups:
        rows.append([name, str(g["n"])] + [_cell(g.get(m)) for m in METRICS])
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"decomposition chosen: {_cell(summary['decomposition_chosen'])}")
    return "\n".join(lines)
