"""Conjunctive queries (a SPARQL subset) and their execution."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Any, Iterator

from qdecomp.comptree import Answer, AnswerSet, ScoredAnswer
from qdecomp.errors import ParseError, UnboundOrderVariable
from qdecomp.kbgen.kb import KnowledgeBase, Literal, Value


def is_var(term: Any) -> bool:
    return isinstance(term, str) and term.startswith("?")


@dataclass(frozen=True)
class Pattern:
    s: Any
    p: str
    o: Any

    def variables(self) -> set[str]:
        return {t for t in (self.s, self.o) if is_var(t)}


@dataclass(frozen=True)
class Order:
    var: str
    descending: bool = True


@dataclass(frozen=True)
class Filter:
    var: str
    op: str  # "<" or ">"
    value: Decimal

    def holds(self, x: Value) -> bool:
        if not isinstance(x, Decimal):
            return False
        return x < self.value if self.op == "<" else x > self.value


@dataclass(frozen=True)
class ConjunctiveQuery:
    patterns: tuple[Pattern, ...]
    answer_var: str = "?x"
    order: Order | None = None
    filter: Filter | None = None

    def __post_init__(self) -> None:
        if not self.patterns:
            raise ValueError("a query needs at least one pattern")
        variables = self.variables()
        if self.answer_var not in variables:
            raise ValueError(f"answer variable {self.answer_var} appears in no pattern")
        # every variable must be reachable from the answer variable
        reached, frontier = {self.answer_var}, [self.answer_var]
        while frontier:
            v = frontier.pop()
            for pat in self.patterns:
                vs = pat.variables()
                if v in vs:
                    for w in vs - reached:
                        reached.add(w)
                        frontier.append(w)
        if reached != variables:
            raise ValueError(f"variables {sorted(variables - reached)} are disconnected from {self.answer_var}")
        if self.filter is not None and self.filter.op not in ("<", ">"):
            raise ValueError(f"unsupported filter operator {self.filter.op!r}")

    def variables(self) -> set[str]:
        out: set[str] = set()
        for p in self.patterns:
            out |= p.variables()
        return out

    def entities(self) -> set[str]:
        return {t for p in self.patterns for t in (p.s, p.o) if isinstance(t, str) and not is_var(t)}

    def fresh_var(self, stem: str) -> str:
        used = self.variables()
        k = 1
        while f"?{stem}{k}" in used:
            k += 1
        return f"?{stem}{k}"

    def extend(self, *patterns: Pattern, order: Order | None = None, filter: Filter | None = None) -> "ConjunctiveQuery":
        return replace(
            self,
            patterns=self.patterns + tuple(patterns),
            order=order if order is not None else self.order,
            filter=filter if filter is not None else self.filter,
        )

    def substitute(self, entity: str, var: str) -> "ConjunctiveQuery":
        def sub(t):
            return var if t == entity else t

        return replace(self, patterns=tuple(Pattern(sub(p.s), p.p, sub(p.o)) for p in self.patterns))

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        def term(t):
            if isinstance(t, Decimal):
                return int(t) if t == t.to_integral_value() else float(t)
            if isinstance(t, Literal):
                return {"str": t.text}
            return t

        return {
            "select": self.answer_var,
            "where": [[term(p.s), p.p, term(p.o)] for p in self.patterns],
            "order": None if self.order is None else {
                "var": self.order.var,
                "dir": "DESC" if self.order.descending else "ASC",
            },
            "filter": None if self.filter is None else {
                "var": self.filter.var,
                "op": self.filter.op,
                "value": term(self.filter.value),
            },
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ConjunctiveQuery":
        def term(t):
            if isinstance(t, bool):
                raise ParseError("boolean terms are not supported")
            if isinstance(t, (int, float)):
                return Decimal(str(t))
            if isinstance(t, dict):
                return Literal(t["str"])
            return t

        try:
            patterns = tuple(Pattern(term(s), p, term(o)) for s, p, o in obj["where"])
            order = None
            if obj.get("order"):
                order = Order(obj["order"]["var"], obj["order"]["dir"].upper() == "DESC")
            flt = None
            if obj.get("filter"):
                f = obj["filter"]
                flt = Filter(f["var"], f["op"], Decimal(str(f["value"])))
            return cls(patterns, obj.get("select", "?x"), order, flt)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed query: {exc}") from exc

    def __str__(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _match(kb: KnowledgeBase, patterns: list[Pattern], binding: dict[str, Value]) -> Iterator[dict[str, Value]]:
    if not patterns:
        yield dict(binding)
        return
    # most-bound pattern first keeps the join small
    def boundness(p: Pattern) -> int:
        return sum(1 for t in (p.s, p.o) if not is_var(t) or t in binding)

    idx = max(range(len(patterns)), key=lambda k: boundness(patterns[k]))
    pat, rest = patterns[idx], patterns[:idx] + patterns[idx + 1 :]
    s = binding.get(pat.s, pat.s) if is_var(pat.s) else pat.s
    o = binding.get(pat.o, pat.o) if is_var(pat.o) else pat.o
    s_free, o_free = is_var(s), is_var(o)
    if not s_free and not o_free:
        if o in kb.objects(s, pat.p):
            yield from _match(kb, rest, binding)
        return
    if not s_free:
        candidates = [(s, v) for v in kb.objects(s, pat.p)]
    elif not o_free:
        candidates = [(v, o) for v in kb.subjects(pat.p, o)]
    else:
        candidates = [(t.subject, t.object) for t in kb.with_predicate(pat.p)]
    for sv, ov in candidates:
        new = dict(binding)
        if s_free:
            new[s] = sv
        if o_free:
            if s_free and s == o and sv != ov:
                continue
            new[o] = ov
        yield from _match(kb, rest, new)


def _sort_key(v: Value) -> tuple:
    if isinstance(v, Decimal):
        return (0, v, "")
    if isinstance(v, Literal):
        return (1, Decimal(0), v.text)
    return (2, Decimal(0), v)


def execute_values(query: ConjunctiveQuery, kb: KnowledgeBase) -> set[Value]:
    """Distinct values of the answer variable (entity ids, numbers or literals)."""
    variables = query.variables()
    if query.order is not None and query.order.var not in variables:
        raise UnboundOrderVariable(f"ORDER BY variable {query.order.var} is not bound by any pattern")
    if query.filter is not None and query.filter.var not in variables:
        raise UnboundOrderVariable(f"FILTER variable {query.filter.var} is not bound by any pattern")
    rows = list(_match(kb, list(query.patterns), {}))
    if query.filter is not None:
        rows = [r for r in rows if query.filter.holds(r[query.filter.var])]
    if query.order is not None:
        var = query.order.var
        rows = [r for r in rows if isinstance(r[var], Decimal)]
        if not rows:
            return set()
        sign = -1 if query.order.descending else 1
        rows.sort(key=lambda r: (sign * r[var], _sort_key(r[query.answer_var])))
        rows = rows[:1]
    return {r[query.answer_var] for r in rows}


def execute(query: ConjunctiveQuery, kb: KnowledgeBase) -> AnswerSet:
    out = AnswerSet()
    for v in execute_values(query, kb):
        value = v if isinstance(v, Decimal) else kb.name(v)
        out.add(ScoredAnswer(Answer(value), 1.0))
    return out
