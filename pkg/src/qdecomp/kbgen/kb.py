"""In-memory triple store."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator, Union

from qdecomp.comptree import canonical_number, parse_number
from qdecomp.errors import ParseError

CVT_SUFFIX = "#cvt"


@dataclass(frozen=True)
class Literal:
    """A quoted string object."""

    text: str


Value = Union[str, Decimal, Literal]  # str = entity id


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: Value


class KnowledgeBase:
    def __init__(self, triples: Iterable[Triple] = (), cvt: Iterable[str] = ()):
        self.triples: list[Triple] = []
        self.cvt: set[str] = set(cvt)
        self._sp: dict[tuple[str, str], list[Value]] = defaultdict(list)
        self._po: dict[tuple[str, Value], list[str]] = defaultdict(list)
        self._s: dict[str, list[Triple]] = defaultdict(list)
        self._p: dict[str, list[Triple]] = defaultdict(list)
        self._names: dict[str, str] = {}
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> None:
        if t.predicate == "name" and isinstance(t.object, Literal):
            self._names[t.subject] = t.object.text
            return
        self.triples.append(t)
        self._sp[(t.subject, t.predicate)].append(t.object)
        self._po[(t.predicate, t.object)].append(t.subject)
        self._s[t.subject].append(t)
        self._p[t.predicate].append(t)

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def objects(self, subject: str, predicate: str) -> list[Value]:
        return self._sp.get((subject, predicate), [])

    def subjects(self, predicate: str, obj: Value) -> list[str]:
        return self._po.get((predicate, obj), [])

    def outgoing(self, subject: str) -> list[Triple]:
        return self._s.get(subject, [])

    def with_predicate(self, predicate: str) -> list[Triple]:
        return self._p.get(predicate, [])

    def is_entity(self, value: Value) -> bool:
        return isinstance(value, str)

    def is_cvt(self, value: Value) -> bool:
        return isinstance(value, str) and value in self.cvt

    def name(self, value: Value) -> str:
        if isinstance(value, Decimal):
            return canonical_number(value)
        if isinstance(value, Literal):
            return value.text
        return self._names.get(value, value.replace("_", " "))


def _parse_object(text: str, lineno: int) -> tuple[Value, bool]:
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise ParseError(f"unterminated string literal {text!r}", lineno)
        return Literal(text[1:-1]), False
    number = parse_number(text)
    if number is not None:
        return number, False
    if text.endswith(CVT_SUFFIX):
        return text[: -len(CVT_SUFFIX)], True
    return text, False


def load_kb(path: str | Path) -> KnowledgeBase:
    """Read ``subj<TAB>pred<TAB>obj`` lines; ``#`` starts a comment line."""
    kb = KnowledgeBase()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
            subj, pred, obj = parts
            if subj.endswith(CVT_SUFFIX):
                subj = subj[: -len(CVT_SUFFIX)]
                kb.cvt.add(subj)
            value, is_cvt = _parse_object(obj, lineno)
            if is_cvt:
                kb.cvt.add(value)
            kb.add(Triple(subj, pred, value))
    return kb
