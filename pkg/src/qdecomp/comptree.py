"""Answers, answer sets and computation trees.

A computation tree has string leaves and function nodes (SIMPQA, COMP, CONJ,
ADD). Evaluating a tree recursively applies each node's function to the
denotations of its children; SIMPQA calls out to a QA backend.
"""
from __future__ import annotations

import math
import re
import string
from concurrent.futures import Executor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Iterator, Union

from qdecomp.errors import (
    BackendError,
    EmptyQuestion,
    InvalidTree,
    MissingVar,
    MultipleVar,
    NonNumeric,
    NonSingleton,
)

if TYPE_CHECKING:
    from qdecomp.backend import QaBackend

VAR = "VAR"

_WS = re.compile(r"\s+")
_VAR_TOKEN = re.compile(r"(?<![A-Za-z0-9_])VAR(?![A-Za-z0-9_])")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)")
_SIX_PLACES = Decimal("0.000001")
_PUNCT = string.punctuation + "‘’“”"

Number = Union[int, float, Decimal]


def canonical_number(value: Number) -> str:
    """Render a number as a decimal string with at most six fractional digits."""
    if isinstance(value, float):
        if not math.isfinite(value):
            raise NonNumeric(f"non-finite number {value!r}")
        value = Decimal(repr(value))
    d = Decimal(value).quantize(_SIX_PLACES)
    if d == 0:
        return "0"
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def parse_number(text: str) -> Decimal | None:
    text = text.strip()
    if not _NUMBER.fullmatch(text):
        return None
    try:
        return Decimal(text)
    except InvalidOperation:  # pragma: no cover - regex already guards this
        return None


def normalize_text(text: str) -> str:
    """Lower-case, collapse whitespace, strip surrounding punctuation.

    Strings that read as plain decimal numbers get the canonical numeric
    rendering so that ``"7"``, ``"7.0"`` and ``7`` all compare equal.
    """
    number = parse_number(text)
    if number is not None:
        return canonical_number(number)
    text = _WS.sub(" ", text.lower()).strip()
    text = text.strip(_PUNCT + " ")
    number = parse_number(text)
    if number is not None:
        return canonical_number(number)
    return text


@dataclass(frozen=True)
class Answer:
    value: str | Decimal

    def __post_init__(self) -> None:
        if isinstance(self.value, bool):
            raise TypeError("boolean answers are not supported")
        if isinstance(self.value, (int, float)):
            object.__setattr__(self, "value", Decimal(canonical_number(self.value)))

    @property
    def is_number(self) -> bool:
        return isinstance(self.value, Decimal)

    @property
    def normalized_form(self) -> str:
        if isinstance(self.value, Decimal):
            return canonical_number(self.value)
        return normalize_text(self.value)

    @property
    def surface(self) -> str:
        """The string substituted for ``VAR`` and shown to users."""
        if isinstance(self.value, Decimal):
            return canonical_number(self.value)
        return self.value

    def as_number(self) -> Decimal:
        if isinstance(self.value, Decimal):
            return self.value
        number = parse_number(self.value)
        if number is None:
            raise NonNumeric(f"answer {self.value!r} is not a number")
        return number

    def to_json(self) -> str | int | float:
        if isinstance(self.value, Decimal):
            return int(self.value) if self.value == self.value.to_integral_value() else float(self.value)
        return self.value


@dataclass(frozen=True)
class ScoredAnswer:
    answer: Answer
    score: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"answer score must be finite, got {self.score!r}")

    @classmethod
    def of(cls, value: str | Number, score: float = 0.0) -> "ScoredAnswer":
        return cls(Answer(value), float(score))

    @property
    def key(self) -> str:
        return self.answer.normalized_form


class AnswerSet:
    """Scored answers keyed by normalized form.

    Adding an answer whose normalized form is already present keeps the higher
    score (and that side's surface string).
    """

    def __init__(self, members: Iterable[ScoredAnswer] = ()):
        self._members: dict[str, ScoredAnswer] = {}
        for m in members:
            self.add(m)

    @classmethod
    def of(cls, *items: str | Number | tuple[str | Number, float]) -> "AnswerSet":
        out = cls()
        for item in items:
            if isinstance(item, tuple):
                out.add(ScoredAnswer.of(item[0], item[1]))
            else:
                out.add(ScoredAnswer.of(item))
        return out

    def add(self, member: ScoredAnswer) -> None:
        current = self._members.get(member.key)
        if current is None or member.score > current.score:
            self._members[member.key] = member

    def update(self, other: Iterable[ScoredAnswer]) -> None:
        for m in other:
            self.add(m)

    def __iter__(self) -> Iterator[ScoredAnswer]:
        return iter(sorted(self._members.values(), key=lambda m: m.key))

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, item: object) -> bool:
        if isinstance(item, ScoredAnswer):
            return item.key in self._members
        if isinstance(item, Answer):
            return item.normalized_form in self._members
        if isinstance(item, (str, int, float, Decimal)):
            return Answer(item).normalized_form in self._members
        return False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnswerSet):
            return NotImplemented
        return self.scores() == other.scores()

    def __repr__(self) -> str:
        inner = ", ".join(f"{m.answer.surface!r}: {m.score:g}" for m in self)
        return f"AnswerSet({{{inner}}})"

    def get(self, key: str) -> ScoredAnswer | None:
        return self._members.get(normalize_text(key))

    def keys(self) -> set[str]:
        return set(self._members)

    def scores(self) -> dict[str, float]:
        return {k: m.score for k, m in self._members.items()}

    def top(self) -> ScoredAnswer | None:
        """Highest score; ties go to the lexicographically smallest key."""
        if not self._members:
            return None
        return min(self._members.values(), key=lambda m: (-m.score, m.key))

    def union(self, other: "AnswerSet") -> "AnswerSet":
        out = AnswerSet(self)
        out.update(other)
        return out

    def intersection(self, other: "AnswerSet") -> "AnswerSet":
        out = AnswerSet()
        for key, mine in self._members.items():
            theirs = other._members.get(key)
            if theirs is not None:
                out.add(mine)
                out.add(theirs)
        return out


class Func(str, Enum):
    SIMPQA = "SIMPQA"
    COMP = "COMP"
    CONJ = "CONJ"
    ADD = "ADD"


_ARITY = {Func.SIMPQA: 1, Func.COMP: 2, Func.CONJ: 2, Func.ADD: 2}


@dataclass(frozen=True)
class Node:
    """A computation-tree node: a leaf when ``func`` is None."""

    text: str | None = None
    func: Func | None = None
    children: tuple["Node", ...] = field(default_factory=tuple)

    @property
    def is_leaf(self) -> bool:
        return self.func is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children)

    def __str__(self) -> str:
        if self.is_leaf:
            return repr(self.text)
        return f"{self.func.value}({', '.join(str(c) for c in self.children)})"


def leaf(text: str) -> Node:
    return Node(text=text)


def simpqa(child: Node | str) -> Node:
    return Node(func=Func.SIMPQA, children=(_as_node(child),))


def comp(template: Node | str, inner: Node | str) -> Node:
    return Node(func=Func.COMP, children=(_as_node(template), _as_node(inner)))


def conj(left: Node | str, right: Node | str) -> Node:
    return Node(func=Func.CONJ, children=(_as_node(left), _as_node(right)))


def add(left: Node | str, right: Node | str) -> Node:
    return Node(func=Func.ADD, children=(_as_node(left), _as_node(right)))


def _as_node(x: Node | str) -> Node:
    return x if isinstance(x, Node) else leaf(x)


def count_var(template: str) -> int:
    return len(_VAR_TOKEN.findall(template))


def check_template(template: str) -> None:
    n = count_var(template)
    if n == 0:
        raise MissingVar(f"template has no {VAR}: {template!r}")
    if n > 1:
        raise MultipleVar(f"template has {n} occurrences of {VAR}: {template!r}")


def validate(tree: Node) -> None:
    """Raise InvalidTree if any node breaks the arity or VAR rules."""
    if tree.is_leaf:
        if not isinstance(tree.text, str):
            raise InvalidTree("leaf without text")
        return
    if tree.func not in _ARITY:
        raise InvalidTree(f"unknown function {tree.func!r}")
    if len(tree.children) != _ARITY[tree.func]:
        raise InvalidTree(
            f"{tree.func.value} takes {_ARITY[tree.func]} children, got {len(tree.children)}"
        )
    if tree.func is Func.SIMPQA and not tree.children[0].is_leaf:
        raise InvalidTree("SIMPQA child must be a string leaf")
    if tree.func is Func.COMP:
        first = tree.children[0]
        if not first.is_leaf:
            raise InvalidTree("COMP first child must be a string leaf")
        try:
            check_template(first.text)
        except (MissingVar, MultipleVar) as exc:
            raise InvalidTree(str(exc)) from exc
    for child in tree.children:
        validate(child)


def _ask(question: str, backend: "QaBackend") -> AnswerSet:
    try:
        return backend.answer(question)
    except BackendError as exc:
        if exc.question is None:
            exc.question = question
        raise


def op_simpqa(question: str, backend: "QaBackend") -> AnswerSet:
    if not normalize_text(question):
        raise EmptyQuestion("empty question")
    result = _ask(question, backend)
    return result if isinstance(result, AnswerSet) else AnswerSet(result)


def substitute(template: str, answer: Answer) -> str:
    return _VAR_TOKEN.sub(lambda _: answer.surface, template, count=1)


def op_comp(
    template: str,
    inner: AnswerSet,
    backend: "QaBackend",
    executor: Executor | None = None,
) -> AnswerSet:
    """Union of SimpQA over the template with VAR replaced by each inner answer."""
    check_template(template)
    questions = [substitute(template, m.answer) for m in inner]
    if executor is not None and len(questions) > 1:
        results = list(executor.map(lambda q: op_simpqa(q, backend), questions))
    else:
        results = [op_simpqa(q, backend) for q in questions]
    out = AnswerSet()
    for r in results:
        out.update(r)
    return out


def op_conj(
    left: AnswerSet | str, right: AnswerSet | str, backend: "QaBackend | None" = None
) -> AnswerSet:
    if isinstance(left, str):
        left = op_simpqa(left, backend)
    if isinstance(right, str):
        right = op_simpqa(right, backend)
    return left.intersection(right)


def op_add(left: AnswerSet, right: AnswerSet) -> AnswerSet:
    for side in (left, right):
        if len(side) != 1:
            raise NonSingleton(f"ADD needs singleton sets, got {len(side)} members")
    (a,), (b,) = list(left), list(right)
    total = a.answer.as_number() + b.answer.as_number()
    return AnswerSet([ScoredAnswer(Answer(total), min(a.score, b.score))])


def evaluate(
    tree: Node, backend: "QaBackend", executor: Executor | None = None
) -> AnswerSet:
    """Compute the denotation of ``tree``.

    ``executor`` lets COMP fan its substituted sub-questions out concurrently;
    the backend must then tolerate concurrent ``answer`` calls.
    """
    validate(tree)
    return _eval(tree, backend, executor)


def _eval(tree: Node, backend: "QaBackend", executor: Executor | None) -> AnswerSet:
    if tree.is_leaf:
        return AnswerSet([ScoredAnswer(Answer(tree.text), 0.0)])
    kids = tree.children
    if tree.func is Func.SIMPQA:
        return op_simpqa(kids[0].text, backend)
    if tree.func is Func.COMP:
        return op_comp(kids[0].text, _eval(kids[1], backend, executor), backend, executor)
    if tree.func is Func.CONJ:
        sides = [k.text if k.is_leaf else _eval(k, backend, executor) for k in kids]
        return op_conj(sides[0], sides[1], backend)
    return op_add(_eval(kids[0], backend, executor), _eval(kids[1], backend, executor))
