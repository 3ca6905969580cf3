"""Token-level decomposition programs.

A program is one of ``SimpQA``, ``Comp i j`` or ``Conj i j`` over a tokenized
question, with 0-based inclusive indices. ``compile`` turns it into a
computation tree.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from qdecomp import comptree
from qdecomp.comptree import VAR, AnswerSet, Node, ScoredAnswer
from qdecomp.errors import BothEmpty, EmptyText, IndexOutOfRange, InvalidProgram

_CHUNK = re.compile(r"\S+")
_ALWAYS_DETACH = "?!,"
_FINAL_DETACH = "?!,.;:"
TRIGGERS = ("when", "during")


@dataclass(frozen=True)
class TokenizedQuestion:
    text: str
    tokens: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def normalized(self) -> str:
        return " ".join(self.tokens).lower()

    def span(self, start: int, end: int) -> list[str]:
        """Tokens ``start..end`` inclusive (empty when end < start)."""
        return list(self.tokens[start : end + 1])


def tokenize(text: str) -> TokenizedQuestion:
    """Whitespace split, with trailing ``? ! ,`` (and ``. ; :`` on the last word) detached."""
    if not text or not text.strip():
        raise EmptyText("cannot tokenize empty text")
    tokens: list[str] = []
    offsets: list[tuple[int, int]] = []
    chunks = list(_CHUNK.finditer(text))
    for n, m in enumerate(chunks):
        detach = _FINAL_DETACH if n == len(chunks) - 1 else _ALWAYS_DETACH
        start, end = m.span()
        tail: list[tuple[int, int]] = []
        while end - start > 1 and text[end - 1] in detach:
            tail.append((end - 1, end))
            end -= 1
        pieces = [(start, end)] + tail[::-1]
        for s, e in pieces:
            tokens.append(text[s:e])
            offsets.append((s, e))
    return TokenizedQuestion(text, tuple(tokens), tuple(offsets))


def from_tokens(tokens: list[str] | tuple[str, ...]) -> TokenizedQuestion:
    """Build a question from pre-split tokens, joined by single spaces."""
    if not tokens:
        raise EmptyText("no tokens")
    offsets, pos = [], 0
    for t in tokens:
        offsets.append((pos, pos + len(t)))
        pos += len(t) + 1
    return TokenizedQuestion(" ".join(tokens), tuple(tokens), tuple(offsets))


class Op(str, Enum):
    SIMPQA = "SimpQA"
    COMP = "Comp"
    CONJ = "Conj"


@dataclass(frozen=True)
class Program:
    op: Op
    i: int | None = None
    j: int | None = None

    @classmethod
    def simpqa(cls) -> "Program":
        return cls(Op.SIMPQA)

    @classmethod
    def comp(cls, i: int, j: int) -> "Program":
        return cls(Op.COMP, i, j)

    @classmethod
    def conj(cls, i: int, j: int = -1) -> "Program":
        return cls(Op.CONJ, i, j)

    def __str__(self) -> str:
        if self.op is Op.SIMPQA:
            return "SimpQA"
        return f"{self.op.value} {self.i} {self.j}"

    @classmethod
    def parse(cls, text: str) -> "Program":
        parts = text.split()
        try:
            op = Op(parts[0]) if parts else None
        except ValueError:
            op = None
        if op is None:
            raise InvalidProgram(f"unknown program {text!r}")
        if op is Op.SIMPQA:
            if len(parts) != 1:
                raise InvalidProgram(f"SimpQA takes no indices: {text!r}")
            return cls.simpqa()
        if len(parts) != 3:
            raise InvalidProgram(f"{op.value} needs two indices: {text!r}")
        try:
            return cls(op, int(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise InvalidProgram(f"bad index in {text!r}") from exc

    def is_valid(self, n: int) -> bool:
        try:
            self.check(n)
        except (InvalidProgram, IndexOutOfRange):
            return False
        return True

    def check(self, n: int) -> None:
        """Raise unless the program is valid for a question of ``n`` tokens."""
        if self.op is Op.SIMPQA:
            if self.i is not None or self.j is not None:
                raise InvalidProgram("SimpQA carries no indices")
            return
        if self.i is None or self.j is None:
            raise InvalidProgram(f"{self.op.value} needs two indices")
        i, j = self.i, self.j
        if self.op is Op.COMP:
            if not (0 <= i < n and 0 <= j < n):
                raise IndexOutOfRange(f"Comp {i} {j} out of range for length {n}")
            if i > j:
                raise InvalidProgram(f"Comp needs i <= j, got {i} > {j}")
        else:
            if not (1 <= i < n) or not (-1 <= j < n):
                raise IndexOutOfRange(f"Conj {i} {j} out of range for length {n}")
            if j != -1 and j >= i:
                raise InvalidProgram(f"Conj copy index must precede the split, got {j} >= {i}")


def segments(program: Program, q: TokenizedQuestion) -> list[list[str]]:
    """The token lists a program cuts ``q`` into.

    SimpQA: ``[q]``. Comp: ``[outer-with-VAR, inner]``. Conj: ``[first, second]``.
    """
    program.check(len(q))
    toks = list(q.tokens)
    if program.op is Op.SIMPQA:
        return [toks]
    i, j = program.i, program.j
    if program.op is Op.COMP:
        return [toks[:i] + [VAR] + toks[j + 1 :], toks[i : j + 1]]
    copied = [toks[j]] if j != -1 else []
    return [toks[:i], copied + toks[i:]]


def compile(program: Program, q: TokenizedQuestion) -> Node:
    """Turn a program into the computation tree it denotes."""
    parts = [" ".join(p) for p in segments(program, q)]
    if program.op is Op.SIMPQA:
        return comptree.simpqa(parts[0])
    if program.op is Op.COMP:
        return comptree.comp(parts[0], comptree.simpqa(parts[1]))
    return comptree.conj(comptree.simpqa(parts[0]), comptree.simpqa(parts[1]))


def rule_based_split(q: TokenizedQuestion) -> Program:
    """Split before the first "when"/"during": the clause it opens is answered first."""
    last = len(q) - 1
    for idx, tok in enumerate(q.tokens):
        if tok.lower() in TRIGGERS:
            if idx == 0 or idx == last:
                return Program.simpqa()
            return Program.comp(idx, last)
    return Program.simpqa()


def select_strategy(decomposed: AnswerSet, plain: AnswerSet) -> tuple[ScoredAnswer, bool]:
    """Pick the single best-scoring answer across both strategies.

    Returns the answer and whether it came from the decomposed set. Ties
    prefer the decomposed set, then the smaller normalized form.
    """
    best_d, best_p = decomposed.top(), plain.top()
    if best_d is None and best_p is None:
        raise BothEmpty("both strategies returned no answers")
    if best_p is None:
        return best_d, True
    if best_d is None:
        return best_p, False
    if best_d.score >= best_p.score:
        return best_d, True
    return best_p, False
