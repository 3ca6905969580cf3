"""Token alignment between machine-generated (MG) and paraphrased (NL) questions.

The similarity matrix has one row per NL token and one column per MG token.
Split points known on the MG side are carried over to the NL side by
maximizing alignment mass per segment, which yields noisy decomposition
labels for training.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from qdecomp.decomp import Program, TokenizedQuestion, from_tokens, tokenize
from qdecomp.errors import EmptyQuestion, InvalidSplit, ParseError

DEFAULT_THRESHOLD = 0.4
MIN_QUESTION_TOKENS = 3

_IRREGULAR = {
    "wrote": "write",
    "written": "write",
    "writes": "write",
    "born": "bear",
    "bore": "bear",
    "did": "do",
    "does": "do",
    "done": "do",
    "is": "be",
    "are": "be",
    "was": "be",
    "were": "be",
    "been": "be",
    "has": "have",
    "had": "have",
    "made": "make",
    "won": "win",
    "went": "go",
    "gone": "go",
    "began": "begin",
    "begun": "begin",
    "led": "lead",
    "founded": "found",
    "children": "child",
    "people": "person",
    "men": "man",
    "women": "woman",
    "movies": "movie",
    "series": "series",
    "species": "species",
}
_NO_UNDOUBLE = set("lsz")


def _strip_suffix(word: str) -> str:
    if word.endswith("ies") and len(word) - 3 >= 3:
        return word[:-3] + "y"
    if word.endswith("es") and len(word) - 2 >= 3 and word[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return word[:-2]
    if word.endswith("s") and len(word) - 1 >= 3 and word[-2] not in "sui":
        return word[:-1]
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            stem = word[: -len(suffix)]
            if stem[-1] == stem[-2] and stem[-1] not in _NO_UNDOUBLE and stem[-1].isalpha() and len(stem) > 3:
                stem = stem[:-1]
            return stem
    return word


def lemma(token: str) -> str:
    """Rule-based lemma; applied to a fixed point so ``lemma`` is idempotent."""
    word = token.lower()
    if word.endswith(("'s", "’s")) and len(word) > 2:
        word = word[:-2]
    while True:
        nxt = _IRREGULAR.get(word)
        if nxt is None:
            nxt = _strip_suffix(word)
        if nxt == word:
            return word
        word = nxt


def is_punct(token: str) -> bool:
    return not any(c.isalnum() for c in token)


class EmbeddingStore:
    """Read-only token to vector table of a fixed dimension."""

    def __init__(self, dimension: int, table: dict[str, np.ndarray] | None = None):
        if dimension <= 0:
            raise ValueError("embedding dimension must be positive")
        self.dimension = dimension
        self._table: dict[str, np.ndarray] = {}
        for tok, vec in (table or {}).items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dimension,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, expected ({dimension},)")
            vec.setflags(write=False)
            self._table[tok] = vec

    def __contains__(self, token: str) -> bool:
        return self.get(token) is not None

    def __len__(self) -> int:
        return len(self._table)

    def tokens(self) -> list[str]:
        return list(self._table)

    def get(self, token: str) -> np.ndarray | None:
        vec = self._table.get(token)
        if vec is None:
            vec = self._table.get(token.lower())
        return vec

    @classmethod
    def load(cls, path: str | Path, dimension: int | None = None) -> "EmbeddingStore":
        table: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    if line.strip():
                        raise ParseError("expected a token followed by numbers", lineno)
                    continue
                try:
                    vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                except ValueError as exc:
                    raise ParseError(f"non-numeric vector component: {exc}", lineno) from exc
                if dimension is None:
                    dimension = len(vec)
                if len(vec) != dimension:
                    raise ParseError(f"expected {dimension} components, got {len(vec)}", lineno)
                table[parts[0]] = vec
        return cls(dimension or 50, table)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok, vec in self._table.items():
                fh.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def similarity(a: str, b: str, store: EmbeddingStore | None, threshold: float = DEFAULT_THRESHOLD) -> float:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if is_punct(a) or is_punct(b):
        return 0.0
    if lemma(a) == lemma(b):
        return 1.0
    if store is None:
        return 0.0
    u, v = store.get(a.lower()), store.get(b.lower())
    if u is None or v is None:
        return 0.0
    c = min(cosine(u, v), 1.0)
    return c if c >= threshold else 0.0


def build_matrix(
    nl: TokenizedQuestion,
    mg: TokenizedQuestion,
    store: EmbeddingStore | None,
    threshold: float = DEFAULT_THRESHOLD,
) -> np.ndarray:
    """Rows index NL tokens, columns index MG tokens."""
    if len(nl) == 0 or len(mg) == 0:
        raise EmptyQuestion("cannot align an empty question")
    a = np.zeros((len(nl), len(mg)))
    cache: dict[tuple[str, str], float] = {}
    for i, x in enumerate(nl.tokens):
        for j, y in enumerate(mg.tokens):
            key = (x.lower(), y.lower())
            if key not in cache:
                cache[key] = similarity(key[0], key[1], store, threshold)
            a[i, j] = cache[key]
    return a


def _row_max(a: np.ndarray, lo: int, hi: int) -> list[float]:
    if hi <= lo:
        return [0.0] * a.shape[0]
    return [float(x) for x in a[:, lo:hi].max(axis=1)]


@dataclass(frozen=True)
class ConjSplit:
    p: int
    reordered: bool
    score: float


def conj_split(a: np.ndarray, r: int) -> ConjSplit:
    """Best NL split for a conjunction whose MG split is ``r``.

    Tries every split ``p`` in ``0..n`` under both the in-order objective
    and the swapped (re-ordered) one; the swapped one must win strictly to
    flag re-ordering. Ties go to the lowest ``p``.
    """
    n, m = a.shape
    if not 0 < r < m:
        raise InvalidSplit(f"MG split {r} outside (0, {m})")
    left, right = _row_max(a, 0, r), _row_max(a, r, m)

    def best(first: list[float], second: list[float]) -> tuple[float, int]:
        top, arg = -math.inf, 0
        for p in range(n + 1):
            s = math.fsum(first[:p] + second[p:])
            if s > top:
                top, arg = s, p
        return top, arg

    s1, p1 = best(left, right)
    s2, p2 = best(right, left)
    if s2 > s1:
        return ConjSplit(p2, True, s2)
    return ConjSplit(p1, False, s1)


def comp_split(a: np.ndarray, r1: int, r2: int) -> tuple[int, int]:
    """NL span ``[p1, p2)`` best aligned with the inserted MG span ``[r1, r2)``."""
    n, m = a.shape
    if not 0 <= r1 < r2 <= m:
        raise InvalidSplit(f"MG splits ({r1}, {r2}) invalid for length {m}")
    pre, mid, post = _row_max(a, 0, r1), _row_max(a, r1, r2), _row_max(a, r2, m)
    top, arg = -math.inf, (0, 0)
    for p1 in range(n + 1):
        for p2 in range(p1, n + 1):
            s = math.fsum(pre[:p1] + mid[p1:p2] + post[p2:])
            if s > top:
                top, arg = s, (p1, p2)
    return arg


def copy_index(
    a: np.ndarray, p: int, r: int, threshold: float = DEFAULT_THRESHOLD, reordered: bool = False
) -> int:
    """Token before the NL split that best aligns with the other MG conjunct.

    Returns -1 when nothing aligns at or above ``threshold``.
    """
    n, m = a.shape
    lo, hi = (0, r) if reordered else (r, m)
    best, arg = -math.inf, -1
    for i in range(min(p, n)):
        v = float(a[i, lo:hi].max()) if hi > lo else 0.0
        if v > best:
            best, arg = v, i
    if arg == -1 or best < threshold:
        return -1
    return arg


@dataclass
class SupervisionExample:
    nl: TokenizedQuestion
    label: Program
    comp_type: str
    mg_splits: tuple[int, ...]
    reordered: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "question": self.nl.text,
            "tokens": list(self.nl.tokens),
            "program": str(self.label),
            "comp_type": self.comp_type,
            "reordered": self.reordered,
            "mg_splits": list(self.mg_splits),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SupervisionExample":
        q = tokenize(obj["question"])
        if list(q.tokens) != list(obj["tokens"]):
            q = from_tokens(obj["tokens"])
        label = Program.parse(obj["program"])
        label.check(len(q))
        return cls(q, label, obj["comp_type"], tuple(obj["mg_splits"]), bool(obj["reordered"]))


@dataclass
class SupervisionResult:
    examples: list[SupervisionExample] = field(default_factory=list)
    dropped: int = 0
    skipped: int = 0


def label_record(
    nl: TokenizedQuestion,
    mg: TokenizedQuestion,
    comp_type: str,
    mg_splits: Sequence[int],
    store: EmbeddingStore | None,
    threshold: float = DEFAULT_THRESHOLD,
) -> SupervisionExample | None:
    """Noisy program for one NL question, or None when the alignment degenerates."""
    n = len(nl)
    if n < MIN_QUESTION_TOKENS:
        return None
    a = build_matrix(nl, mg, store, threshold)
    if comp_type == "comp":
        r1, r2 = mg_splits
        p1, p2 = comp_split(a, r1, r2)
        if p1 == p2 or (p1 == 0 and p2 == n):
            return None
        return SupervisionExample(nl, Program.comp(p1, p2 - 1), comp_type, tuple(mg_splits))
    (r,) = mg_splits
    split = conj_split(a, r)
    if split.p == 0 or split.p == n:
        return None
    j = copy_index(a, split.p, r, threshold, split.reordered)
    return SupervisionExample(nl, Program.conj(split.p, j), comp_type, (r,), split.reordered)


def make_supervision(
    records: Iterable[dict[str, Any]],
    store: EmbeddingStore | None,
    threshold: float = DEFAULT_THRESHOLD,
) -> SupervisionResult:
    """Label generated composition/conjunction records.

    Each record needs ``question`` (NL), ``mg_question``, ``comp_type`` and
    ``mg_splits``. Other composition types are skipped; degenerate
    alignments are dropped and counted.
    """
    out = SupervisionResult()
    for rec in records:
        if rec["comp_type"] not in ("comp", "conj"):
            out.skipped += 1
            continue
        ex = label_record(
            tokenize(rec["question"]),
            tokenize(rec["mg_question"]),
            rec["comp_type"],
            rec["mg_splits"],
            store,
            threshold,
        )
        if ex is None:
            out.dropped += 1
        else:
            out.examples.append(ex)
    return out


def write_supervision(examples: Iterable[SupervisionExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")


def read_supervision(path: str | Path) -> list[SupervisionExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(SupervisionExample.from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad supervision record: {exc}", lineno) from exc
    return out
