"""Simple-question answering backends.

Every backend exposes ``answer(question) -> AnswerSet``. Two are provided: a
fixture backend reading a JSON Lines question/answer table, and a backend
that pulls snippets from an HTTP snippet service (with an on-disk cache) and
extracts candidate answers from them by reciprocal-rank counting.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Protocol, runtime_checkable

import requests

from qdecomp.comptree import Answer, AnswerSet, ScoredAnswer, normalize_text
from qdecomp.errors import EmptyQuestion, ParseError, QuotaError, TransportError

log = logging.getLogger(__name__)

MAX_SNIPPETS = 100
MAX_ANSWERS = 20
API_KEY_ENV = "QDECOMP_SNIPPET_API_KEY"


@runtime_checkable
class QaBackend(Protocol):
    name: str
    deterministic: bool

    def answer(self, question: str) -> AnswerSet: ...


def _question_key(question: str) -> str:
    key = normalize_text(question)
    if not key:
        raise EmptyQuestion("empty question")
    return key


class FixtureBackend:
    """Closed question-to-answers table; unknown questions answer the empty set."""

    deterministic = True

    def __init__(self, table: dict[str, AnswerSet] | None = None, name: str = "fixture"):
        self.name = name
        self._table: dict[str, AnswerSet] = {}
        self._questions: dict[str, str] = {}
        for q, answers in (table or {}).items():
            self._table[_question_key(q)] = answers
            self._questions[_question_key(q)] = q

    def answer(self, question: str) -> AnswerSet:
        found = self._table.get(_question_key(question))
        return AnswerSet(found) if found is not None else AnswerSet()

    def __len__(self) -> int:
        return len(self._table)

    def items(self) -> Iterable[tuple[str, AnswerSet]]:
        for key in sorted(self._table):
            yield self._questions[key], self._table[key]


def load_fixture(path: str | Path) -> FixtureBackend:
    table: dict[str, AnswerSet] = {}
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                question = obj["q"]
                answers = AnswerSet(
                    ScoredAnswer(Answer(a["a"]), float(a.get("s", 0.0))) for a in obj["answers"]
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed fixture record: {exc}", lineno) from exc
            if not isinstance(question, str):
                raise ParseError("question must be a string", lineno)
            key = normalize_text(question)
            if not key:
                raise ParseError("empty question", lineno)
            if key in seen:
                raise ParseError(f"duplicate question {question!r}", lineno)
            seen.add(key)
            table[question] = answers
    return FixtureBackend(table, name=f"fixture:{Path(path).name}")


def dump_fixture(backend: FixtureBackend, path: str | Path) -> None:
    """Write the canonical form: records sorted by key, answers sorted by key."""
    with open(path, "w", encoding="utf-8") as fh:
        for question, answers in backend.items():
            record = {
                "q": question,
                "answers": [{"a": m.answer.to_json(), "s": m.score} for m in answers],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Snippet:
    title: str
    text: str
    rank: int

    def to_json(self) -> dict[str, Any]:
        return {"title": self.title, "text": self.text, "rank": self.rank}


def _parse_snippets(payload: Any) -> list[Snippet]:
    if not isinstance(payload, dict) or not isinstance(payload.get("snippets"), list):
        raise TransportError("snippet payload lacks a 'snippets' list")
    out = []
    ranks = set()
    for item in payload["snippets"]:
        try:
            s = Snippet(str(item["title"]), str(item["text"]), int(item["rank"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed snippet: {item!r}") from exc
        if s.rank < 1 or s.rank in ranks:
            raise TransportError(f"invalid or duplicate snippet rank {s.rank}")
        ranks.add(s.rank)
        out.append(s)
    out.sort(key=lambda s: s.rank)
    return out[:MAX_SNIPPETS]


class SnippetClient:
    """HTTP snippet-service client with a per-question on-disk cache.

    Cache entries never expire. Each entry is a JSON file named by the
    SHA-256 hex digest of the normalized question.
    """

    def __init__(
        self,
        endpoint: str | None,
        cache_dir: str | Path,
        api_key: str | None = None,
        session: Any = None,
        timeout: float = 10.0,
    ):
        self.endpoint = endpoint
        self.cache_dir = Path(cache_dir)
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.session = session if session is not None else requests.Session()
        self.timeout = timeout
        self.network_calls = 0
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def cache_path(self, question: str) -> Path:
        digest = hashlib.sha256(_question_key(question).encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def _lock(self, path: Path) -> threading.Lock:
        with self._locks_guard:
            return self._locks[path.name]

    def fetch_snippets(self, question: str) -> list[Snippet]:
        path = self.cache_path(question)
        with self._lock(path):
            if path.exists():
                return _parse_snippets(json.loads(path.read_text(encoding="utf-8")))
            snippets = self._request(question)
            self._store(path, question, snippets)
            return snippets

    def _request(self, question: str) -> list[Snippet]:
        if not self.endpoint:
            raise TransportError("snippet service endpoint is not configured")
        params = {"q": question}
        if self.api_key:
            params["key"] = self.api_key
        self.network_calls += 1
        try:
            resp = self.session.get(self.endpoint, params=params, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code == 429:
            raise QuotaError("snippet service quota exhausted")
        if resp.status_code != 200:
            raise TransportError(f"snippet service returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise TransportError("snippet service returned invalid JSON") from exc
        return _parse_snippets(payload)

    def _store(self, path: Path, question: str, snippets: list[Snippet]) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        body = json.dumps(
            {"question": question, "snippets": [s.to_json() for s in snippets]},
            ensure_ascii=False,
            sort_keys=True,
        )
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)


_WORD = re.compile(r"[A-Za-z0-9][\w'&.-]*")
_NUMERIC = re.compile(r"\d+(\.\d+)?")


def _words(text: str) -> list[str]:
    return [w.rstrip(".'-") or w for w in _WORD.findall(text)]


def _candidates(text: str) -> Iterable[str]:
    run: list[str] = []

    def flush() -> Iterable[str]:
        if not run:
            return
        if len(run) <= 4:
            yield " ".join(run)
        else:
            for k in range(len(run) - 3):
                yield " ".join(run[k : k + 4])

    for w in _words(text):
        if _NUMERIC.fullmatch(w):
            yield from flush()
            run = []
            yield w
        elif w[0].isupper():
            run.append(w)
        else:
            yield from flush()
            run = []
    yield from flush()


def extract_answers(snippets: Iterable[Snippet], question: str) -> AnswerSet:
    """Score capitalized spans and numbers by summed reciprocal snippet rank."""
    qwords = {w.lower() for w in _words(question)}
    scores: dict[str, float] = defaultdict(float)
    surface: dict[str, str] = {}
    for s in sorted(snippets, key=lambda s: s.rank):
        for cand in _candidates(s.text):
            if any(w.lower() in qwords for w in cand.split()):
                continue
            key = normalize_text(cand)
            scores[key] += 1.0 / s.rank
            surface.setdefault(key, cand)
    ranked = sorted(scores, key=lambda k: (-scores[k], k))[:MAX_ANSWERS]
    out = AnswerSet()
    for key in ranked:
        text = surface[key]
        value: str | float = text
        if _NUMERIC.fullmatch(text):
            value = Answer(text).as_number()
        out.add(ScoredAnswer(Answer(value), scores[key]))
    return out


class SnippetBackend:
    deterministic = False

    def __init__(self, client: SnippetClient, name: str = "snippets"):
        self.client = client
        self.name = name

    def answer(self, question: str) -> AnswerSet:
        return extract_answers(self.client.fetch_snippets(question), question)
