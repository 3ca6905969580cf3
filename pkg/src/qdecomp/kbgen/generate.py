"""Complicating seed queries and rendering machine-generated (MG) questions.

Each generator enumerates every admissible complication of a seed; the
``gen_*`` wrappers pick one with an rng. Records carry the exact MG split
points so that supervision can be checked against them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from qdecomp.comptree import canonical_number, normalize_text
from qdecomp.decomp import from_tokens, tokenize
from qdecomp.errors import MissingTemplate, ParseError
from qdecomp.kbgen.kb import KnowledgeBase, Value
from qdecomp.kbgen.query import ConjunctiveQuery, Filter, Order, Pattern, execute_values

COMP_TYPES = ("comp", "conj", "super", "compar")
DEFAULT_QUOTA = {"comp": 45, "conj": 45, "super": 5, "compar": 5}
OBJ = "OBJ"


@dataclass(frozen=True)
class SeedExample:
    question: str
    query: ConjunctiveQuery
    mentions: dict[str, tuple[int, int]] = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SeedExample":
        mentions = {k: (int(v[0]), int(v[1])) for k, v in obj.get("mentions", {}).items()}
        return cls(obj["question"], ConjunctiveQuery.from_json(obj["query"]), mentions)


def load_seeds(path: str | Path) -> list[SeedExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(SeedExample.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad seed: {exc}", lineno) from exc
    return out


@dataclass(frozen=True)
class PredicateTemplate:
    """``predicates`` has one id, or two for a hop through a CVT node."""

    predicates: tuple[str, ...]
    text: str
    comp_type: str
    glue: str

    def __post_init__(self) -> None:
        if self.text.count(OBJ) != 1:
            raise ValueError(f"template {self.text!r} needs exactly one {OBJ} slot")
        if self.comp_type not in COMP_TYPES:
            raise ValueError(f"unknown composition type {self.comp_type!r}")
        if not 1 <= len(self.predicates) <= 2:
            raise ValueError("a template covers one predicate or a CVT pair")

    @property
    def key(self) -> str:
        return "+".join(self.predicates)

    def render(self, obj: str) -> str:
        return self.text.replace(OBJ, obj)


def load_templates(path: str | Path) -> list[PredicateTemplate]:
    """Rows are ``pred<TAB>text<TAB>type:glue``; ``p1+p2`` names a CVT pair."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
            pred, text, kind = parts
            comp_type, _, glue = kind.partition(":")
            try:
                out.append(PredicateTemplate(tuple(pred.split("+")), text, comp_type, glue.strip()))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from exc
    return out


def find_template(templates: Sequence[PredicateTemplate], predicates: Sequence[str], comp_type: str) -> PredicateTemplate:
    key = "+".join(predicates)
    for t in templates:
        if t.key == key and t.comp_type == comp_type:
            return t
    raise MissingTemplate(f"no {comp_type} template for predicate {key}")


# -- records ----------------------------------------------------------------


@dataclass
class Record:
    comp_type: str
    seed_question: str
    mg_question: str
    query: ConjunctiveQuery
    answers: list[str]
    mg_splits: tuple[int, ...]
    inserted: str
    glue: str = ""
    question: str = ""  # the NL side; equals mg_question until noised

    def __post_init__(self) -> None:
        if not self.question:
            self.question = self.mg_question

    def to_json(self) -> dict[str, Any]:
        return {
            "question": self.question,
            "mg_question": self.mg_question,
            "query": self.query.to_json(),
            "answers": self.answers,
            "comp_type": self.comp_type,
            "mg_splits": list(self.mg_splits),
            "seed_question": self.seed_question,
            "inserted": self.inserted,
            "glue": self.glue,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Record":
        return cls(
            comp_type=obj["comp_type"],
            seed_question=obj["seed_question"],
            mg_question=obj["mg_question"],
            query=ConjunctiveQuery.from_json(obj["query"]),
            answers=list(obj["answers"]),
            mg_splits=tuple(obj["mg_splits"]),
            inserted=obj["inserted"],
            glue=obj.get("glue", ""),
            question=obj["question"],
        )


def _strip_end(question: str) -> str:
    return question.rstrip().rstrip("?!.").rstrip()


def _answer_names(values: Iterable[Value], kb: KnowledgeBase) -> list[str]:
    return sorted(kb.name(v) for v in values)


def _norm_tokens(text: str) -> list[str]:
    return [normalize_text(t) for t in tokenize(text).tokens if normalize_text(t)]


def leaks_answer(mg_question: str, answers: Iterable[str]) -> bool:
    """True when some answer's tokens occur contiguously in the MG question."""
    mg = _norm_tokens(mg_question)
    for a in answers:
        if not a.strip():
            continue
        toks = _norm_tokens(a)
        k = len(toks)
        if k and any(mg[i : i + k] == toks for i in range(len(mg) - k + 1)):
            return True
    return False


def make_mg_question(
    seed: SeedExample, comp_type: str, template: PredicateTemplate, obj_name: str, entity: str | None = None
) -> tuple[str, tuple[int, ...], str]:
    """Render the MG question; returns (text, mg_splits, inserted phrase).

    conj/super/compar append ``glue + phrase`` and split where the glue
    starts; comp replaces the entity mention and brackets the phrase.
    """
    phrase = template.render(obj_name)
    if comp_type == "comp":
        if entity is None or entity not in seed.mentions:
            raise ValueError("composition needs a mentioned entity")
        start, end = seed.mentions[entity]
        prefix, suffix = seed.question[:start], seed.question[end:]
        mg = prefix + phrase + suffix
        r1 = len(tokenize(prefix)) if prefix.strip() else 0
        r2 = r1 + len(tokenize(phrase))
        return mg, (r1, r2), phrase
    base = _strip_end(seed.question)
    tail = f"{template.glue} {phrase}".strip()
    return f"{base} {tail}", (len(tokenize(base)),), phrase


def split_consistent(rec: Record) -> bool:
    """Tokenized MG question splits back into the seed and inserted fragments."""
    toks = list(tokenize(rec.mg_question).tokens)
    phrase = list(tokenize(rec.inserted).tokens)
    if rec.comp_type == "comp":
        r1, r2 = rec.mg_splits
        seed = list(tokenize(rec.seed_question).tokens)
        return toks[r1:r2] == phrase and toks[:r1] + toks[r2:] == seed[:r1] + seed[len(seed) - (len(toks) - r2):]
    (r,) = rec.mg_splits
    seed = list(tokenize(_strip_end(rec.seed_question)).tokens)
    glue = rec.glue.split()
    return toks[:r] == seed and toks[r:] == glue + phrase


# -- generators -------------------------------------------------------------


def _denotation(query: ConjunctiveQuery, kb: KnowledgeBase) -> set[Value]:
    return execute_values(query, kb)


def _added_patterns(query: ConjunctiveQuery, template: PredicateTemplate, obj: Value) -> list[Pattern]:
    x = query.answer_var
    if len(template.predicates) == 1:
        return [Pattern(x, template.predicates[0], obj)]
    c = query.fresh_var("c")
    return [Pattern(x, template.predicates[0], c), Pattern(c, template.predicates[1], obj)]


def _objects_of(kb: KnowledgeBase, subject: Value, template: PredicateTemplate) -> list[Value]:
    if not isinstance(subject, str):
        return []
    if len(template.predicates) == 1:
        return list(kb.objects(subject, template.predicates[0]))
    out = []
    for mid in kb.objects(subject, template.predicates[0]):
        if isinstance(mid, str):
            out.extend(kb.objects(mid, template.predicates[1]))
    return out


def _finish(rec: Record) -> Record | None:
    if leaks_answer(rec.mg_question, rec.answers) or not split_consistent(rec):
        return None
    return rec


def conj_candidates(seed: SeedExample, kb: KnowledgeBase, templates: Sequence[PredicateTemplate]) -> list[Record]:
    base = _denotation(seed.query, kb)
    if len(base) < 2:
        return []
    out = []
    for t in templates:
        if t.comp_type != "conj":
            continue
        objs: set[Value] = set()
        for a in base:
            objs.update(_objects_of(kb, a, t))
        for obj in sorted(objs, key=str):
            if obj in seed.query.entities():
                continue
            query = seed.query.extend(*_added_patterns(seed.query, t, obj))
            sub = _denotation(query, kb)
            if not sub or sub == base or not sub < base:
                continue
            mg, splits, phrase = make_mg_question(seed, "conj", t, kb.name(obj))
            rec = _finish(Record("conj", seed.question, mg, query, _answer_names(sub, kb), splits, phrase, t.glue))
            if rec is not None:
                out.append(rec)
    return out


def _numeric_values(kb: KnowledgeBase, entities: Iterable[Value], predicate: str) -> dict[Value, Decimal] | None:
    """Each entity's single numeric value, or None when the predicate is not common to all."""
    out = {}
    for e in entities:
        vals = [v for v in kb.objects(e, predicate)] if isinstance(e, str) else []
        nums = [v for v in vals if isinstance(v, Decimal)]
        if len(nums) != 1 or len(vals) != 1:
            return None
        out[e] = nums[0]
    return out


def _numeric_query(seed: SeedExample, predicate: str) -> tuple[ConjunctiveQuery, str]:
    n = seed.query.fresh_var("n")
    return seed.query.extend(Pattern(seed.query.answer_var, predicate, n)), n


def superlative_candidates(
    seed: SeedExample, kb: KnowledgeBase, templates: Sequence[PredicateTemplate]
) -> list[Record]:
    base = _denotation(seed.query, kb)
    if len(base) < 2:
        return []
    out = []
    for t in templates:
        if t.comp_type != "super" or len(t.predicates) != 1:
            continue
        values = _numeric_values(kb, base, t.predicates[0])
        if values is None:
            continue
        ranked = sorted(values.values())
        for descending in (True, False):
            extreme = ranked[-1] if descending else ranked[0]
            if ranked.count(extreme) > 1:
                continue  # tie: no unique winner
            query, n = _numeric_query(seed, t.predicates[0])
            query = query.extend(order=Order(n, descending))
            sub = _denotation(query, kb)
            if len(sub) != 1 or not sub < base:
                continue
            word = "largest" if descending else "smallest"
            mg, splits, phrase = make_mg_question(seed, "super", t, word)
            rec = _finish(Record("super", seed.question, mg, query, _answer_names(sub, kb), splits, phrase, t.glue))
            if rec is not None:
                out.append(rec)
    return out


def gap_midpoints(values: Iterable[Decimal]) -> list[Decimal]:
    distinct = sorted(set(values))
    return [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]


def comparative_candidates(
    seed: SeedExample, kb: KnowledgeBase, templates: Sequence[PredicateTemplate]
) -> list[Record]:
    base = _denotation(seed.query, kb)
    if len(base) < 2:
        return []
    out = []
    for t in templates:
        if t.comp_type != "compar" or len(t.predicates) != 1:
            continue
        values = _numeric_values(kb, base, t.predicates[0])
        if values is None:
            continue
        for v in gap_midpoints(values.values()):
            for op in ("<", ">"):
                query, n = _numeric_query(seed, t.predicates[0])
                query = query.extend(filter=Filter(n, op, v))
                sub = _denotation(query, kb)
                if not sub or not sub < base:
                    continue
                word = ("less than " if op == "<" else "more than ") + canonical_number(v)
                mg, splits, phrase = make_mg_question(seed, "compar", t, word)
                rec = _finish(Record("compar", seed.question, mg, query, _answer_names(sub, kb), splits, phrase, t.glue))
                if rec is not None:
                    out.append(rec)
    return out


def composition_candidates(
    seed: SeedExample, kb: KnowledgeBase, templates: Sequence[PredicateTemplate]
) -> list[Record]:
    base = _denotation(seed.query, kb)
    if not base:
        return []
    out = []
    for entity in sorted(seed.mentions):
        if entity not in seed.query.entities():
            continue
        y = seed.query.fresh_var("y")
        outer = seed.query.substitute(entity, y)
        for t in templates:
            if t.comp_type != "comp" or len(t.predicates) != 1:
                continue
            pred = t.predicates[0]
            for obj in sorted(set(kb.objects(entity, pred)), key=str):
                # ambiguity filter: the inner phrase must pick out exactly e
                if set(kb.subjects(pred, obj)) != {entity}:
                    continue
                query = outer.extend(Pattern(y, pred, obj))
                if _denotation(query, kb) != base:
                    continue
                mg, splits, phrase = make_mg_question(seed, "comp", t, kb.name(obj), entity)
                rec = _finish(Record("comp", seed.question, mg, query, _answer_names(base, kb), splits, phrase))
                if rec is not None:
                    out.append(rec)
    return out


GENERATORS = {
    "comp": composition_candidates,
    "conj": conj_candidates,
    "super": superlative_candidates,
    "compar": comparative_candidates,
}


def _pick(cands: list[Record], rng: np.random.Generator) -> Record | None:
    return cands[int(rng.integers(len(cands)))] if cands else None


def gen_conj(seed, kb, templates, rng) -> Record | None:
    return _pick(conj_candidates(seed, kb, templates), rng)


def gen_superlative(seed, kb, templates, rng) -> Record | None:
    return _pick(superlative_candidates(seed, kb, templates), rng)


def gen_comparative(seed, kb, templates, rng) -> Record | None:
    return _pick(comparative_candidates(seed, kb, templates), rng)


def gen_composition(seed, kb, templates, rng) -> Record | None:
    return _pick(composition_candidates(seed, kb, templates), rng)


def candidate_pools(
    seeds: Sequence[SeedExample], kb: KnowledgeBase, templates: Sequence[PredicateTemplate]
) -> dict[str, list[Record]]:
    return {kind: [r for s in seeds for r in gen(s, kb, templates)] for kind, gen in GENERATORS.items()}


def allocate(n: int, quota: dict[str, int]) -> dict[str, int]:
    """Split ``n`` by the quota ratios, largest remainder first."""
    total = sum(quota.values())
    exact = {k: n * v / total for k, v in quota.items()}
    counts = {k: int(x) for k, x in exact.items()}
    order = sorted(quota, key=lambda k: (-(exact[k] - counts[k]), COMP_TYPES.index(k) if k in COMP_TYPES else 9, k))
    for k in order[: n - sum(counts.values())]:
        counts[k] += 1
    return counts


def sample_records(
    pools: dict[str, list[Record]],
    n: int,
    rng: np.random.Generator,
    quota: dict[str, int] | None = None,
) -> list[Record]:
    """Draw ``n`` records following the quota, without replacement.

    A pool smaller than its share contributes everything it has.
    """
    counts = allocate(n, quota or DEFAULT_QUOTA)
    out = []
    for kind in sorted(counts, key=lambda k: COMP_TYPES.index(k) if k in COMP_TYPES else 9):
        pool = pools.get(kind, [])
        take = min(counts[kind], len(pool))
        idx = sorted(rng.choice(len(pool), size=take, replace=False)) if take else []
        out.extend(pool[int(i)] for i in idx)
    return out


# -- noising ----------------------------------------------------------------


def load_synonyms(path: str | Path) -> dict[str, list[str]]:
    table: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected word<TAB>substitute", lineno)
            table.setdefault(parts[0].lower(), []).append(parts[1])
    return table


def substitute_synonyms(
    tokens: Sequence[str], synonyms: dict[str, list[str]], rate: float, rng: np.random.Generator
) -> list[str]:
    """Replace each token that has a synonym with probability ``rate``.

    Token count is unchanged, so split points carry over.
    """
    out = []
    for tok in tokens:
        subs = synonyms.get(tok.lower())
        if subs and rng.random() < rate:
            out.append(subs[int(rng.integers(len(subs)))])
        else:
            out.append(tok)
    return out


def swap_segments(rec: Record) -> list[str]:
    """Conjunct-first rendering of an appended-conjunct record."""
    toks = list(tokenize(rec.mg_question).tokens)
    (r,) = rec.mg_splits
    g = len(rec.glue.split())
    return toks[r + g :] + toks[r : r + g] + toks[:r]


def noise_record(
    rec: Record,
    synonyms: dict[str, list[str]],
    rng: np.random.Generator,
    rate: float = 0.0,
    swap_rate: float = 0.0,
) -> Record:
    toks = list(tokenize(rec.mg_question).tokens)
    if rec.comp_type == "conj" and swap_rate > 0 and rng.random() < swap_rate:
        toks = swap_segments(rec)
    if rate > 0:
        toks = substitute_synonyms(toks, synonyms, rate, rng)
    out = Record(**{**rec.__dict__})
    out.question = from_tokens(toks).text
    return out


def generate_dataset(
    seeds: Sequence[SeedExample],
    kb: KnowledgeBase,
    templates: Sequence[PredicateTemplate],
    n: int,
    rng: np.random.Generator,
    synonyms: dict[str, list[str]] | None = None,
    noise_rate: float = 0.0,
    swap_rate: float = 0.0,
    quota: dict[str, int] | None = None,
) -> list[Record]:
    pools = candidate_pools(seeds, kb, templates)
    records = sample_records(pools, n, rng, quota)
    if synonyms is None:
        synonyms = {}
    return [noise_record(r, synonyms, rng, noise_rate, swap_rate) for r in records]


def synthetic_pairs(
    seeds: Sequence[SeedExample],
    kb: KnowledgeBase,
    templates: Sequence[PredicateTemplate],
    n: int,
    rng: np.random.Generator,
    synonyms: dict[str, list[str]] | None = None,
    noise_rate: float = 0.0,
) -> list[Record]:
    """``n`` comp/conj MG/NL pairs, drawn with replacement so noise varies per copy."""
    pools = candidate_pools(seeds, kb, templates)
    pool = pools["comp"] + pools["conj"]
    if not pool:
        return []
    idx = rng.integers(len(pool), size=n)
    return [noise_record(pool[int(i)], synonyms or {}, rng, noise_rate) for i in idx]


def write_records(records: Iterable[Record], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[Record]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Record.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad record: {exc}", lineno) from exc
    return out

