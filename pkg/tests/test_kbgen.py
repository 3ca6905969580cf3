from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdecomp.decomp import tokenize
from qdecomp.errors import MissingTemplate, ParseError, UnboundOrderVariable
from qdecomp.kbgen import (
    ConjunctiveQuery,
    Filter,
    KnowledgeBase,
    Literal,
    Order,
    Pattern,
    PredicateTemplate,
    SeedExample,
    Triple,
    allocate,
    candidate_pools,
    comparative_candidates,
    composition_candidates,
    conj_candidates,
    execute,
    execute_values,
    find_template,
    gap_midpoints,
    generate_dataset,
    leaks_answer,
    load_kb,
    load_templates,
    make_mg_question,
    noise_record,
    read_records,
    split_consistent,
    substitute_synonyms,
    superlative_candidates,
    write_records,
)


def kb_of(*rows):
    return KnowledgeBase(Triple(s, p, Decimal(o) if isinstance(o, int) else o) for s, p, o in rows)


BORDERS = kb_of(("USA", "borders", "Mexico"), ("Guatemala", "borders", "Mexico"), ("Canada", "borders", "USA"))


def q(*patterns, **kw):
    return ConjunctiveQuery(tuple(Pattern(*p) for p in patterns), **kw)


def test_execute_single_pattern():
    assert execute(q(("?x", "borders", "Mexico")), BORDERS).keys() == {"usa", "guatemala"}


def test_execute_order_and_filter():
    kb = kb_of(("A", "founded", 1850), ("B", "founded", 1890), ("A", "kind", "school"), ("B", "kind", "school"))
    base = (("?x", "kind", "school"), ("?x", "founded", "?n"))
    assert execute_values(q(*base, order=Order("?n", True)), kb) == {"B"}
    assert execute_values(q(*base, order=Order("?n", False)), kb) == {"A"}
    kb = kb_of(("A", "army", 900), ("B", "army", 2000))
    assert execute_values(q(("?x", "army", "?n"), filter=Filter("?n", "<", Decimal(1050))), kb) == {"A"}


def test_execute_unbound_order_variable():
    with pytest.raises(UnboundOrderVariable):
        execute_values(q(("?x", "borders", "Mexico"), order=Order("?n")), BORDERS)


def test_query_validation():
    with pytest.raises(ValueError):
        q(("?y", "borders", "Mexico"))  # answer variable missing
    with pytest.raises(ValueError):
        q(("?x", "borders", "Mexico"), ("?z", "borders", "?w"))  # disconnected


def test_query_json_round_trip():
    query = q(("?x", "p", "?c"), ("?c", "q", Literal("x y")), ("?x", "n", "?n"), order=Order("?n", False))
    assert ConjunctiveQuery.from_json(query.to_json()) == query
    query = q(("?x", "n", "?n"), filter=Filter("?n", ">", Decimal("10.5")))
    assert ConjunctiveQuery.from_json(query.to_json()) == query


def test_cvt_join():
    kb = kb_of(("Film", "starring", "perf1"), ("perf1", "actor", "Ann"), ("Film2", "starring", "perf2"), ("perf2", "actor", "Bob"))
    assert execute_values(q(("?x", "starring", "?c"), ("?c", "actor", "Ann")), kb) == {"Film"}


def test_load_kb(tmp_path):
    path = tmp_path / "kb.tsv"
    path.write_text('# comment\nFilm\tstarring\tperf_1#cvt\nperf_1\tactor\tAnn_Lee\nAnn_Lee\tage\t41\nAnn_Lee\tname\t"Ann Lee"\n')
    kb = load_kb(path)
    assert kb.is_cvt("perf_1") and not kb.is_cvt("Film")
    assert kb.objects("Ann_Lee", "age") == [Decimal(41)]
    assert kb.name("Ann_Lee") == "Ann Lee" and kb.name("Film") == "Film"
    path.write_text("a\tb\n")
    with pytest.raises(ParseError):
        load_kb(path)


def test_templates(tmp_path, demo_templates):
    t = find_template(demo_templates, ["book.works_written"], "comp")
    assert t.render("Ember Road") == "the author who wrote Ember Road"
    with pytest.raises(MissingTemplate):
        find_template(demo_templates, ["no.such"], "conj")
    with pytest.raises(ValueError):
        PredicateTemplate(("p",), "no slot", "conj", "and is")
    path = tmp_path / "t.tsv"
    path.write_text("p\tOBJ and OBJ\tconj:and is\n")
    with pytest.raises(ParseError):
        load_templates(path)


def test_conj_glue_rendering():
    seed = SeedExample("Who was born in London", q(("?x", "born_in", "London")), {})
    t = PredicateTemplate(("book.works_written",), "the author who wrote OBJ", "conj", "and is")
    mg, splits, phrase = make_mg_question(seed, "conj", t, "Without End")
    assert mg == "Who was born in London and is the author who wrote Without End"
    assert splits == (5,)
    assert tokenize(mg).tokens[5] == "and"


def test_composition_rendering_brackets_the_phrase():
    text = "what movies did Mira Castell star in"
    seed = SeedExample(text, q(("?x", "starring", "Mira_Castell")), {"Mira_Castell": (16, 28)})
    t = PredicateTemplate(("award.won",), "the winner of OBJ", "comp", "")
    mg, (r1, r2), phrase = make_mg_question(seed, "comp", t, "Harrow Prize", "Mira_Castell")
    toks = tokenize(mg).tokens
    assert " ".join(toks[r1:r2]) == "the winner of Harrow Prize"
    assert toks[:r1] + toks[r2:] == ("what", "movies", "did", "star", "in")


def test_conj_strictness():
    kb = kb_of(("x1", "kind", "film"), ("x2", "kind", "film"), ("x1", "genre", "Drama"), ("x2", "genre", "Western"),
               ("x1", "lang", "English"), ("x2", "lang", "English"))
    seed = SeedExample("what films exist", q(("?x", "kind", "film")), {})
    templates = [PredicateTemplate(("genre",), "a OBJ film", "conj", "and is"),
                 PredicateTemplate(("lang",), "a film in OBJ", "conj", "and is")]
    recs = conj_candidates(seed, kb, templates)
    # English holds of both members and is rejected
    assert sorted(r.inserted for r in recs) == ["a Drama film", "a Western film"]
    assert all(len(r.answers) == 1 for r in recs)


def test_superlative_skips_ties_and_uncommon_predicates():
    seed = SeedExample("what things", q(("?x", "kind", "t")), {})
    t = [PredicateTemplate(("size",), "has the OBJ size", "super", "and")]
    kb = kb_of(("a", "kind", "t"), ("b", "kind", "t"), ("c", "kind", "t"), ("a", "size", 3), ("b", "size", 7), ("c", "size", 7))
    recs = superlative_candidates(seed, kb, t)
    assert [r.answers for r in recs] == [["a"]]  # the maximum 7 is tied
    kb = kb_of(("a", "kind", "t"), ("b", "kind", "t"), ("a", "size", 3))
    assert superlative_candidates(seed, kb, t) == []


def test_comparative_uses_gap_midpoints():
    assert gap_midpoints([Decimal(900), Decimal(2000), Decimal(900)]) == [Decimal(1450)]
    seed = SeedExample("which countries border Mexico", q(("?x", "borders", "Mexico")), {})
    kb = kb_of(("A", "borders", "Mexico"), ("B", "borders", "Mexico"), ("A", "army", 900), ("B", "army", 2000))
    t = [PredicateTemplate(("army",), "has an army size of OBJ", "compar", "and")]
    recs = comparative_candidates(seed, kb, t)
    assert sorted((r.inserted, tuple(r.answers)) for r in recs) == [
        ("has an army size of less than 1450", ("A",)),
        ("has an army size of more than 1450", ("B",)),
    ]


def test_comparative_filter_bounds():
    kb = kb_of(("A", "army", 900), ("B", "army", 2000))
    base = (("?x", "army", "?n"),)
    assert execute_values(q(*base, filter=Filter("?n", "<", Decimal(1050))), kb) == {"A"}
    assert execute_values(q(*base, filter=Filter("?n", "<", Decimal(800))), kb) == set()
    assert execute_values(q(*base, filter=Filter("?n", "<", Decimal(3000))), kb) == {"A", "B"}


def test_composition_ambiguity_filter():
    kb = kb_of(("Film", "starring", "Ann"), ("Ann", "award", "Prize1"), ("Ann", "lang", "Corvian"), ("Bob", "lang", "Corvian"))
    seed = SeedExample("what did Ann star in", q(("?x", "starring", "Ann")), {"Ann": (9, 12)})
    t = [PredicateTemplate(("award",), "the winner of OBJ", "comp", ""),
         PredicateTemplate(("lang",), "the person who speaks OBJ", "comp", "")]
    recs = composition_candidates(seed, kb, t)
    assert [r.mg_question for r in recs] == ["what did the winner of Prize1 star in"]
    assert execute_values(recs[0].query, kb) == {"Film"}


def test_leak_filter():
    assert leaks_answer("who is the spouse of Ann Lee", ["Ann Lee"])
    assert not leaks_answer("who is the spouse of Ann Leeds", ["Ann Lee"])
    assert leaks_answer("what happened in 1990", [" 1990 "])


def test_allocate_and_quota():
    assert allocate(100, {"comp": 45, "conj": 45, "super": 5, "compar": 5}) == {"comp": 45, "conj": 45, "super": 5, "compar": 5}
    assert sum(allocate(37, {"comp": 45, "conj": 45, "super": 5, "compar": 5}).values()) == 37


@given(st.integers(1, 400), st.dictionaries(st.sampled_from(["comp", "conj", "super", "compar"]), st.integers(1, 50), min_size=1))
def test_allocate_is_within_one_of_exact_share(n, quota):
    counts = allocate(n, quota)
    total = sum(quota.values())
    assert sum(counts.values()) == n
    for k, v in quota.items():
        assert abs(counts[k] - n * v / total) < 1


def test_demo_pools_cover_every_type(demo_seeds, demo_kb, demo_templates):
    pools = candidate_pools(demo_seeds, demo_kb, demo_templates)
    assert min(len(v) for v in pools.values()) >= 10


def test_dataset_is_deterministic_and_respects_quota(tmp_path, demo_seeds, demo_kb, demo_templates, synonyms):
    def run(path):
        recs = generate_dataset(demo_seeds, demo_kb, demo_templates, 100, np.random.default_rng(7), synonyms, 0.1)
        write_records(recs, path)
        return recs

    recs = run(tmp_path / "a.jsonl")
    run(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    counts = {k: sum(r.comp_type == k for r in recs) for k in ("comp", "conj", "super", "compar")}
    for k, target in {"comp": 45, "conj": 45, "super": 5, "compar": 5}.items():
        assert abs(counts[k] - target) <= 2
    back = read_records(tmp_path / "a.jsonl")
    assert [r.to_json() for r in back] == [r.to_json() for r in recs]


def test_synonym_noise_keeps_token_count(synonyms):
    rng = np.random.default_rng(0)
    toks = ["what", "movies", "did", "Ann", "star", "in"]
    assert substitute_synonyms(toks, synonyms, 0.0, rng) == toks
    swapped = substitute_synonyms(toks, synonyms, 1.0, rng)
    assert len(swapped) == len(toks) and swapped[1] == "films" and swapped[3] == "Ann"


def test_segment_swap_moves_the_conjunct_first(demo_seeds, demo_kb, demo_templates):
    rec = conj_candidates(demo_seeds[0], demo_kb, demo_templates)[0]
    out = noise_record(rec, {}, np.random.default_rng(0), 0.0, swap_rate=1.0)
    assert out.question.startswith(rec.inserted)
    assert out.mg_question == rec.mg_question
    assert split_consistent(out)
