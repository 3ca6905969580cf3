import math
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdecomp import comptree as ct
from qdecomp.backend import FixtureBackend
from qdecomp.comptree import Answer, AnswerSet, ScoredAnswer
from qdecomp.errors import (
    BackendError,
    EmptyQuestion,
    InvalidTree,
    MissingVar,
    MultipleVar,
    NonNumeric,
    NonSingleton,
    TransportError,
)

from oracles import norm


def fixture(table):
    return FixtureBackend({q: AnswerSet.of(*items) for q, items in table.items()})


# -- normalization ----------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("  Paris ", "paris"),
        ("New   York", "new york"),
        ('"Lutetia."', "lutetia"),
        ("7", "7"),
        ("7.0", "7"),
        ("7.50", "7.5"),
        ("0.1234567", "0.123457"),
        ("-0.0000001", "0"),
    ],
)
def test_normalize_text(raw, expected):
    assert ct.normalize_text(raw) == expected


def test_numeric_answers_share_keys_with_strings():
    assert Answer(7).normalized_form == Answer("7").normalized_form == Answer("7.000").normalized_form
    assert Answer(2.5).surface == "2.5"


def test_canonical_number_rejects_nonfinite():
    with pytest.raises(NonNumeric):
        ct.canonical_number(float("inf"))


def test_scored_answer_needs_finite_score():
    with pytest.raises(ValueError):
        ScoredAnswer(Answer("x"), math.nan)


@given(st.text(max_size=30))
def test_normalize_is_idempotent(text):
    once = ct.normalize_text(text)
    assert ct.normalize_text(once) == once


@given(st.decimals(min_value=-10**6, max_value=10**6, places=8, allow_nan=False))
def test_number_keys_are_canonical(d):
    key = Answer(d).normalized_form
    assert key == norm(d)
    assert Answer(key).normalized_form == key


# -- answer sets ------------------------------------------------------------


def test_answer_set_keeps_max_score():
    s = AnswerSet.of(("Paris", 0.2), ("paris", 0.9), ("Rome", 0.5))
    assert len(s) == 2
    assert s.get("paris").score == 0.9
    assert s.top().key == "paris"


def test_top_breaks_ties_by_key():
    s = AnswerSet.of(("b", 1.0), ("a", 1.0))
    assert s.top().key == "a"
    assert AnswerSet().top() is None


def test_intersection_takes_max_score():
    left = AnswerSet.of(("a", 0.1), ("b", 0.7))
    right = AnswerSet.of(("b", 0.3), ("c", 0.9))
    out = left.intersection(right)
    assert out.keys() == {"b"} and out.get("b").score == 0.7


answer_sets = st.lists(
    st.tuples(st.sampled_from(list("abcdefgh")), st.floats(-5, 5, allow_nan=False)), max_size=8
).map(lambda items: AnswerSet.of(*items))


@given(answer_sets, answer_sets)
def test_set_operations_are_commutative(a, b):
    assert a.union(b) == b.union(a)
    assert a.intersection(b) == b.intersection(a)
    assert a.intersection(b).keys() == a.keys() & b.keys()
    assert a.union(b).keys() == a.keys() | b.keys()


@given(answer_sets)
def test_intersection_with_self_is_identity(a):
    assert a.intersection(a) == a


# -- validation -------------------------------------------------------------


def test_templates_need_exactly_one_var():
    with pytest.raises(MissingVar):
        ct.check_template("birthplace of X")
    with pytest.raises(MultipleVar):
        ct.check_template("VAR and VAR")
    ct.check_template("birthplace of VAR")
    assert ct.count_var("VARIABLE VAR") == 1


@pytest.mark.parametrize(
    "tree",
    [
        ct.Node(func=ct.Func.SIMPQA, children=()),
        ct.simpqa(ct.simpqa("x")),
        ct.comp(ct.simpqa("x"), "y"),
        ct.comp("no variable", ct.simpqa("y")),
        ct.Node(func=ct.Func.CONJ, children=(ct.leaf("a"),)),
    ],
)
def test_invalid_trees(tree):
    with pytest.raises(InvalidTree):
        ct.validate(tree)


# -- operators --------------------------------------------------------------


def test_simpqa_rejects_empty_question():
    with pytest.raises(EmptyQuestion):
        ct.op_simpqa("  ", fixture({}))


def test_comp_substitutes_every_inner_answer():
    backend = fixture(
        {
            "birthplace of Ken Follett": [("Cardiff", 0.8)],
            "birthplace of Adam Zagajewski": [("Lviv", 0.6)],
        }
    )
    inner = AnswerSet.of(("Ken Follett", 0.5), ("Adam Zagajewski", 0.4))
    out = ct.op_comp("birthplace of VAR", inner, backend)
    assert out.scores() == {"cardiff": 0.8, "lviv": 0.6}


def test_comp_with_empty_inner_is_empty():
    assert len(ct.op_comp("birthplace of VAR", AnswerSet(), fixture({}))) == 0


def test_add_sums_singletons_with_min_score():
    out = ct.op_add(AnswerSet.of(("3", 0.9)), AnswerSet.of((4.5, 0.2)))
    (only,) = list(out)
    assert only.answer.as_number() == Decimal("7.5") and only.score == 0.2
    with pytest.raises(NonSingleton):
        ct.op_add(AnswerSet.of("1", "2"), AnswerSet.of("3"))
    with pytest.raises(NonNumeric):
        ct.op_add(AnswerSet.of("x"), AnswerSet.of("3"))


def test_figure_two_tree():
    tree = ct.conj(
        ct.comp("birthplace of VAR", ct.simpqa("the author of Without end")),
        ct.simpqa("cities hosted Euro 2012"),
    )
    backend = fixture(
        {
            "the author of Without end": [("Ken Follett", 0.9), ("Adam Zagajewski", 0.7)],
            "birthplace of Ken Follett": [("Cardiff", 0.6)],
            "birthplace of Adam Zagajewski": [("Lviv", 0.8)],
            "cities hosted Euro 2012": [("Lviv", 0.5), ("Warsaw", 0.9), ("Gdansk", 0.4)],
        }
    )
    out = ct.evaluate(tree, backend)
    assert out.scores() == {"lviv": 0.8}


def test_conj_of_two_leaves_asks_both():
    backend = fixture({"a": [("x", 1.0), ("y", 2.0)], "b": [("y", 0.5)]})
    assert ct.evaluate(ct.conj("a", "b"), backend).scores() == {"y": 2.0}


class FailingBackend:
    name = "failing"
    deterministic = True

    def answer(self, question):
        raise TransportError("down")


def test_backend_errors_name_the_failing_question():
    tree = ct.comp("birthplace of VAR", ct.simpqa("the author"))
    with pytest.raises(BackendError) as info:
        ct.evaluate(tree, FailingBackend())
    assert info.value.question == "the author"


def test_comp_fan_out_matches_sequential():
    table = {f"q {i}": [(f"a{i % 3}", i / 10)] for i in range(12)}
    table["inner"] = [(str(i), 0.0) for i in range(12)]
    backend = fixture(table)
    tree = ct.comp("q VAR", ct.simpqa("inner"))
    with ThreadPoolExecutor(4) as pool:
        assert ct.evaluate(tree, backend, pool) == ct.evaluate(tree, backend)
