import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qdecomp import align
from qdecomp.align import (
    EmbeddingStore,
    build_matrix,
    comp_split,
    conj_split,
    copy_index,
    label_record,
    lemma,
    make_supervision,
    similarity,
)
from qdecomp.decomp import Program, from_tokens, tokenize
from qdecomp.errors import EmptyQuestion, InvalidSplit, ParseError

from oracles import comp_split_brute, conj_split_brute


def vec_store(pairs):
    return EmbeddingStore(2, {k: np.array(v, dtype=float) for k, v in pairs.items()})


@pytest.mark.parametrize(
    "word, expected",
    [("films", "film"), ("Films", "film"), ("cities", "city"), ("wrote", "write"), ("directed", "direct"),
     ("starring", "star"), ("boxes", "box"), ("bus", "bus"), ("movies", "movie")],
)
def test_lemma(word, expected):
    assert lemma(word) == expected


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=12))
def test_lemma_is_idempotent(word):
    assert lemma(lemma(word)) == lemma(word)


def test_similarity_branches():
    store = vec_store({"car": [1, 0], "auto": [0.8, 0.6], "tree": [0, 1]})
    assert similarity("film", "Films", None) == 1.0
    assert similarity("zyzzyva", "zyzzyva", store) == 1.0  # lemma before embeddings
    assert similarity("car", "tree", store) == 0.0
    assert similarity("car", "auto", store) == pytest.approx(0.8)
    assert similarity("car", "auto", store, threshold=0.9) == 0.0
    assert similarity("?", "?", store) == 0.0


words = st.sampled_from(["car", "auto", "tree", "film", "films", ",", "x"])


@given(words, words)
def test_similarity_is_symmetric(a, b):
    store = vec_store({"car": [1, 0], "auto": [0.8, 0.6], "tree": [0, 1]})
    assert similarity(a, b, store) == similarity(b, a, store)


def test_build_matrix_orientation_and_identity():
    nl = tokenize("what films did Ann direct")
    mg = tokenize("what film did Ann direct ?")
    a = build_matrix(nl, mg, None)
    assert a.shape == (5, 6)
    assert np.all(np.diag(a[:, :5]) == 1.0)
    assert a[:, 5].sum() == 0.0
    disjoint = build_matrix(tokenize("aa bb"), tokenize("cc dd"), None)
    assert not disjoint.any()
    one = build_matrix(tokenize("aa bb"), tokenize("cc bb"), None)
    assert one.sum() == 1.0 and one[1, 1] == 1.0


def test_embedding_file_round_trip(tmp_path):
    store = vec_store({"car": [1, 0], "tree": [0.25, -1]})
    path = tmp_path / "emb.txt"
    store.dump(path)
    again = EmbeddingStore.load(path)
    assert again.dimension == 2 and np.allclose(again.get("tree"), [0.25, -1])
    path.write_text("a 1 2\nb 1\n")
    with pytest.raises(ParseError, match="line 2"):
        EmbeddingStore.load(path)


def test_conj_split_examples():
    split = conj_split(np.eye(4), 2)
    assert (split.p, split.reordered, split.score) == (2, False, 4)
    anti = np.fliplr(np.eye(4))
    split = conj_split(anti, 2)
    assert (split.p, split.reordered, split.score) == (2, True, 4)
    split = conj_split(np.zeros((4, 4)), 2)
    assert (split.p, split.reordered, split.score) == (0, False, 0)
    with pytest.raises(InvalidSplit):
        conj_split(np.eye(4), 0)


def test_comp_split_examples():
    assert comp_split(np.eye(7), 2, 5) == (2, 5)
    assert comp_split(np.zeros((5, 5)), 1, 3) == (0, 0)
    # middle block shifted one row down
    a = np.zeros((7, 7))
    a[0, 0] = a[1, 1] = 1
    a[3, 2] = a[4, 3] = a[5, 4] = 1
    a[6, 5] = a[6, 6] = 1
    assert comp_split(a, 2, 5) == comp_split_brute(a, 2, 5) == (2, 6)
    with pytest.raises(InvalidSplit):
        comp_split(np.eye(3), 2, 2)


def test_copy_index():
    nl = tokenize("What film featured Taylor Swift and was directed by Deborah Aquila")
    mg = tokenize("What films featured Taylor Swift and is the film directed by Deborah Aquila")
    a = build_matrix(nl, mg, None)
    split = conj_split(a, 5)
    assert split.p == 5
    assert copy_index(a, split.p, 5) == 1
    assert copy_index(np.zeros((4, 4)), 2, 2) == -1
    tie = np.zeros((4, 4))
    tie[0, 3] = tie[1, 3] = 0.9
    assert copy_index(tie, 2, 2) == 0


matrices = st.integers(1, 12).flatmap(
    lambda n: st.integers(2, 12).flatmap(
        lambda m: arrays(np.float64, (n, m), elements=st.sampled_from([0.0, 0.0, 0.41, 0.5, 0.77, 1.0]))
    )
)


@settings(max_examples=200, deadline=None)
@given(matrices, st.data())
def test_conj_split_matches_brute_force(a, data):
    r = data.draw(st.integers(1, a.shape[1] - 1))
    got = conj_split(a, r)
    p, reordered, score = conj_split_brute(a, r)
    assert (got.p, got.reordered) == (p, reordered)
    assert got.score == pytest.approx(score)


@settings(max_examples=200, deadline=None)
@given(matrices, st.data())
def test_comp_split_matches_brute_force(a, data):
    r1 = data.draw(st.integers(0, a.shape[1] - 1))
    r2 = data.draw(st.integers(r1 + 1, a.shape[1]))
    assert comp_split(a, r1, r2) == comp_split_brute(a, r1, r2)


@settings(max_examples=100, deadline=None)
@given(matrices, st.data(), st.integers(1, 3), st.integers(1, 3))
def test_split_scores_ignore_zero_padding(a, data, extra_rows, extra_cols):
    n, m = a.shape
    r = data.draw(st.integers(1, m - 1))
    padded = np.zeros((n + extra_rows, m + extra_cols))
    padded[:n, :m] = a
    assert conj_split(padded, r).score == pytest.approx(conj_split(a, r).score)


@pytest.mark.parametrize("n", range(2, 7))
def test_block_swap_flags_reordering(n):
    for r in range(1, n):
        mg = list(range(n))
        for swapped in (False, True):
            nl = mg[r:] + mg[:r] if swapped else mg
            a = np.array([[1.0 if x == y else 0.0 for y in mg] for x in nl])
            split = conj_split(a, r)
            assert split.reordered is swapped
            assert split.score == n
            assert split.p == (n - r if swapped else r)


def test_identical_record_recovers_mg_splits():
    mg = "what movies did the person married to Simon Arkwright star in"
    ex = label_record(tokenize(mg), tokenize(mg), "comp", (3, 9), None)
    assert ex.label == Program.comp(3, 8)
    mg = "what movies did Mira Castell star in and is the film directed by Ava Kessler"
    ex = label_record(tokenize(mg), tokenize(mg), "conj", (7,), None)
    assert ex.label.i == 7 and not ex.reordered


def test_make_supervision_counts_drops():
    good = {"question": "what films did Ann direct and is a drama", "mg_question": "what films did Ann direct and is a drama",
            "comp_type": "conj", "mg_splits": [5]}
    short = {"question": "Ann direct", "mg_question": "what films did Ann direct and is a drama",
             "comp_type": "conj", "mg_splits": [5]}
    degenerate = {"question": "zz yy xx ww", "mg_question": "what films did Ann direct and is a drama",
                  "comp_type": "conj", "mg_splits": [5]}
    sup = {"question": "what is the largest", "mg_question": "what is the largest", "comp_type": "super", "mg_splits": [2]}
    result = make_supervision([good, short, degenerate, degenerate, sup], None)
    assert len(result.examples) == 1
    assert result.dropped == 3
    assert result.skipped == 1


def test_supervision_file_round_trip(tmp_path):
    mg = "what movies did the person married to Simon Arkwright star in"
    ex = label_record(tokenize(mg), tokenize(mg), "comp", (3, 9), None)
    path = tmp_path / "sup.jsonl"
    align.write_supervision([ex], path)
    row = json.loads(path.read_text())
    assert set(row) == {"question", "tokens", "program", "comp_type", "reordered", "mg_splits"}
    (back,) = align.read_supervision(path)
    assert back.label == ex.label and back.nl.tokens == ex.nl.tokens


def test_build_matrix_rejects_empty():
    with pytest.raises(EmptyQuestion):
        build_matrix(from_tokens(["a"]), type(from_tokens(["a"]))("", (), ()), None)
