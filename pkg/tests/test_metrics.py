import pytest
from hypothesis import given
from hypothesis import strategies as st

from bestk.metrics import (
    ExampleOutputs,
    aggregate,
    distinct_n,
    lcs_length,
    percent,
    rouge_l,
    rouge_n,
    tokenize,
)

TOL = 1e-9
words = st.sampled_from(["a", "b", "c", "d", "e"])
sentences = st.lists(words, min_size=1, max_size=8).map(" ".join)


def test_distinct_examples():
    assert distinct_n(["the cat", "the dog"], 1) == pytest.approx(0.75, abs=TOL)
    assert distinct_n(["a b c d"], 1) == 1.0
    one = distinct_n(["a b a"], 1)
    assert distinct_n(["a b a", "a b a"], 1) == pytest.approx(one / 2, abs=TOL)
    assert distinct_n([], 2) == 0.0


def test_rouge_n_examples():
    assert rouge_n("a b c", ["a b"], 1) == pytest.approx(0.8, abs=TOL)
    assert rouge_n("a b c", ["a b c"], 2) == 1.0
    assert rouge_n("a b", ["c d"], 1) == 0.0
    assert rouge_n("", ["a"], 1) == 0.0
    assert rouge_n("a b c", ["x", "a b"], 1) == pytest.approx(0.8, abs=TOL)


def test_rouge_n_clips_counts():
    # candidate repeats "a" three times; reference has it once
    assert rouge_n("a a a", ["a b"], 1) == pytest.approx(2 * (1 / 3) * 0.5 / (1 / 3 + 0.5), abs=TOL)


def test_rouge_l_examples():
    assert rouge_l("a x b", ["a b"]) == pytest.approx(0.8, abs=TOL)
    assert rouge_l("a b c", ["a b c"]) == 1.0
    assert rouge_l("b a", ["a b"]) == pytest.approx(0.5, abs=TOL)
    assert rouge_l("", ["a"]) == 0.0


def test_tokenization_lowercases():
    assert tokenize("The  Cat\tsat") == ["the", "cat", "sat"]
    assert rouge_n("The Cat", ["the cat"], 1) == 1.0


def test_lcs():
    assert lcs_length("a b c b d a b".split(), "b d c a b a".split()) == 4


def test_aggregate_examples():
    rep = aggregate([ExampleOutputs(["a b c"], ["a b c"])])
    assert rep.rouge_oracle == rep.rouge_mean == {"R1": 1.0, "R2": 1.0, "RL": 1.0}

    # outputs with ROUGE-1 F1 0.8 and 0.4 against "a b"
    rep2 = aggregate([ExampleOutputs(["a b c", "a c d"], ["a b"])])
    assert rouge_n("a c d", ["a b"], 1) == pytest.approx(0.4, abs=TOL)
    assert rep2.rouge_oracle["R1"] == pytest.approx(0.8, abs=TOL)
    assert rep2.rouge_mean["R1"] == pytest.approx(0.6, abs=TOL)
    assert rep2.rouge_top["R1"] == pytest.approx(0.8, abs=TOL)

    data = [ExampleOutputs(["a"], ["a"]) for _ in range(9)] + [ExampleOutputs([], ["a"], completed=False)]
    assert aggregate(data).completion_rate == pytest.approx(0.9, abs=TOL)


def test_aggregate_counts_and_empty():
    rep = aggregate([ExampleOutputs(["a b", "a b", "c"], ["a"]), ExampleOutputs(["d"], ["d"])])
    assert rep.S == 2.0 and rep.unique_S == 1.5
    empty = aggregate([])
    assert empty.examples == 0 and empty.distinct == {1: 0.0, 2: 0.0, 3: 0.0}
    assert percent(0.256) == pytest.approx(25.6) and percent(None) == 0.0


@given(sentences)
def test_self_rouge_is_one(x):
    assert rouge_n(x, [x], 1) == 1.0 and rouge_l(x, [x]) == 1.0


@given(st.lists(sentences, min_size=1, max_size=6), st.integers(1, 3))
def test_duplicate_output_never_raises_distinct(outs, n):
    assert distinct_n(outs + [outs[0]], n) <= distinct_n(outs, n) + 1e-12


@given(st.lists(sentences, min_size=1, max_size=6), st.lists(sentences, min_size=1, max_size=3))
def test_oracle_dominates_mean_and_duplicates_keep_oracle(outs, refs):
    rep = aggregate([ExampleOutputs(outs, refs)])
    dup = aggregate([ExampleOutputs(outs + [outs[-1]], refs)])
    for k in ("R1", "R2", "RL"):
        assert rep.rouge_oracle[k] >= rep.rouge_mean[k] - 1e-12
        assert dup.rouge_oracle[k] == rep.rouge_oracle[k]
        assert 0.0 <= rep.rouge_mean[k] <= 1.0
    assert rep.unique_S <= rep.S
    for v in rep.distinct.values():
        assert 0.0 <= v <= 1.0
