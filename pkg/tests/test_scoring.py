from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhop.model import EvalOutcome
from mhop.scoring import accuracy, is_correct, normalize, summarize_verdicts


def test_normalize_trims_collapses_and_strips_punctuation() -> None:
    assert normalize("  Rishi  Sunak. ") == "rishi sunak"


def test_normalize_identity_on_already_normal_text() -> None:
    assert normalize("rishi sunak") == "rishi sunak"


def test_normalize_strips_leading_article() -> None:
    assert normalize("The United Kingdom") == "united kingdom"


def test_normalize_handles_nested_articles_and_quotes() -> None:
    assert normalize("the the Beatles") == "beatles"
    assert normalize("the 'Beatles'") == "beatles"
    assert normalize("An “Odyssey”.") == "odyssey"


@given(st.text(max_size=60))
@settings(max_examples=300, deadline=None)
def test_normalize_idempotent(text: str) -> None:
    once = normalize(text)
    assert normalize(once) == once


def test_is_correct_accepts_alias_match() -> None:
    assert is_correct("Siddhartha Gautama", "Gautama Buddha", ["Siddhartha Gautama"])


def test_is_correct_byte_identical_prediction() -> None:
    assert is_correct("Rishi Sunak", "Rishi Sunak", [])


def test_is_correct_rejects_unknown() -> None:
    assert not is_correct("UNKNOWN", "Rishi Sunak", [])


def test_is_correct_rejects_substring_containment() -> None:
    assert not is_correct("Boris Johnson and Rishi Sunak", "Rishi Sunak", [])


def test_is_correct_requires_gold() -> None:
    with pytest.raises(ValueError):
        is_correct("anything", "", [])


@given(st.text(max_size=40), st.text(min_size=1, max_size=40), st.lists(st.text(max_size=40), max_size=3))
@settings(max_examples=300, deadline=None)
def test_is_correct_invariant_under_prediction_normalization(
    prediction: str, gold: str, aliases: list[str]
) -> None:
    assert is_correct(prediction, gold, aliases) == is_correct(normalize(prediction), gold, aliases)


def test_is_correct_symmetric_in_gold_and_aliases() -> None:
    rng = random.Random(7)
    pool = ["Rishi Sunak", "The UK", "rishi sunak", "Boris", "London!", "  Paris "]
    for _ in range(200):
        prediction = rng.choice(pool)
        gold = rng.choice(pool)
        alias = rng.choice(pool)
        swapped = is_correct(prediction, alias, [gold])
        original = is_correct(prediction, gold, [alias])
        assert swapped == original


def _outcome(verdict: bool, mode: str = "direct") -> EvalOutcome:
    return EvalOutcome(
        case_id="c",
        mode=mode,
        prediction="p",
        gold="g",
        gold_aliases=(),
        verdict=verdict,
    )


def test_accuracy_counts_true_verdicts() -> None:
    summary = accuracy([_outcome(v) for v in (True, False, True, True)])
    assert summary.total == 4
    assert summary.correct == 3
    assert summary.accuracy == pytest.approx(0.75)
    assert not summary.empty


def test_accuracy_empty_set_flagged() -> None:
    summary = accuracy([])
    assert summary.total == 0
    assert summary.accuracy == 0.0
    assert summary.empty


def test_accuracy_planted_count_matches_independent_tally() -> None:
    rng = random.Random(13)
    verdicts = [True] * 743 + [False] * 257
    rng.shuffle(verdicts)
    independent = sum(1 for v in verdicts if v) / len(verdicts)
    summary = summarize_verdicts("direct", verdicts)
    assert summary.accuracy == pytest.approx(independent)
    assert summary.accuracy == pytest.approx(0.743)


def test_accuracy_permutation_invariant() -> None:
    rng = random.Random(3)
    outcomes = [_outcome(rng.random() < 0.6) for _ in range(200)]
    shuffled = outcomes[:]
    rng.shuffle(shuffled)
    assert accuracy(outcomes) == accuracy(shuffled)


def test_accuracy_labels_mixed_modes() -> None:
    outcomes = [_outcome(True, "direct"), _outcome(False, "decomposed-scripted")]
    assert accuracy(outcomes).mode == "mixed"
