"""Text normalization and alias-aware exact-match scoring.

All matching fuzziness in the harness lives here: the ingest dedupe key, the
triple-store keys, and the correctness verdicts all funnel through
:func:`normalize`, so there is exactly one place that defines when two entity
labels count as the same.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

_PUNCT = string.punctuation + "“”‘’«»…"
_ARTICLES = ("the ", "a ", "an ")


def _strip_once(text: str) -> str:
    out = text.strip(_PUNCT).strip()
    for article in _ARTICLES:
        if out.startswith(article):
            return out[len(article):]
    return out


def normalize(text: str) -> str:
    """Canonicalize an answer string for comparison.

    Unicode is composed (NFC), the text is case-folded, surrounding
    whitespace is trimmed, internal whitespace runs collapse to single
    spaces, and surrounding punctuation plus leading English articles are
    stripped. Stripping iterates to a fixpoint so the function is idempotent
    (a single pass would leave e.g. a quote that an article was hiding).
    """
    out = unicodedata.normalize("NFC", text).casefold()
    out = " ".join(out.split())
    while True:
        stripped = _strip_once(out)
        if stripped == out:
            return out
        out = stripped


def is_correct(prediction: str, gold: str, aliases: Sequence[str] = ()) -> bool:
    """True iff the prediction matches the gold label or any alias.

    Matching is full-string equality after :func:`normalize`; substring
    containment is deliberately not accepted.
    """
    if not gold:
        raise ValueError("gold answer must be non-empty")
    pred = normalize(prediction)
    if pred == normalize(gold):
        return True
    return any(pred == normalize(alias) for alias in aliases)


@dataclass(frozen=True)
class ScoreSummary:
    """Aggregate verdict counts for one evaluation mode."""

    mode: str
    total: int
    correct: int
    accuracy: float
    empty: bool = False

    def describe(self) -> str:
        if self.empty:
            return f"{self.mode}: no outcomes (empty set)"
        return (
            f"{self.mode}: {self.correct}/{self.total} correct, "
            f"accuracy {self.accuracy * 100:.2f}%"
        )


def summarize_verdicts(mode: str, verdicts: Iterable[bool]) -> ScoreSummary:
    flags = list(verdicts)
    total = len(flags)
    correct = sum(1 for flag in flags if flag)
    if total == 0:
        return ScoreSummary(mode=mode, total=0, correct=0, accuracy=0.0, empty=True)
    return ScoreSummary(mode=mode, total=total, correct=correct, accuracy=correct / total)


def accuracy(outcomes: Sequence) -> ScoreSummary:
    """Score a batch of evaluation outcomes by counting true verdicts.

    The mode label is taken from the outcomes when they all agree, otherwise
    the summary is labelled ``mixed``.
    """
    modes = {outcome.mode for outcome in outcomes}
    if len(modes) == 1:
        label = next(iter(modes))
    elif not modes:
        label = "empty"
    else:
        label = "mixed"
    return summarize_verdicts(label, (outcome.verdict for outcome in outcomes))
