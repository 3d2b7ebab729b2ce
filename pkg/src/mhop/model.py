"""Shared domain types for the multi-hop QA harness.

Every type is a frozen dataclass holding plain values and tuples, immutable
after construction and therefore safe to share across threads. Construction
never raises on bad data; :func:`validate` reports invariant violations
instead, so a damaged source case can be inspected rather than lost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

MODES = ("direct", "decomposed-scripted", "decomposed-model")


@dataclass(frozen=True)
class FactTriple:
    """A (subject, relation, object) fact."""

    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class EditSpec:
    """A fact rewrite: (subject, relation) moves from old_object to new_object."""

    subject: str
    relation: str
    old_object: str
    new_object: str


@dataclass(frozen=True)
class HopStep:
    """One step of a decomposition chain, with its supporting fact if known."""

    index: int
    question: str
    answer: str
    answer_aliases: tuple[str, ...] = ()
    triple: FactTriple | None = None


@dataclass(frozen=True)
class SourceRecord:
    """One multi-hop case: question paraphrases, edits, hop chain, final answer.

    ``extras`` carries unrecognized source fields verbatim so unknown data
    survives a parse/serialize round trip.
    """

    case_id: str
    question_variants: tuple[str, ...]
    final_answer: str
    final_answer_aliases: tuple[str, ...]
    hop_chain: tuple[HopStep, ...]
    edits: tuple[EditSpec, ...]
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AlpacaRecord:
    """One instruction-tuning instance (instruction / input / output / history)."""

    instruction: str
    input: str
    output: str
    history: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class EvalOutcome:
    """Per-case prediction record produced by the evaluation runners."""

    case_id: str
    mode: str
    prediction: str
    gold: str
    gold_aliases: tuple[str, ...]
    verdict: bool
    transcript: tuple[tuple[str, str], ...] = ()
    hop_count: int = 0
    truncated: bool = False
    note: str = ""


@dataclass(frozen=True)
class RunConfig:
    """Backend endpoint and decoding/execution parameters for one run.

    ``endpoint`` is either a base URL or the literal marker ``"mock"``.
    """

    endpoint: str = "mock"
    model_name: str = "mock"
    temperature: float = 0.0
    max_tokens: int = 256
    max_hops: int = 4
    parallelism: int = 1
    timeout_seconds: float = 30.0
    max_retries: int = 2
    seed: int = 42

    def __post_init__(self) -> None:
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


@dataclass(frozen=True)
class TrainConfigSpec:
    """Fine-tuning parameters to emit as a YAML config (never executed here)."""

    per_device_train_batch_size: int = 1
    gradient_accumulation_steps: int = 8
    learning_rate: float = 1.0e-4
    num_train_epochs: int = 2
    dataset_path: str = ""
    output_dir: str = ""


@dataclass(frozen=True)
class Violation:
    """One broken invariant, naming the field and the rule."""

    field: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        if self.detail:
            return f"{self.field}: {self.rule} ({self.detail})"
        return f"{self.field}: {self.rule}"


def _blank(text: str) -> bool:
    return not text or not text.strip()


def validate(record: SourceRecord) -> list[Violation]:
    """Check every per-record invariant; returns an empty list iff all hold.

    Validation reports rather than aborts, is deterministic, and compares
    entity labels as raw text (normalization belongs to the scorer alone).
    Uniqueness of case_ids is a dataset-level property checked at split time.
    """
    violations: list[Violation] = []

    if _blank(record.case_id):
        violations.append(Violation("case_id", "non-empty"))
    if not record.question_variants:
        violations.append(Violation("question_variants", "non-empty"))
    for i, variant in enumerate(record.question_variants):
        if _blank(variant):
            violations.append(Violation(f"question_variants[{i}]", "non-empty"))
    if _blank(record.final_answer):
        violations.append(Violation("final_answer", "non-empty"))

    chain = record.hop_chain
    if len(chain) < 2:
        violations.append(
            Violation("hop_chain", "at least two hops", f"got {len(chain)}")
        )
    for i, hop in enumerate(chain):
        if _blank(hop.question):
            violations.append(Violation(f"hop_chain[{i}].question", "non-empty"))
        if _blank(hop.answer):
            violations.append(Violation(f"hop_chain[{i}].answer", "non-empty"))
        if hop.triple is not None:
            triple = hop.triple
            if _blank(triple.subject) or _blank(triple.relation) or _blank(triple.object):
                violations.append(Violation(f"hop_chain[{i}].triple", "non-empty"))

    indices = tuple(hop.index for hop in chain)
    if chain and indices != tuple(range(1, len(chain) + 1)):
        violations.append(
            Violation("hop_chain", "non-contiguous hop indices", f"got {indices}")
        )

    if chain and not _blank(record.final_answer):
        last = chain[-1]
        if last.answer != record.final_answer and record.final_answer not in last.answer_aliases:
            violations.append(
                Violation(
                    "final_answer",
                    "final-answer/chain mismatch",
                    f"chain ends at {last.answer!r}, final answer is {record.final_answer!r}",
                )
            )

    if not record.edits:
        violations.append(Violation("edits", "non-empty"))
    for i, edit in enumerate(record.edits):
        if _blank(edit.subject):
            violations.append(Violation(f"edits[{i}].subject", "non-empty"))
        if _blank(edit.relation):
            violations.append(Violation(f"edits[{i}].relation", "non-empty"))
        if edit.new_object == edit.old_object:
            violations.append(
                Violation(f"edits[{i}]", "edit must change the fact", f"{edit.new_object!r}")
            )

    if len(chain) >= 2 and all(hop.triple is not None for hop in chain):
        for i in range(len(chain) - 1):
            here = chain[i].triple
            there = chain[i + 1].triple
            assert here is not None and there is not None
            if here.object != there.subject:
                violations.append(
                    Violation(
                        f"hop_chain[{i + 1}].triple",
                        "chain connectivity",
                        f"hop {i + 1} ends at {here.object!r} but hop {i + 2} starts at {there.subject!r}",
                    )
                )

    return violations


def triple_to_dict(triple: FactTriple) -> dict[str, str]:
    return {"subject": triple.subject, "relation": triple.relation, "object": triple.object}


def hop_to_dict(hop: HopStep) -> dict[str, Any]:
    out: dict[str, Any] = {
        "question": hop.question,
        "answer": hop.answer,
        "answer_alias": list(hop.answer_aliases),
    }
    if hop.triple is not None:
        out["triple"] = triple_to_dict(hop.triple)
    return out


def edit_to_dict(edit: EditSpec) -> dict[str, str]:
    return {
        "subject": edit.subject,
        "relation": edit.relation,
        "target_true": edit.old_object,
        "target_new": edit.new_object,
    }


def source_record_to_dict(record: SourceRecord) -> dict[str, Any]:
    """Canonical serialization of a record; the inverse of ingest parsing.

    Recognized fields are written under their preferred source names and the
    extras bag is passed through untouched, so serialize -> parse is the
    identity on valid records.
    """
    out: dict[str, Any] = {
        "case_id": record.case_id,
        "questions": list(record.question_variants),
        "new_answer": record.final_answer,
        "new_answer_alias": list(record.final_answer_aliases),
        "new_single_hops": [hop_to_dict(hop) for hop in record.hop_chain],
        "requested_rewrite": [edit_to_dict(edit) for edit in record.edits],
    }
    for key, value in record.extras.items():
        out.setdefault(key, value)
    return out
