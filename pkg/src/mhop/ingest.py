"""Parsing, cleaning, and deduplication of raw multi-hop source files.

The accepted input is an array of case objects in the MQuAKE-T field layout.
Several field names are recognized as aliases (first match wins) and every
unrecognized top-level field is preserved verbatim in the record's extras, so
round trips are lossless even for unknown dataset variants.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .model import (
    EditSpec,
    FactTriple,
    HopStep,
    SourceRecord,
    source_record_to_dict,
    validate,
)
from .scoring import normalize

logger = logging.getLogger(__name__)

_QUESTION_KEYS = ("questions", "question")
_ANSWER_KEYS = ("new_answer", "answer")
_ALIAS_KEYS = ("new_answer_alias", "answer_alias")
_HOPS_KEYS = ("new_single_hops", "single_hops")
_EDITS_KEY = "requested_rewrite"
_KEY_SEP = "\x1f"


class DatasetFormatError(ValueError):
    """Raised when a source file is syntactically or structurally unusable."""


@dataclass(frozen=True)
class DedupeReport:
    """Which cases were dropped as duplicates, and of whom."""

    dropped_case_ids: tuple[str, ...]
    duplicate_of: dict[str, str]


def _missing(index: int, name: str, accepted: tuple[str, ...] | None = None) -> DatasetFormatError:
    hint = f" (expected one of {', '.join(repr(k) for k in accepted)})" if accepted else ""
    return DatasetFormatError(f"case {index}: missing required field {name!r}{hint}")


def _as_text(value: Any) -> str:
    if isinstance(value, str):
        return value
    return str(value)


def _as_text_list(value: Any) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    if isinstance(value, list):
        return tuple(_as_text(item) for item in value)
    return (_as_text(value),)


def _parse_triple(value: Any, index: int, hop: int) -> FactTriple:
    if isinstance(value, dict):
        try:
            return FactTriple(
                _as_text(value["subject"]),
                _as_text(value["relation"]),
                _as_text(value["object"]),
            )
        except KeyError as exc:
            raise DatasetFormatError(
                f"case {index}: hop {hop} triple missing key {exc.args[0]!r}"
            ) from exc
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return FactTriple(_as_text(value[0]), _as_text(value[1]), _as_text(value[2]))
    raise DatasetFormatError(
        f"case {index}: hop {hop} triple must be an object or a 3-element array"
    )


def _parse_hop(obj: Any, index: int, hop_ordinal: int) -> HopStep:
    if not isinstance(obj, dict):
        raise DatasetFormatError(f"case {index}: hop {hop_ordinal} must be an object")
    triple = None
    if "triple" in obj:
        triple = _parse_triple(obj["triple"], index, hop_ordinal)
    question = obj.get("question")
    if question is None:
        if triple is None:
            raise _missing(index, f"hop_chain[{hop_ordinal - 1}].question")
        question = f"What is the {triple.relation} of {triple.subject}?"
    answer = obj.get("answer")
    if answer is None:
        raise _missing(index, f"hop_chain[{hop_ordinal - 1}].answer")
    aliases = _as_text_list(obj.get("answer_alias", []))
    return HopStep(
        index=hop_ordinal,
        question=_as_text(question),
        answer=_as_text(answer),
        answer_aliases=aliases,
        triple=triple,
    )


def _rewrite_target(entry: dict[str, Any], key: str) -> str | None:
    value = entry.get(key)
    if value is None:
        return None
    if isinstance(value, dict):
        return _as_text(value.get("str", ""))
    return _as_text(value)


def _parse_edit(entry: Any, index: int, ordinal: int) -> EditSpec:
    if not isinstance(entry, dict):
        raise DatasetFormatError(f"case {index}: rewrite {ordinal} must be an object")
    subject = entry.get("subject")
    if subject is None:
        raise _missing(index, f"edits[{ordinal}].subject")
    relation = entry.get("relation", entry.get("relation_id"))
    if relation is None:
        raise _missing(index, f"edits[{ordinal}].relation", ("relation", "relation_id"))
    new_object = _rewrite_target(entry, "target_new")
    if new_object is None:
        raise _missing(index, f"edits[{ordinal}].target_new")
    old_object = _rewrite_target(entry, "target_true")
    return EditSpec(
        subject=_as_text(subject),
        relation=_as_text(relation),
        old_object=old_object if old_object is not None else "",
        new_object=new_object,
    )


def parse_case(obj: Any, index: int) -> SourceRecord:
    """Map one raw case object onto a SourceRecord (1-based hop indices).

    ``index`` is the 0-based position in the file, used both for error
    messages and to synthesize a case_id when the source has none.
    """
    if not isinstance(obj, dict):
        raise DatasetFormatError(f"case {index}: expected an object, got {type(obj).__name__}")

    consumed: set[str] = set()

    def pick(keys: tuple[str, ...]) -> Any:
        for key in keys:
            if key in obj:
                consumed.add(key)
                return obj[key]
        return None

    questions_raw = pick(_QUESTION_KEYS)
    if questions_raw is None:
        raise _missing(index, "questions", _QUESTION_KEYS)
    question_variants = _as_text_list(questions_raw)

    answer_raw = pick(_ANSWER_KEYS)
    if answer_raw is None:
        raise _missing(index, "final_answer", _ANSWER_KEYS)
    final_answer = _as_text(answer_raw)

    aliases_raw = pick(_ALIAS_KEYS)
    aliases = _as_text_list(aliases_raw) if aliases_raw is not None else ()

    hops_raw = pick(_HOPS_KEYS)
    if hops_raw is None:
        raise _missing(index, "hop_chain", _HOPS_KEYS)
    if not isinstance(hops_raw, list):
        raise DatasetFormatError(f"case {index}: hop chain must be an array")
    hop_chain = tuple(_parse_hop(hop, index, k + 1) for k, hop in enumerate(hops_raw))

    edits_raw = pick((_EDITS_KEY,))
    if edits_raw is None:
        raise _missing(index, "edits", (_EDITS_KEY,))
    if not isinstance(edits_raw, list):
        raise DatasetFormatError(f"case {index}: {_EDITS_KEY} must be an array")
    edits = tuple(_parse_edit(entry, index, k) for k, entry in enumerate(edits_raw))

    if "case_id" in obj:
        consumed.add("case_id")
        case_id = _as_text(obj["case_id"])
    else:
        case_id = f"{index + 1:06d}"

    extras = {key: value for key, value in obj.items() if key not in consumed}
    return SourceRecord(
        case_id=case_id,
        question_variants=question_variants,
        final_answer=final_answer,
        final_answer_aliases=aliases,
        hop_chain=hop_chain,
        edits=edits,
        extras=extras,
    )


def parse_source(path: str | Path) -> list[SourceRecord]:
    """Parse a source dataset file into records, preserving file order."""
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"dataset file not found: {file_path}")
    text = file_path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(
            f"malformed dataset {file_path}: {exc.msg} at line {exc.lineno}, column {exc.colno}"
        ) from exc
    if not isinstance(data, list):
        raise DatasetFormatError(f"malformed dataset {file_path}: expected a top-level array")
    return [parse_case(obj, index) for index, obj in enumerate(data)]


def write_source(records: list[SourceRecord], path: str | Path) -> None:
    """Write records in the canonical source layout (parse_source inverse)."""
    payload = [source_record_to_dict(record) for record in records]
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _trimmed(text: str) -> str:
    return text.strip()


def _trim_record(record: SourceRecord) -> SourceRecord:
    hops = []
    for hop in record.hop_chain:
        triple = hop.triple
        if triple is not None:
            triple = FactTriple(
                _trimmed(triple.subject), _trimmed(triple.relation), _trimmed(triple.object)
            )
        hops.append(
            HopStep(
                index=hop.index,
                question=_trimmed(hop.question),
                answer=_trimmed(hop.answer),
                answer_aliases=tuple(_trimmed(a) for a in hop.answer_aliases),
                triple=triple,
            )
        )
    edits = tuple(
        EditSpec(
            _trimmed(edit.subject),
            _trimmed(edit.relation),
            _trimmed(edit.old_object),
            _trimmed(edit.new_object),
        )
        for edit in record.edits
    )
    return SourceRecord(
        case_id=_trimmed(record.case_id),
        question_variants=tuple(_trimmed(q) for q in record.question_variants),
        final_answer=_trimmed(record.final_answer),
        final_answer_aliases=tuple(_trimmed(a) for a in record.final_answer_aliases),
        hop_chain=tuple(hops),
        edits=edits,
        extras=record.extras,
    )


def clean(records: list[SourceRecord]) -> list[SourceRecord]:
    """Trim text fields and drop records that fail validation (reason logged).

    Extras are never touched. Idempotent: cleaning a cleaned list is a no-op.
    """
    survivors = []
    for record in records:
        trimmed = _trim_record(record)
        violations = validate(trimmed)
        if violations:
            logger.warning(
                "dropping case %s: %s",
                trimmed.case_id or "<no id>",
                "; ".join(str(v) for v in violations),
            )
            continue
        survivors.append(trimmed)
    return survivors


def dedupe_key(record: SourceRecord) -> str:
    first = record.question_variants[0] if record.question_variants else ""
    return normalize(first) + _KEY_SEP + normalize(record.final_answer)


def dedupe(records: list[SourceRecord]) -> tuple[list[SourceRecord], DedupeReport]:
    """Drop later records whose (question, answer) key repeats an earlier one."""
    seen: dict[str, str] = {}
    kept: list[SourceRecord] = []
    dropped: list[str] = []
    duplicate_of: dict[str, str] = {}
    for record in records:
        key = dedupe_key(record)
        if key in seen:
            dropped.append(record.case_id)
            duplicate_of[record.case_id] = seen[key]
            logger.warning("dropping duplicate case %s of %s", record.case_id, seen[key])
            continue
        seen[key] = record.case_id
        kept.append(record)
    return kept, DedupeReport(tuple(dropped), duplicate_of)
