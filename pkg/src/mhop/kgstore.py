"""Editable triple store and chain-walk oracle.

The store is the ground-truth substrate for dataset verification: hop facts
are materialized into a (subject, relation) -> object index, edits rewrite
entries in place, and multi-hop answers are derived by walking the relation
chain. Relations are treated as functional (single-valued), which is what
makes a chain walk well-defined.

Keys are matched on scorer-normalized text because subjects and relations
come from prose fields with inconsistent casing; stored object labels keep
their original spelling.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import EditSpec, SourceRecord
from .scoring import is_correct, normalize

logger = logging.getLogger(__name__)

ORIGINAL = "original"
EDITED = "edited"


class UnresolvableStep(Exception):
    """A chain walk hit a (subject, relation) key with no stored fact."""

    def __init__(self, hop_index: int, subject: str, relation: str) -> None:
        super().__init__(f"hop {hop_index}: no fact for ({subject}, {relation})")
        self.hop_index = hop_index
        self.subject = subject
        self.relation = relation


@dataclass(frozen=True)
class StoreEntry:
    object_label: str
    provenance: str  # ORIGINAL or EDITED


@dataclass(frozen=True)
class TripleStore:
    """Immutable fact index; every operation returns a new store value.

    ``conflicts`` records overwrites observed while building (same key, a
    different object seen later), kept for auditability.
    """

    entries: dict[tuple[str, str], StoreEntry] = field(default_factory=dict)
    conflicts: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, subject: str, relation: str) -> str | None:
        entry = self.entries.get(_key(subject, relation))
        return entry.object_label if entry else None

    def provenance(self, subject: str, relation: str) -> str | None:
        entry = self.entries.get(_key(subject, relation))
        return entry.provenance if entry else None


def _key(subject: str, relation: str) -> tuple[str, str]:
    return (normalize(subject), normalize(relation))


def build_store(records: Iterable[SourceRecord]) -> TripleStore:
    """Materialize every hop triple, later records overwriting on conflict."""
    entries: dict[tuple[str, str], StoreEntry] = {}
    conflicts: list[str] = []
    for record in records:
        for hop in record.hop_chain:
            triple = hop.triple
            if triple is None:
                continue
            key = _key(triple.subject, triple.relation)
            existing = entries.get(key)
            if existing is not None and normalize(existing.object_label) != normalize(triple.object):
                message = (
                    f"({triple.subject}, {triple.relation}): "
                    f"{existing.object_label!r} overwritten by {triple.object!r} (case {record.case_id})"
                )
                conflicts.append(message)
                logger.warning("triple conflict: %s", message)
            entries[key] = StoreEntry(triple.object, ORIGINAL)
    return TripleStore(entries, tuple(conflicts))


def apply_edits(store: TripleStore, edits: Sequence[EditSpec]) -> TripleStore:
    """Return a new store with each edit applied, whether or not the key existed.

    The rewrite is authoritative: the store is a cache of hop facts, not a
    complete world, so an edit lands even when the pre-edit fact is absent.
    """
    entries = dict(store.entries)
    for edit in edits:
        entries[_key(edit.subject, edit.relation)] = StoreEntry(edit.new_object, EDITED)
    return TripleStore(entries, store.conflicts)


def walk_chain(store: TripleStore, start: str, relations: Sequence[str]) -> str:
    """Resolve (current, relation_k) hop by hop; raises UnresolvableStep."""
    if not relations:
        raise ValueError("relations must be non-empty")
    current = start
    for hop_index, relation in enumerate(relations, start=1):
        entry = store.entries.get(_key(current, relation))
        if entry is None:
            raise UnresolvableStep(hop_index, current, relation)
        current = entry.object_label
    return current


PASS = "PASS"
FAIL = "FAIL"
NOT_CHECKABLE = "NOT-CHECKABLE"


@dataclass(frozen=True)
class ConsistencyCheck:
    """Result of checking one record's answer against its own chain walk."""

    case_id: str
    status: str  # PASS, FAIL, or NOT-CHECKABLE
    expected: str
    found: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == PASS


def check_consistency(record: SourceRecord, store: TripleStore) -> ConsistencyCheck:
    """Walk the record's hop relations on the edited store and compare answers.

    PASS iff the walk result matches the record's final answer or one of its
    aliases (scorer matching). Records without a full set of hop triples are
    NOT-CHECKABLE rather than guessed at.
    """
    expected = record.final_answer
    if not record.hop_chain or any(hop.triple is None for hop in record.hop_chain):
        return ConsistencyCheck(
            record.case_id, NOT_CHECKABLE, expected, "", "hop triples missing"
        )
    if not expected.strip():
        return ConsistencyCheck(record.case_id, FAIL, expected, "", "empty final answer")
    edited = apply_edits(store, record.edits)
    first = record.hop_chain[0].triple
    assert first is not None
    relations = [hop.triple.relation for hop in record.hop_chain if hop.triple is not None]
    try:
        found = walk_chain(edited, first.subject, relations)
    except UnresolvableStep as exc:
        return ConsistencyCheck(record.case_id, FAIL, expected, "", str(exc))
    if is_correct(found, expected, record.final_answer_aliases):
        return ConsistencyCheck(record.case_id, PASS, expected, found)
    return ConsistencyCheck(
        record.case_id, FAIL, expected, found, f"expected {expected!r}, found {found!r}"
    )


def consistency_lines(checks: Sequence[ConsistencyCheck]) -> list[str]:
    """Human-readable one-line-per-record report plus a summary block."""
    lines = []
    for check in checks:
        suffix = f"  {check.detail}" if check.detail else ""
        lines.append(f"{check.case_id}  {check.status}{suffix}")
    counts = {status: 0 for status in (PASS, FAIL, NOT_CHECKABLE)}
    for check in checks:
        counts[check.status] = counts.get(check.status, 0) + 1
    lines.append("")
    lines.append(f"checked: {len(checks)}")
    for status in (PASS, FAIL, NOT_CHECKABLE):
        lines.append(f"{status}: {counts[status]}")
    return lines


def write_consistency_csv(checks: Sequence[ConsistencyCheck], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["case_id", "status", "expected", "found"])
        for check in checks:
            writer.writerow([check.case_id, check.status, check.expected, check.found])
