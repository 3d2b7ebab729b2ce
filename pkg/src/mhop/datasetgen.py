"""Conversion of source records into instruction datasets, plus splitting.

Each source case becomes exactly one training/eval instance per variant,
built from its first question paraphrase: the multi-hop variant embeds the
decomposition chain and intermediate QA history, the single-hop variant keeps
only the bare question. Splitting is seeded and synchronized, so both
variants always place a case in the same partition.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import AlpacaRecord, SourceRecord, TrainConfigSpec

DEFAULT_INSTRUCTION = (
    "Answer the question; reason step by step through the given sub-questions "
    "when provided, and output only the final answer."
)

_SLOT_NAMES = ("question", "subquestions")


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt skeletons with {question} and {subquestions} slots."""

    instruction_text: str = DEFAULT_INSTRUCTION
    direct_framing: str = "{question}"
    multi_hop_framing: str = "{question}\nSub-questions:\n{subquestions}"


DEFAULT_TEMPLATE = PromptTemplate()


def render(template_text: str, **slots: str) -> str:
    """Substitute slot values; any known marker left unbound is an error."""
    out = template_text
    for name, value in slots.items():
        out = out.replace("{" + name + "}", value)
    for name in _SLOT_NAMES:
        marker = "{" + name + "}"
        if marker in out:
            raise ValueError(f"unbound placeholder {marker} in template")
    return out


def _numbered(questions: Sequence[str]) -> str:
    return "\n".join(f"{i}. {question}" for i, question in enumerate(questions, start=1))


def to_multi_hop(record: SourceRecord, template: PromptTemplate = DEFAULT_TEMPLATE) -> AlpacaRecord:
    """Build the decomposed variant: chained input plus intermediate QA history.

    History holds one (question, answer) pair per hop except the last, whose
    answer is the record's output.
    """
    if len(record.hop_chain) < 2:
        raise ValueError(
            f"case {record.case_id}: degenerate chain, need at least 2 hops, "
            f"got {len(record.hop_chain)}"
        )
    question = record.question_variants[0]
    subquestions = _numbered([hop.question for hop in record.hop_chain])
    return AlpacaRecord(
        instruction=render(template.instruction_text, question=question, subquestions=subquestions),
        input=render(template.multi_hop_framing, question=question, subquestions=subquestions),
        output=record.final_answer,
        history=tuple((hop.question, hop.answer) for hop in record.hop_chain[:-1]),
    )


def to_single_hop(record: SourceRecord, template: PromptTemplate = DEFAULT_TEMPLATE) -> AlpacaRecord:
    """Build the direct variant: bare question, no chain, empty history."""
    question = record.question_variants[0]
    return AlpacaRecord(
        instruction=render(template.instruction_text, question=question, subquestions=""),
        input=render(template.direct_framing, question=question),
        output=record.final_answer,
        history=(),
    )


@dataclass(frozen=True)
class SplitAssignment:
    """A deterministic case_id -> {train, test} mapping."""

    assignment: dict[str, str]
    ratio: float
    seed: int

    def partition(self, case_id: str) -> str:
        return self.assignment[case_id]

    @property
    def train_ids(self) -> set[str]:
        return {cid for cid, part in self.assignment.items() if part == "train"}

    @property
    def test_ids(self) -> set[str]:
        return {cid for cid, part in self.assignment.items() if part == "test"}


def train_size(n: int, ratio: float) -> int:
    """Half-up rounding rule that fixes the train/test boundary.

    Evaluated in exact decimal arithmetic: a 0.7 ratio over 45 records rounds
    31.5 up to 32 on every platform, where naive float arithmetic lands a
    hair under the boundary and would round down.
    """
    return math.floor(Fraction(str(ratio)) * n + Fraction(1, 2))


def split(records: Sequence[SourceRecord], ratio: float, seed: int) -> SplitAssignment:
    """Assign cases to train/test by a seeded counter-based permutation.

    The permutation (Philox) depends only on the seed and the sorted case_id
    set, so identical inputs give byte-identical assignments on any platform
    and the mapping is insensitive to record order.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    ids = [record.case_id for record in records]
    seen: set[str] = set()
    for case_id in ids:
        if case_id in seen:
            raise ValueError(f"duplicate case_id: {case_id!r}")
        seen.add(case_id)
    ordered = sorted(ids)
    rng = np.random.Generator(np.random.Philox(seed))
    shuffled = [ordered[int(i)] for i in rng.permutation(len(ordered))]
    boundary = train_size(len(ordered), ratio)
    assignment = {
        case_id: ("train" if position < boundary else "test")
        for position, case_id in enumerate(shuffled)
    }
    return SplitAssignment(assignment, ratio, seed)


def write_split_manifest(
    assignment: SplitAssignment, ordered_ids: Sequence[str], path: str | Path
) -> None:
    """CSV manifest in dataset order: case_id, partition, seed, ratio."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["case_id", "partition", "seed", "ratio"])
        for case_id in ordered_ids:
            writer.writerow([case_id, assignment.partition(case_id), assignment.seed, assignment.ratio])


def emit_dataset(records: Sequence[AlpacaRecord], path: str | Path) -> None:
    """Write records as an array of {instruction, input, output, history} objects.

    Field order is fixed, history serializes as 2-element arrays, and the file
    ends with a newline.
    """
    payload = [
        {
            "instruction": record.instruction,
            "input": record.input,
            "output": record.output,
            "history": [list(pair) for pair in record.history],
        }
        for record in records
    ]
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def parse_dataset(path: str | Path) -> list[AlpacaRecord]:
    """Read a dataset file written by emit_dataset (emit -> parse is identity)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"malformed dataset {path}: expected a top-level array")
    records = []
    for index, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise ValueError(f"malformed dataset {path}: entry {index} is not an object")
        try:
            records.append(
                AlpacaRecord(
                    instruction=obj["instruction"],
                    input=obj["input"],
                    output=obj["output"],
                    history=tuple((pair[0], pair[1]) for pair in obj.get("history", [])),
                )
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise ValueError(f"malformed dataset {path}: entry {index}: {exc}") from exc
    return records


def _format_rate(value: float) -> str:
    """Render a positive rate in mantissa-exponent form, e.g. 1.0e-4."""
    if value <= 0:
        raise ValueError(f"learning rate must be positive, got {value}")
    exponent = round(math.log10(value))
    mantissa = value / (10.0 ** exponent)
    if mantissa < 1.0:
        exponent -= 1
        mantissa *= 10.0
    elif mantissa >= 10.0:
        exponent += 1
        mantissa /= 10.0
    return f"{mantissa:.1f}e{exponent}"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_train_config(spec: TrainConfigSpec, path: str | Path) -> None:
    """Write the fine-tuning YAML config with exact, stable key/value lines."""
    lines = [
        f"per_device_train_batch_size: {spec.per_device_train_batch_size}",
        f"gradient_accumulation_steps: {spec.gradient_accumulation_steps}",
        f"learning_rate: {_format_rate(spec.learning_rate)}",
        f"num_train_epochs: {spec.num_train_epochs}",
        f"dataset_path: {_quote(spec.dataset_path)}",
        f"output_dir: {_quote(spec.output_dir)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
