"""Inference protocols: direct answering and two decomposition modes.

Direct mode sends the instruction and question as a single exchange.
Scripted decomposition walks the gold sub-questions one exchange at a time,
feeding each model answer into the next question. Model-driven decomposition
lets the model itself emit sub-questions under a marker protocol and answers
them with a second backend call per iteration.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from .backend import BackendError, ChatMessage, assistant, system, user
from .model import AlpacaRecord, EvalOutcome, RunConfig, SourceRecord
from .scoring import is_correct

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ANSWER_SYSTEM_PROMPT = "Answer the question with only the answer, as concisely as possible."

SUBQUESTION_MARKER = "Subquestion:"
INTERMEDIATE_MARKER = "Intermediate answer:"
FINAL_MARKER = "Final answer:"


@dataclass(frozen=True)
class DecompositionProtocol:
    """Line-initial, case-sensitive markers driving the model-driven loop."""

    subquestion_marker: str = SUBQUESTION_MARKER
    intermediate_marker: str = INTERMEDIATE_MARKER
    final_marker: str = FINAL_MARKER
    max_hops: int = 4

    def instructions(self) -> str:
        return (
            "Break the question into sub-questions, one at a time. Reply with "
            f"exactly one line per turn: either '{self.subquestion_marker} <next sub-question>' "
            f"or, once you can conclude, '{self.final_marker} <answer>'. Lines starting with "
            f"'{self.intermediate_marker}' give you the answers to your previous sub-questions."
        )


def extract_answer(completion: str) -> str:
    """Pull the answer text out of a completion.

    Prefers the last line-initial 'Final answer:' marker, then a line-initial
    'Answer:' marker, then falls back to the last non-empty line. Always
    trimmed.
    """
    if not completion.strip():
        raise ValueError("empty completion")
    lines = completion.splitlines()
    for marker in (FINAL_MARKER, "Answer:"):
        for position in range(len(lines) - 1, -1, -1):
            if lines[position].startswith(marker):
                tail = lines[position][len(marker):].strip()
                if tail:
                    return tail
                for following in lines[position + 1:]:
                    if following.strip():
                        return following.strip()
    for line in reversed(lines):
        if line.strip():
            return line.strip()
    raise ValueError("empty completion")


def _marker_line(completion: str, marker: str) -> str | None:
    for line in completion.splitlines():
        if line.startswith(marker):
            return line[len(marker):].strip()
    return None


def _attach_case(error: BackendError, case_id: str) -> None:
    if error.case_id is None:
        error.case_id = case_id


def run_direct(
    record: AlpacaRecord,
    backend,
    config: RunConfig,
    *,
    case_id: str = "",
    gold_aliases: Sequence[str] = (),
) -> EvalOutcome:
    """One-shot protocol: instruction as system text, input as the user turn."""
    if record.history:
        raise ValueError("direct mode requires a record with empty history")
    messages = [system(record.instruction), user(record.input)]
    try:
        completion = backend.complete(messages, config)
    except BackendError as exc:
        _attach_case(exc, case_id)
        raise
    prediction = extract_answer(completion)
    verdict = bool(record.output) and is_correct(prediction, record.output, gold_aliases)
    return EvalOutcome(
        case_id=case_id,
        mode="direct",
        prediction=prediction,
        gold=record.output,
        gold_aliases=tuple(gold_aliases),
        verdict=verdict,
        transcript=((record.input, completion),),
        hop_count=1,
    )


def run_decomposed_scripted(
    record: SourceRecord,
    backend,
    config: RunConfig,
    *,
    replay_history: bool = False,
) -> EvalOutcome:
    """Walk the gold sub-questions, threading model answers through the chain.

    Each hop is its own exchange; when ``replay_history`` is set the prior
    hops are replayed as conversation turns instead. The previous hop's gold
    answer entity is text-replaced with the model's actual answer wherever it
    appears in the next question, so the chain stays honest to model
    behavior; a missing occurrence is logged, not fatal.
    """
    hops = record.hop_chain
    if len(hops) < 2:
        raise ValueError(f"case {record.case_id}: need at least 2 hops, got {len(hops)}")
    if len(hops) > config.max_hops:
        raise ValueError(
            f"case {record.case_id}: chain of {len(hops)} hops exceeds max_hops={config.max_hops}"
        )
    transcript: list[tuple[str, str]] = []
    turns: list[ChatMessage] = []
    previous_model_answer = ""
    previous_gold_answer = ""
    for position, hop in enumerate(hops):
        question = hop.question
        if position > 0:
            if previous_gold_answer and previous_gold_answer in question:
                question = question.replace(previous_gold_answer, previous_model_answer)
            else:
                logger.warning(
                    "case %s hop %d: prior answer %r not found in question, no substitution",
                    record.case_id,
                    hop.index,
                    previous_gold_answer,
                )
        messages = [system(ANSWER_SYSTEM_PROMPT)]
        if replay_history:
            messages.extend(turns)
        messages.append(user(question))
        try:
            completion = backend.complete(messages, config)
        except BackendError as exc:
            _attach_case(exc, record.case_id)
            raise
        transcript.append((question, completion))
        turns.extend([user(question), assistant(completion)])
        previous_model_answer = extract_answer(completion)
        previous_gold_answer = hop.answer
    prediction = previous_model_answer
    verdict = is_correct(prediction, record.final_answer, record.final_answer_aliases)
    return EvalOutcome(
        case_id=record.case_id,
        mode="decomposed-scripted",
        prediction=prediction,
        gold=record.final_answer,
        gold_aliases=record.final_answer_aliases,
        verdict=verdict,
        transcript=tuple(transcript),
        hop_count=len(hops),
    )


def run_decomposed_model(
    question: str,
    backend,
    protocol: DecompositionProtocol,
    config: RunConfig,
    *,
    answer_backend=None,
    case_id: str = "",
    gold: str = "",
    gold_aliases: Sequence[str] = (),
) -> EvalOutcome:
    """Iterative decomposition: the model emits sub-questions until it concludes.

    Each iteration prompts with the protocol instructions plus the running
    transcript; a 'Subquestion:' line triggers a second call to answer it and
    the pair is appended as an 'Intermediate answer:' line. The loop stops at
    a 'Final answer:' line or after max_hops iterations, in which case the
    last intermediate answer stands in and the outcome is flagged truncated.
    A completion with no marker at all is a protocol violation, recorded as a
    false verdict rather than raised.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    answerer = answer_backend if answer_backend is not None else backend
    running: list[str] = [f"Question: {question}"]
    transcript: list[tuple[str, str]] = []
    prediction = ""
    last_intermediate = ""
    truncated = False
    note = ""
    iterations = 0
    for _ in range(protocol.max_hops):
        iterations += 1
        prompt = "\n".join(running)
        messages = [system(protocol.instructions()), user(prompt)]
        try:
            completion = backend.complete(messages, config)
        except BackendError as exc:
            _attach_case(exc, case_id)
            raise
        transcript.append((prompt, completion))
        final_text = _marker_line(completion, protocol.final_marker)
        if final_text is not None:
            prediction = final_text
            break
        subquestion = _marker_line(completion, protocol.subquestion_marker)
        if subquestion is None:
            note = "protocol-violation: completion contains no marker"
            logger.warning("case %s: %s", case_id, note)
            break
        try:
            sub_completion = answerer.complete(
                [system(ANSWER_SYSTEM_PROMPT), user(subquestion)], config
            )
        except BackendError as exc:
            _attach_case(exc, case_id)
            raise
        transcript.append((subquestion, sub_completion))
        last_intermediate = extract_answer(sub_completion)
        running.append(f"{protocol.subquestion_marker} {subquestion}")
        running.append(f"{protocol.intermediate_marker} {last_intermediate}")
    else:
        truncated = True
        prediction = last_intermediate
        note = f"truncated at max_hops={protocol.max_hops}"
    if note.startswith("protocol-violation"):
        verdict = False
    else:
        verdict = bool(gold) and bool(prediction) and is_correct(prediction, gold, gold_aliases)
    return EvalOutcome(
        case_id=case_id,
        mode="decomposed-model",
        prediction=prediction,
        gold=gold,
        gold_aliases=tuple(gold_aliases),
        verdict=verdict,
        transcript=tuple(transcript),
        hop_count=iterations,
        truncated=truncated,
        note=note,
    )


def run_many(
    worker: Callable[[T], R],
    items: Sequence[T],
    parallelism: int = 1,
) -> list[R]:
    """Apply the worker to every item, results in submission order.

    Items are independent; exchanges within one item stay sequential inside
    the worker. Parallelism bounds in-flight work.
    """
    if parallelism <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as executor:
        return list(executor.map(worker, items))


def write_outcome_log(
    path: str | Path, outcomes: Sequence[EvalOutcome], header: dict | None = None
) -> None:
    """Line-delimited outcome log: a header object, then one record per line."""
    lines = [json.dumps({"log": "outcomes", **(header or {})}, ensure_ascii=False)]
    for outcome in outcomes:
        lines.append(
            json.dumps(
                {
                    "case_id": outcome.case_id,
                    "mode": outcome.mode,
                    "prediction": outcome.prediction,
                    "verdict": outcome.verdict,
                    "hop_count": outcome.hop_count,
                    "truncated": outcome.truncated,
                },
                ensure_ascii=False,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_outcome_log(path: str | Path) -> tuple[dict, list[EvalOutcome]]:
    """Read an outcome log back; golds and transcripts live in the transcript file."""
    header: dict = {}
    outcomes: list[EvalOutcome] = []
    for line_number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed outcome log {path}: line {line_number}: {exc.msg}") from exc
        if not isinstance(row, dict):
            raise ValueError(f"malformed outcome log {path}: line {line_number}: not an object")
        if row.get("log") == "outcomes":
            header = row
            continue
        try:
            outcomes.append(
                EvalOutcome(
                    case_id=row["case_id"],
                    mode=row["mode"],
                    prediction=row["prediction"],
                    gold="",
                    gold_aliases=(),
                    verdict=bool(row["verdict"]),
                    hop_count=int(row.get("hop_count", 0)),
                    truncated=bool(row.get("truncated", False)),
                )
            )
        except KeyError as exc:
            raise ValueError(
                f"malformed outcome log {path}: line {line_number}: missing {exc.args[0]!r}"
            ) from exc
    return header, outcomes


def write_transcripts(path: str | Path, outcomes: Sequence[EvalOutcome]) -> None:
    """Full transcripts keyed by case_id, companion to the outcome log."""
    payload = {
        outcome.case_id: {
            "mode": outcome.mode,
            "gold": outcome.gold,
            "gold_aliases": list(outcome.gold_aliases),
            "transcript": [list(pair) for pair in outcome.transcript],
            "hop_count": outcome.hop_count,
            "truncated": outcome.truncated,
            "note": outcome.note,
        }
        for outcome in outcomes
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
