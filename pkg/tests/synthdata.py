"""Synthetic corpus builders shared across the test suite.

Every generated case is consistent by construction: the hop triples describe
the post-edit world, the planted rewrite points at one of those facts, and
the final answer is the chain's terminal entity. Each case also keeps its
ground truth (entities, relations, edits) so tests can verify results with
oracles that never touch the code under test.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from mhop.model import EditSpec, FactTriple, HopStep, SourceRecord

RELATIONS = ("located in", "head of government", "capital of", "member of")


@dataclass(frozen=True)
class CaseTruth:
    """Ground truth for one synthetic case, independent of any parser."""

    idx: int
    entities: tuple[str, ...]  # chain of hops+1 entities
    relations: tuple[str, ...]  # one per hop
    top_question: str
    final_answer: str
    aliases: tuple[str, ...]
    edit: tuple[str, str, str, str]  # subject, relation, old, new

    @property
    def hops(self) -> int:
        return len(self.relations)

    def triples(self) -> list[tuple[str, str, str]]:
        return [
            (self.entities[k], self.relations[k], self.entities[k + 1])
            for k in range(self.hops)
        ]

    def hop_questions(self) -> list[str]:
        return [
            f"What is the {self.relations[k]} of {self.entities[k]}?"
            for k in range(self.hops)
        ]


def describe_case(idx: int, hops: int = 3) -> CaseTruth:
    entities = tuple(f"Entity_{idx}_{k}" for k in range(hops + 1))
    relations = tuple(RELATIONS[k % len(RELATIONS)] for k in range(hops))
    edited_hop = idx % hops
    return CaseTruth(
        idx=idx,
        entities=entities,
        relations=relations,
        top_question=(
            f"What lies at the end of chain {idx} that starts from {entities[0]}?"
        ),
        final_answer=entities[-1],
        aliases=(f"Alias {idx} final",),
        edit=(
            entities[edited_hop],
            relations[edited_hop],
            f"Stale_{idx}_{edited_hop}",
            entities[edited_hop + 1],
        ),
    )


def raw_from_truth(
    truth: CaseTruth,
    *,
    with_case_id: bool = True,
    with_extras: bool = True,
    variants: int = 2,
) -> dict:
    """One raw case object in the source file layout."""
    questions = [truth.top_question]
    for v in range(1, variants):
        questions.append(f"Variant {v}: {truth.top_question}")
    subject, relation, old, new = truth.edit
    raw: dict = {
        "questions": questions,
        "new_answer": truth.final_answer,
        "new_answer_alias": list(truth.aliases),
        "requested_rewrite": [
            {
                "prompt": f"The {relation} of {{}} is",
                "subject": subject,
                "relation": relation,
                "target_true": {"str": old},
                "target_new": {"str": new},
            }
        ],
        "new_single_hops": [
            {
                "question": question,
                "answer": obj,
                "answer_alias": [],
                "triple": [subj, rel, obj],
            }
            for question, (subj, rel, obj) in zip(truth.hop_questions(), truth.triples())
        ],
    }
    if with_case_id:
        raw = {"case_id": truth.idx + 1, **raw}
    if with_extras:
        raw["answer"] = f"Stale_{truth.idx}_final"
        raw["orig"] = {
            "triples": [list(t) for t in truth.triples()],
            "tags": ["synthetic", truth.idx],
            "nested": {"deep": [1, {"x": None}]},
        }
    return raw


def record_from_truth(truth: CaseTruth) -> SourceRecord:
    """The same case constructed directly from model types (no parser)."""
    subject, relation, old, new = truth.edit
    hops = tuple(
        HopStep(
            index=k + 1,
            question=question,
            answer=obj,
            answer_aliases=(),
            triple=FactTriple(subj, rel, obj),
        )
        for k, (question, (subj, rel, obj)) in enumerate(
            zip(truth.hop_questions(), truth.triples())
        )
    )
    return SourceRecord(
        case_id=str(truth.idx + 1),
        question_variants=(truth.top_question,),
        final_answer=truth.final_answer,
        final_answer_aliases=truth.aliases,
        hop_chain=hops,
        edits=(EditSpec(subject, relation, old, new),),
        extras={},
    )


def make_truths(n: int, hops_choices: tuple[int, ...] = (2, 3, 4), seed: int = 0) -> list[CaseTruth]:
    rng = random.Random(seed)
    return [describe_case(idx, rng.choice(hops_choices)) for idx in range(n)]


def make_raw_corpus(n: int, seed: int = 0, **kwargs) -> tuple[list[dict], list[CaseTruth]]:
    truths = make_truths(n, seed=seed)
    return [raw_from_truth(t, **kwargs) for t in truths], truths


def make_records(n: int, seed: int = 0, hops_choices: tuple[int, ...] = (2, 3, 4)) -> list[SourceRecord]:
    return [record_from_truth(t) for t in make_truths(n, hops_choices, seed)]


def duplicate_raw(raw: dict, case_id: int) -> dict:
    """A copy sharing the dedupe key (first question + final answer)."""
    copy = dict(raw)
    copy["case_id"] = case_id
    return copy
