from __future__ import annotations

import dataclasses
import json
import random
from pathlib import Path

import pytest
import yaml

from mhop.datasetgen import (
    DEFAULT_INSTRUCTION,
    PromptTemplate,
    emit_dataset,
    emit_train_config,
    parse_dataset,
    render,
    split,
    to_multi_hop,
    to_single_hop,
    train_size,
    write_split_manifest,
)
from mhop.kgstore import apply_edits, build_store, walk_chain
from mhop.model import AlpacaRecord, EditSpec, FactTriple, HopStep, SourceRecord, TrainConfigSpec
from mhop.scoring import normalize
from synthdata import make_records, make_truths, record_from_truth


def _london_record() -> SourceRecord:
    return SourceRecord(
        case_id="1",
        question_variants=("Who is the head of government of the country where London is located?",),
        final_answer="Rishi Sunak",
        final_answer_aliases=(),
        hop_chain=(
            HopStep(1, "Where is London located?", "United Kingdom",
                    triple=FactTriple("London", "located in", "United Kingdom")),
            HopStep(2, "Who is the head of government of the United Kingdom?", "Rishi Sunak",
                    triple=FactTriple("United Kingdom", "head of government", "Rishi Sunak")),
        ),
        edits=(EditSpec("United Kingdom", "head of government", "Boris Johnson", "Rishi Sunak"),),
        extras={},
    )


def test_to_multi_hop_builds_history_and_output() -> None:
    record = to_multi_hop(_london_record())
    assert record.history == (("Where is London located?", "United Kingdom"),)
    assert record.output == "Rishi Sunak"
    assert record.instruction == DEFAULT_INSTRUCTION
    assert "1. Where is London located?" in record.input
    assert "2. Who is the head of government of the United Kingdom?" in record.input
    assert record.input.startswith(_london_record().question_variants[0])


def test_to_multi_hop_two_hop_history_length_one() -> None:
    assert len(to_multi_hop(_london_record()).history) == 1


def test_to_multi_hop_history_excludes_final_hop() -> None:
    for truth in make_truths(20, seed=31):
        record = record_from_truth(truth)
        built = to_multi_hop(record)
        assert len(built.history) == len(record.hop_chain) - 1


def test_to_multi_hop_rejects_degenerate_chain() -> None:
    record = _london_record()
    short = dataclasses.replace(record, hop_chain=record.hop_chain[:1])
    with pytest.raises(ValueError, match="degenerate"):
        to_multi_hop(short)


def test_multi_hop_outputs_match_chain_walk_oracle() -> None:
    records = make_records(500, seed=37)
    store = build_store(records)
    for record in records:
        built = to_multi_hop(record)
        edited = apply_edits(store, record.edits)
        walked = walk_chain(
            edited,
            record.hop_chain[0].triple.subject,
            [hop.triple.relation for hop in record.hop_chain],
        )
        assert normalize(built.output) == normalize(walked)


def test_to_single_hop_has_empty_history_and_bare_question() -> None:
    record = to_single_hop(_london_record())
    assert record.history == ()
    assert record.input == _london_record().question_variants[0]
    assert "Where is London located?" not in record.input


def test_variant_outputs_agree() -> None:
    for record in make_records(500, seed=41):
        assert to_single_hop(record).output == to_multi_hop(record).output


def test_render_rejects_unbound_placeholder() -> None:
    with pytest.raises(ValueError, match="unbound placeholder"):
        render("{question} and {subquestions}", question="q")


def test_custom_template_flows_through() -> None:
    template = PromptTemplate(
        instruction_text="Solve it.",
        direct_framing="Q: {question}",
        multi_hop_framing="Q: {question}\nSteps:\n{subquestions}",
    )
    single = to_single_hop(_london_record(), template)
    multi = to_multi_hop(_london_record(), template)
    assert single.instruction == "Solve it."
    assert single.input.startswith("Q: ")
    assert "Steps:" in multi.input


def test_split_sizes_ten_records() -> None:
    assignment = split(make_records(10), 0.7, 42)
    assert len(assignment.train_ids) == 7
    assert len(assignment.test_ids) == 3


def test_split_deterministic_for_same_inputs() -> None:
    records = make_records(50, seed=43)
    assert split(records, 0.7, 42).assignment == split(records, 0.7, 42).assignment


def test_split_differs_across_seeds() -> None:
    records = make_records(50, seed=43)
    assert split(records, 0.7, 1).assignment != split(records, 0.7, 2).assignment


def test_split_insensitive_to_record_order() -> None:
    records = make_records(30, seed=47)
    shuffled = records[:]
    random.Random(0).shuffle(shuffled)
    assert split(records, 0.7, 42).assignment == split(shuffled, 0.7, 42).assignment


def test_split_thousand_records_exact_count() -> None:
    assignment = split(make_records(1000, seed=53), 0.7, 42)
    independent = sum(1 for part in assignment.assignment.values() if part == "train")
    assert independent == 700
    assert len(assignment.assignment) == 1000


def test_split_rejects_duplicate_case_ids() -> None:
    records = make_records(5)
    records.append(dataclasses.replace(records[0]))
    with pytest.raises(ValueError, match="duplicate case_id"):
        split(records, 0.7, 42)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.5])
def test_split_rejects_out_of_range_ratio(ratio: float) -> None:
    with pytest.raises(ValueError):
        split(make_records(3), ratio, 42)


@pytest.mark.parametrize("n,expected", [(1, 1), (3, 2), (10, 7), (999, 699), (1000, 700)])
def test_train_size_half_up_rule(n: int, expected: int) -> None:
    assert train_size(n, 0.7) == expected


def test_train_size_rounds_half_up_at_exact_boundaries() -> None:
    # 0.7 * 45 = 31.5 exactly; half-up takes it to 32
    assert train_size(45, 0.7) == 32
    assert train_size(85, 0.7) == 60


def test_train_size_matches_exact_arithmetic_oracle() -> None:
    import math
    from fractions import Fraction

    for n in range(1, 2001):
        assert train_size(n, 0.7) == math.floor(Fraction(7, 10) * n + Fraction(1, 2))


def test_manifest_is_byte_stable(tmp_path: Path) -> None:
    records = make_records(20, seed=59)
    assignment = split(records, 0.7, 42)
    ids = [r.case_id for r in records]
    write_split_manifest(assignment, ids, tmp_path / "a.csv")
    write_split_manifest(split(records, 0.7, 42), ids, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "case_id,partition,seed,ratio"


def test_emit_dataset_empty_list(tmp_path: Path) -> None:
    path = tmp_path / "empty.json"
    emit_dataset([], path)
    content = path.read_text()
    assert json.loads(content) == []
    assert content.endswith("\n")


def test_emit_dataset_history_as_pair_arrays(tmp_path: Path) -> None:
    path = tmp_path / "one.json"
    emit_dataset([AlpacaRecord("i", "in", "out", (("q", "a"),))], path)
    payload = json.loads(path.read_text())
    assert payload == [{"instruction": "i", "input": "in", "output": "out", "history": [["q", "a"]]}]
    assert list(payload[0].keys()) == ["instruction", "input", "output", "history"]


def test_emit_then_parse_round_trip(tmp_path: Path) -> None:
    records = [to_multi_hop(r) for r in make_records(200, seed=61)]
    path = tmp_path / "data.json"
    emit_dataset(records, path)
    assert parse_dataset(path) == records


def test_parse_dataset_rejects_non_array(tmp_path: Path) -> None:
    path = tmp_path / "bad.json"
    path.write_text('{"instruction": "x"}')
    with pytest.raises(ValueError, match="top-level array"):
        parse_dataset(path)


def test_emit_train_config_epoch_two(tmp_path: Path) -> None:
    path = tmp_path / "train.yaml"
    emit_train_config(TrainConfigSpec(dataset_path="d.json", output_dir="runs"), path)
    lines = path.read_text().splitlines()
    assert "per_device_train_batch_size: 1" in lines
    assert "gradient_accumulation_steps: 8" in lines
    assert "learning_rate: 1.0e-4" in lines
    assert "num_train_epochs: 2" in lines


def test_emit_train_config_epoch_ten(tmp_path: Path) -> None:
    path = tmp_path / "train.yaml"
    emit_train_config(TrainConfigSpec(num_train_epochs=10, dataset_path="d", output_dir="o"), path)
    assert "num_train_epochs: 10" in path.read_text().splitlines()


def test_emit_train_config_parses_as_yaml_mapping(tmp_path: Path) -> None:
    path = tmp_path / "train.yaml"
    emit_train_config(
        TrainConfigSpec(dataset_path="data/multi.json", output_dir="runs/multi"), path
    )
    loaded = yaml.safe_load(path.read_text())
    assert loaded == {
        "per_device_train_batch_size": 1,
        "gradient_accumulation_steps": 8,
        "learning_rate": pytest.approx(1.0e-4),
        "num_train_epochs": 2,
        "dataset_path": "data/multi.json",
        "output_dir": "runs/multi",
    }
