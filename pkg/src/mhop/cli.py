"""Command-line pipeline: convert, split, oracle-check, run, score, report.

Subcommands communicate only via files under --output-dir, with fixed names,
so each stage is independently runnable and resumable. A TOML config file can
supply any flag; explicit flags win. Everything except live-backend runs is
deterministic given inputs, flags, and seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import datasetgen, ingest, kgstore, report, runner, scoring
from .backend import (
    MOCK_ENDPOINT,
    BackendError,
    MockKnowledge,
    build_mock_from_records,
    knowledge_from_pairs,
    make_backend,
)
from .datasetgen import PromptTemplate
from .ingest import DatasetFormatError
from .model import AlpacaRecord, RunConfig, SourceRecord, TrainConfigSpec

CASES_FILE = "cases.json"
SINGLE_FILE = "single_hop.json"
MULTI_FILE = "multi_hop.json"
CONVERSION_REPORT_FILE = "conversion_report.json"
MANIFEST_FILE = "split_manifest.csv"
ORACLE_CSV_FILE = "oracle_check.csv"
REPORT_TXT_FILE = "report.txt"
REPORT_MD_FILE = "report.md"
PLOT_FILE = "plot_data.csv"
TRAIN_CONFIG_FILE = "train_config.yaml"

DEFAULT_RATIO = 0.7
DEFAULT_SEED = 42


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"config file not found: {file_path}")
    with open(file_path, "rb") as handle:
        return tomllib.load(handle)


def _cfg(config: dict, section: str, key: str, default=None):
    value = config.get(section, {})
    if not isinstance(value, dict):
        return default
    return value.get(key, default)


def _pick(flag_value, config: dict, section: str, key: str, default):
    if flag_value is not None:
        return flag_value
    return _cfg(config, section, key, default)


def _template_from(args: argparse.Namespace, config: dict) -> PromptTemplate:
    base = PromptTemplate()
    return PromptTemplate(
        instruction_text=_pick(
            getattr(args, "instruction", None), config, "templates", "instruction", base.instruction_text
        ),
        direct_framing=_pick(
            getattr(args, "direct_framing", None), config, "templates", "direct_framing", base.direct_framing
        ),
        multi_hop_framing=_pick(
            getattr(args, "multi_hop_framing", None),
            config,
            "templates",
            "multi_hop_framing",
            base.multi_hop_framing,
        ),
    )


def _run_config_from(args: argparse.Namespace, config: dict) -> RunConfig:
    return RunConfig(
        endpoint=_pick(getattr(args, "endpoint", None), config, "run", "endpoint", MOCK_ENDPOINT),
        model_name=_pick(getattr(args, "model", None), config, "run", "model", "mock"),
        temperature=_pick(getattr(args, "temperature", None), config, "run", "temperature", 0.0),
        max_tokens=_pick(getattr(args, "max_tokens", None), config, "run", "max_tokens", 256),
        max_hops=_pick(getattr(args, "max_hops", None), config, "run", "max_hops", 4),
        parallelism=_pick(getattr(args, "parallelism", None), config, "run", "parallelism", 1),
        timeout_seconds=_pick(getattr(args, "timeout", None), config, "run", "timeout", 30.0),
        max_retries=_pick(getattr(args, "retries", None), config, "run", "retries", 2),
        seed=_seed_from(args, config),
    )


def _seed_from(args: argparse.Namespace, config: dict) -> int:
    return int(_pick(getattr(args, "seed", None), config, "pipeline", "seed", DEFAULT_SEED))


def _output_dir(args: argparse.Namespace, config: dict) -> Path:
    out = Path(_pick(getattr(args, "output_dir", None), config, "pipeline", "output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _input_path(args: argparse.Namespace, config: dict, fallback: Path | None = None) -> Path:
    value = getattr(args, "input", None)
    if value is None:
        value = _cfg(config, "pipeline", "input")
    if value is None and fallback is not None:
        return fallback
    if value is None:
        raise FileNotFoundError("no input file given (positional argument or pipeline.input)")
    return Path(value)


def cmd_convert(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    template = _template_from(args, config)
    records = ingest.parse_source(_input_path(args, config))
    parsed_count = len(records)
    cleaned = ingest.clean(records)
    invalid_dropped = sorted(
        {r.case_id for r in records} - {r.case_id for r in cleaned}
    )
    deduped, dedupe_report = ingest.dedupe(cleaned)
    if not deduped:
        print("convert: no valid records after cleaning and deduplication", file=sys.stderr)
        return 2
    ingest.write_source(deduped, out / CASES_FILE)
    datasetgen.emit_dataset([datasetgen.to_single_hop(r, template) for r in deduped], out / SINGLE_FILE)
    datasetgen.emit_dataset([datasetgen.to_multi_hop(r, template) for r in deduped], out / MULTI_FILE)
    conversion = {
        "input_cases": parsed_count,
        "invalid_dropped": invalid_dropped,
        "duplicates_dropped": list(dedupe_report.dropped_case_ids),
        "emitted": len(deduped),
    }
    (out / CONVERSION_REPORT_FILE).write_text(
        json.dumps(conversion, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print(
        f"convert: {parsed_count} in, {len(invalid_dropped)} invalid dropped, "
        f"{len(dedupe_report.dropped_case_ids)} duplicates dropped, {len(deduped)} out"
    )
    return 0


def cmd_split(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    ratio = float(_pick(args.ratio, config, "pipeline", "ratio", DEFAULT_RATIO))
    seed = _seed_from(args, config)
    for name in (CASES_FILE, SINGLE_FILE, MULTI_FILE):
        if not (out / name).exists():
            print(f"split: missing variant file {out / name}; run convert first", file=sys.stderr)
            return 1
    records = ingest.parse_source(out / CASES_FILE)
    single = datasetgen.parse_dataset(out / SINGLE_FILE)
    multi = datasetgen.parse_dataset(out / MULTI_FILE)
    if not (len(records) == len(single) == len(multi)):
        print(
            f"split: variant files disagree in length "
            f"({len(records)} cases, {len(single)} single, {len(multi)} multi)",
            file=sys.stderr,
        )
        return 1
    assignment = datasetgen.split(records, ratio, seed)
    ordered_ids = [record.case_id for record in records]

    def part(items, partition):
        return [
            item
            for item, case_id in zip(items, ordered_ids)
            if assignment.partition(case_id) == partition
        ]

    for partition in ("train", "test"):
        ingest.write_source(part(records, partition), out / f"cases.{partition}.json")
        datasetgen.emit_dataset(part(single, partition), out / f"single_hop.{partition}.json")
        datasetgen.emit_dataset(part(multi, partition), out / f"multi_hop.{partition}.json")
    datasetgen.write_split_manifest(assignment, ordered_ids, out / MANIFEST_FILE)
    n_train = len(assignment.train_ids)
    print(f"split: {n_train} train / {len(records) - n_train} test (ratio {ratio}, seed {seed})")
    return 0


def cmd_oracle_check(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    records = ingest.parse_source(_input_path(args, config, fallback=out / CASES_FILE))
    store = kgstore.build_store(records)
    checks = [kgstore.check_consistency(record, store) for record in records]
    for line in kgstore.consistency_lines(checks):
        print(line)
    kgstore.write_consistency_csv(checks, out / ORACLE_CSV_FILE)
    return 0


def _load_run_input(path: Path) -> tuple[str, list]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(data, list) and data and isinstance(data[0], dict) and "instruction" in data[0]:
        return "alpaca", datasetgen.parse_dataset(path)
    return "source", ingest.parse_source(path)


def _mock_knowledge(kind: str, items: list, scope: str) -> MockKnowledge:
    if kind == "source":
        return build_mock_from_records(items, scope)
    if scope == "direct":
        return knowledge_from_pairs((record.input, record.output) for record in items)
    return knowledge_from_pairs(
        pair for record in items for pair in record.history
    )


def cmd_run(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    run_config = _run_config_from(args, config)
    template = _template_from(args, config)
    mode = args.mode
    input_path = _input_path(args, config, fallback=out / "cases.test.json")
    kind, items = _load_run_input(input_path)
    if mode == "decomposed-scripted" and kind != "source":
        print("run: decomposed-scripted needs a source-records file (hop chains)", file=sys.stderr)
        return 1

    knowledge = None
    if run_config.endpoint == MOCK_ENDPOINT:
        scope = args.mock_scope
        if scope == "auto":
            scope = "direct" if mode == "direct" else "hops"
        knowledge = _mock_knowledge(kind, items, scope)
    backend = make_backend(run_config, knowledge)
    protocol = runner.DecompositionProtocol(max_hops=run_config.max_hops)

    total = len(items)
    progress_every = max(1, total // 10)
    done = 0
    lock = threading.Lock()

    def tick() -> None:
        nonlocal done
        with lock:
            done += 1
            if done % progress_every == 0 or done == total:
                print(f"run: {done}/{total}", file=sys.stderr)

    def work_source(record: SourceRecord):
        if mode == "direct":
            outcome = runner.run_direct(
                datasetgen.to_single_hop(record, template),
                backend,
                run_config,
                case_id=record.case_id,
                gold_aliases=record.final_answer_aliases,
            )
        elif mode == "decomposed-scripted":
            outcome = runner.run_decomposed_scripted(
                record, backend, run_config, replay_history=args.replay_history
            )
        else:
            outcome = runner.run_decomposed_model(
                record.question_variants[0],
                backend,
                protocol,
                run_config,
                case_id=record.case_id,
                gold=record.final_answer,
                gold_aliases=record.final_answer_aliases,
            )
        tick()
        return outcome

    def work_alpaca(indexed: tuple[int, AlpacaRecord]):
        position, record = indexed
        case_id = f"{position + 1:06d}"
        if mode == "direct":
            outcome = runner.run_direct(record, backend, run_config, case_id=case_id)
        else:
            outcome = runner.run_decomposed_model(
                record.input,
                backend,
                protocol,
                run_config,
                case_id=case_id,
                gold=record.output,
            )
        tick()
        return outcome

    try:
        if kind == "source":
            outcomes = runner.run_many(work_source, items, run_config.parallelism)
        else:
            outcomes = runner.run_many(work_alpaca, list(enumerate(items)), run_config.parallelism)
    except BackendError as exc:
        case = f" [case {exc.case_id}]" if exc.case_id else ""
        print(f"run: backend failure{case}: {exc}", file=sys.stderr)
        return 3

    header = {
        "mode": mode,
        "backend": run_config.endpoint,
        "model": run_config.model_name,
        "seed": run_config.seed,
        "deterministic": run_config.endpoint == MOCK_ENDPOINT,
    }
    runner.write_outcome_log(out / f"outcomes.{mode}.jsonl", outcomes, header)
    runner.write_transcripts(out / f"transcripts.{mode}.json", outcomes)
    print(scoring.accuracy(outcomes).describe())
    return 0


def _summaries_from_logs(paths: list[str]) -> dict[str, scoring.ScoreSummary]:
    by_mode: dict[str, list] = {}
    for path in paths:
        _, outcomes = runner.read_outcome_log(path)
        for outcome in outcomes:
            by_mode.setdefault(outcome.mode, []).append(outcome)
    return {mode: scoring.accuracy(group) for mode, group in sorted(by_mode.items())}


def _write_report(rows: list[report.ReportRow], out: Path) -> None:
    text = report.render_text_table(rows)
    (out / REPORT_TXT_FILE).write_text(text, encoding="utf-8")
    (out / REPORT_MD_FILE).write_text(report.render_markdown_table(rows), encoding="utf-8")
    report.emit_plot_data(rows, out / PLOT_FILE)
    print(text, end="")


def cmd_score(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    summaries = _summaries_from_logs(args.logs)
    for summary in summaries.values():
        print(summary.describe())
    single = summaries.get("direct")
    multi = next(
        (summaries[mode] for mode in ("decomposed-scripted", "decomposed-model") if mode in summaries),
        None,
    )
    if single is None or multi is None or single.empty or multi.empty:
        print("score: one mode only, no comparison row")
        return 0
    row = report.compare_report(single, multi, f"{single.mode} vs {multi.mode}")
    _write_report([row], out)
    return 0


def cmd_report(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    rows = []
    for label, single_log, multi_log in args.row:
        _, single_outcomes = runner.read_outcome_log(single_log)
        _, multi_outcomes = runner.read_outcome_log(multi_log)
        rows.append(
            report.compare_report(
                scoring.accuracy(single_outcomes), scoring.accuracy(multi_outcomes), label
            )
        )
    _write_report(rows, out)
    return 0


def cmd_emit_train_config(args: argparse.Namespace, config: dict) -> int:
    out = _output_dir(args, config)
    defaults = TrainConfigSpec()
    spec = TrainConfigSpec(
        per_device_train_batch_size=_pick(
            args.batch_size, config, "train", "per_device_train_batch_size",
            defaults.per_device_train_batch_size,
        ),
        gradient_accumulation_steps=_pick(
            args.grad_accum, config, "train", "gradient_accumulation_steps",
            defaults.gradient_accumulation_steps,
        ),
        learning_rate=_pick(args.learning_rate, config, "train", "learning_rate", defaults.learning_rate),
        num_train_epochs=_pick(args.epochs, config, "train", "num_train_epochs", defaults.num_train_epochs),
        dataset_path=_pick(
            args.dataset_path, config, "train", "dataset_path", str(out / "multi_hop.train.json")
        ),
        output_dir=_pick(args.train_output_dir, config, "train", "output_dir", "runs/finetune"),
    )
    path = out / TRAIN_CONFIG_FILE
    datasetgen.emit_train_config(spec, path)
    print(f"emit-train-config: wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file supplying any flag")
    common.add_argument("--seed", type=int, help="seed for all seeded operations (default 42)")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--output-dir", help="directory for all outputs (default out)")

    templates = argparse.ArgumentParser(add_help=False)
    templates.add_argument("--instruction", help="override the instruction text")
    templates.add_argument("--direct-framing", help="override the single-hop input framing")
    templates.add_argument("--multi-hop-framing", help="override the multi-hop input framing")

    parser = argparse.ArgumentParser(
        prog="mhop",
        description="Multi-hop QA pipeline: dataset conversion, oracle checks, inference, scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[common, templates], help="source file -> datasets")
    p.add_argument("input", nargs="?", help="raw source dataset file")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("split", parents=[common], help="seeded synchronized train/test split")
    p.add_argument("--ratio", type=float, help="train fraction (default 0.7)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("oracle-check", parents=[common], help="verify answers by chain walking")
    p.add_argument("input", nargs="?", help="source records file (default <output-dir>/cases.json)")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("run", parents=[common, templates], help="run inference over a test set")
    p.add_argument("input", nargs="?", help="test set file (default <output-dir>/cases.test.json)")
    p.add_argument(
        "--mode",
        choices=["direct", "decomposed-scripted", "decomposed-model"],
        required=True,
    )
    p.add_argument("--endpoint", help="backend base URL, or 'mock'")
    p.add_argument("--model", help="model name sent to the backend")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--max-hops", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument(
        "--mock-scope",
        choices=["auto", "hops", "direct"],
        default="auto",
        help="knowledge scope for the mock backend",
    )
    p.add_argument(
        "--replay-history",
        action="store_true",
        help="replay prior hops as conversation turns in scripted mode",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", parents=[common], help="summarize outcome logs")
    p.add_argument("logs", nargs="+", help="outcome log files")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", parents=[common], help="multi-row comparison report")
    p.add_argument(
        "--row",
        nargs=3,
        action="append",
        required=True,
        metavar=("LABEL", "SINGLE_LOG", "MULTI_LOG"),
        help="one comparison row (repeatable)",
    )
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("emit-train-config", parents=[common], help="write fine-tuning YAML")
    p.add_argument("--epochs", type=int, choices=[2, 10])
    p.add_argument("--batch-size", type=int)
    p.add_argument("--grad-accum", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--dataset-path")
    p.add_argument("--train-output-dir")
    p.set_defaults(func=cmd_emit_train_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except FileNotFoundError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    except DatasetFormatError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"{args.command}: backend failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"{args.command}: io failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
