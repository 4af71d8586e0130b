"""Dataset-level orchestration: run attacks, stream outcomes, aggregate metrics.

Metrics follow the accuracy-drop framing: every sample is attacked against
the model's own prediction (including samples the model already gets
wrong), ADV = pre-attack accuracy minus post-attack accuracy, ASR = flipped
samples over all samples, and LD is averaged over successful attacks only
(failures leave no adversarial text).

Outcome persistence is one JSON record per line, UTF-8, schema-versioned:
stream-appendable, resumable and diffable.  The report is a pure fold over
the records, so it can always be re-derived from the outcome file alone.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, TextIO

from tibattack.attack import AttackConfig, AttackOutcome, AttackStatus, attack
from tibattack.oracle import Classifier, MaskedLM, OracleError
from tibattack.segmenters import WordSegmenter

RECORD_SCHEMA = 1


class DatasetError(ValueError):
    """Malformed dataset file or sample set."""


class MissingGoldError(ValueError):
    """Accuracy requested but a sample carries no gold label."""


class PreflightError(RuntimeError):
    """An oracle failed its health check before the campaign started."""


@dataclass(frozen=True)
class Sample:
    id: str
    text: str
    gold_label: str | None = None


@dataclass
class CampaignReport:
    """Aggregate metrics over one campaign; accuracy fields need gold labels."""

    accuracy_pre: float | None
    accuracy_post: float | None
    adv: float | None
    asr: float
    mean_ld: float
    mean_ld_defined: bool
    counts: dict[str, int]
    mean_queries: float
    config: dict
    outcome_file: str | None

    def to_json_dict(self) -> dict:
        return asdict(self)


def load_dataset(path: str | Path) -> list[Sample]:
    """Read samples from a TSV (id, label, text) or JSON-lines file.

    Format is auto-detected by extension: ``.jsonl``/``.ndjson``/``.json``
    parse as JSON lines with keys id/label/text; anything else parses as
    tab-separated.  An empty or missing label field means no gold label.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    samples: list[Sample] = []
    if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in row or "text" not in row:
                raise DatasetError(f"{path}:{lineno}: record needs id and text")
            gold = row.get("label")
            samples.append(
                Sample(
                    id=str(row["id"]),
                    text=str(row["text"]),
                    gold_label=None if gold in (None, "") else str(gold),
                )
            )
    else:
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise DatasetError(f"{path}:{lineno}: expected id<TAB>label<TAB>text")
            sample_id, gold, text = parts
            samples.append(
                Sample(id=sample_id, text=text, gold_label=gold if gold else None)
            )
    _check_samples(samples)
    return samples


def _check_samples(samples: Sequence[Sample]) -> None:
    if not samples:
        raise DatasetError("dataset is empty")
    seen: set[str] = set()
    for s in samples:
        if s.id in seen:
            raise DatasetError(f"duplicate sample id {s.id!r}")
        seen.add(s.id)
        if not s.text:
            raise DatasetError(f"sample {s.id!r} has empty text")


def outcome_record(sample: Sample, outcome: AttackOutcome) -> dict:
    """Flatten one outcome into its JSON-lines record."""
    return {
        "schema": RECORD_SCHEMA,
        "id": sample.id,
        "gold_label": sample.gold_label,
        "status": outcome.status.value,
        "original_text": outcome.original_text,
        "adversarial_text": outcome.adversarial_text,
        "original_label": outcome.original_label,
        "adversarial_label": outcome.adversarial_label,
        "substitutions": [list(s) for s in outcome.substitutions_applied],
        "queries_used": outcome.queries_used,
        "mlm_calls": outcome.mlm_calls,
        "ld": outcome.ld,
        "error": outcome.error,
    }


def write_record(fp: TextIO, record: Mapping) -> None:
    fp.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    fp.flush()


def read_records(path: str | Path) -> list[dict]:
    """Load outcome records, skipping a torn trailing line from an interrupt."""
    records: list[dict] = []
    seen: set[str] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            continue
        if record.get("id") in seen:
            continue
        seen.add(record.get("id"))
        records.append(record)
    return records


def run_campaign(
    dataset: Sequence[Sample],
    classifier: Classifier,
    masked_lm: MaskedLM,
    config: AttackConfig,
    *,
    parallelism: int = 1,
    outcome_path: str | Path | None = None,
    resume: bool = False,
    segmenter: WordSegmenter | None = None,
    attack_fn: Callable[..., AttackOutcome] = attack,
) -> CampaignReport:
    """Attack every sample once and fold the outcomes into a report.

    Outcome records stream to ``outcome_path`` as attacks complete (single
    writer, flushed per record, so an interrupt loses at most a torn line).
    With ``resume=True`` sample ids already present in the outcome file are
    skipped and their stored records feed the report unchanged.
    ``attack_fn`` swaps in an alternative attack with the same signature,
    e.g. the random baseline.
    """
    _check_samples(dataset)
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    try:
        classifier.info()
        masked_lm.info()
    except OracleError as exc:
        raise PreflightError(f"oracle preflight failed: {exc}") from exc

    existing: list[dict] = []
    if outcome_path is not None:
        outcome_path = Path(outcome_path)
        if resume and outcome_path.exists():
            existing = read_records(outcome_path)
    known_ids = {r["id"] for r in existing}
    todo = [s for s in dataset if s.id not in known_ids]

    records = list(existing)
    fp: TextIO | None = None
    if outcome_path is not None:
        try:
            fp = open(outcome_path, "a" if resume else "w", encoding="utf-8")
            if resume and fp.tell() > 0:
                # An interrupt can leave a torn final line with no newline;
                # terminate it so the next record starts on its own line.
                with open(outcome_path, "rb") as check:
                    check.seek(-1, 2)
                    if check.read(1) != b"\n":
                        fp.write("\n")
        except OSError as exc:
            raise PreflightError(f"cannot write outcome file {outcome_path}: {exc}") from exc
    try:
        if parallelism == 1:
            for sample in todo:
                record = outcome_record(
                    sample,
                    attack_fn(sample.text, classifier, masked_lm, config, segmenter=segmenter),
                )
                records.append(record)
                if fp is not None:
                    write_record(fp, record)
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                futures = {
                    pool.submit(
                        attack_fn, sample.text, classifier, masked_lm, config, segmenter=segmenter
                    ): sample
                    for sample in todo
                }
                for future in as_completed(futures):
                    record = outcome_record(futures[future], future.result())
                    records.append(record)
                    if fp is not None:
                        write_record(fp, record)
    finally:
        if fp is not None:
            fp.close()

    return report_from_records(
        records,
        config=_config_echo(config, parallelism),
        outcome_file=str(outcome_path) if outcome_path is not None else None,
    )


def _config_echo(config: AttackConfig, parallelism: int) -> dict:
    echo = asdict(config)
    echo["granularity"] = config.granularity.value
    echo["parallelism"] = parallelism
    return echo


def report_from_records(
    records: Sequence[Mapping], *, config: dict | None = None, outcome_file: str | None = None
) -> CampaignReport:
    """Pure fold from outcome records to the campaign report."""
    counts = {"total": len(records), "success": 0, "failure": 0, "skipped": 0, "error": 0}
    for r in records:
        counts[r["status"]] += 1

    total = counts["total"]
    asr = counts["success"] / total if total else 0.0

    lds = [r["ld"] for r in records if r["status"] == "success" and r["ld"] is not None]
    mean_ld_value, mean_ld_defined = (sum(lds) / len(lds), True) if lds else (0.0, False)

    mean_queries = sum(r["queries_used"] for r in records) / total if total else 0.0

    accuracy_pre = accuracy_post = adv = None
    if records and all(r.get("gold_label") is not None for r in records):
        accuracy_pre, accuracy_post = _fold_accuracy(records)
        adv = accuracy_drop(accuracy_pre, accuracy_post)

    return CampaignReport(
        accuracy_pre=accuracy_pre,
        accuracy_post=accuracy_post,
        adv=adv,
        asr=asr,
        mean_ld=mean_ld_value,
        mean_ld_defined=mean_ld_defined,
        counts=counts,
        mean_queries=mean_queries,
        config=config or {},
        outcome_file=outcome_file,
    )


def accuracy_drop(accuracy_pre: float, accuracy_post: float) -> float:
    """Attack effectiveness as loss of victim accuracy."""
    return accuracy_pre - accuracy_post


def _fold_accuracy(records: Sequence[Mapping]) -> tuple[float, float]:
    """Pre/post accuracy over records that carry an original prediction.

    Skipped/error records never received a prediction and are excluded from
    both numerator and denominator; failed attacks leave the text - and so
    the prediction - unchanged.
    """
    scored = [r for r in records if r.get("original_label") is not None]
    if not scored:
        return 0.0, 0.0
    pre_hits = sum(1 for r in scored if r["original_label"] == r["gold_label"])
    post_hits = 0
    for r in scored:
        label = r["adversarial_label"] if r["status"] == "success" else r["original_label"]
        post_hits += 1 if label == r["gold_label"] else 0
    return pre_hits / len(scored), post_hits / len(scored)


def compute_accuracy(
    outcomes: Sequence[AttackOutcome], golds: Sequence[str | None]
) -> tuple[float, float]:
    """(pre, post) accuracy for outcome/gold pairs; every gold must be present."""
    if len(outcomes) != len(golds):
        raise ValueError("outcomes and golds must have equal length")
    if any(g is None for g in golds):
        raise MissingGoldError("all samples need gold labels for accuracy")
    records = [
        {
            "status": o.status.value,
            "original_label": o.original_label,
            "adversarial_label": o.adversarial_label,
            "gold_label": g,
        }
        for o, g in zip(outcomes, golds)
    ]
    return _fold_accuracy(records)


def mean_ld(outcomes: Sequence[AttackOutcome]) -> tuple[float, bool]:
    """Mean edit distance over successful attacks; (0.0, False) when none."""
    lds = [o.ld for o in outcomes if o.status is AttackStatus.SUCCESS and o.ld is not None]
    if not lds:
        return 0.0, False
    return sum(lds) / len(lds), True


def render_report_table(report: CampaignReport, column: str = "attack") -> str:
    """Metric rows by attack column, the shape used for headline tables."""
    def fmt(value: float | None) -> str:
        return "n/a" if value is None else f"{value:.4f}"

    ld = f"{report.mean_ld:.4f}" if report.mean_ld_defined else "n/a"
    width = max(len(column), 12)
    lines = [
        f"{'Metric':<8}{column:>{width}}",
        f"{'ADV':<8}{fmt(report.adv):>{width}}",
        f"{'ASR':<8}{fmt(report.asr):>{width}}",
        f"{'LD':<8}{ld:>{width}}",
    ]
    return "\n".join(lines)


def write_report_json(report: CampaignReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
