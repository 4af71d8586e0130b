"""Command-line front end: attack, campaign, baseline, probe.

Oracles come either from HTTP URLs (``--classifier-url``/``--mlm-url``) or
from the built-in benchmark mocks (``--mock unigram`` for the classifier,
``--mock table`` for the masked LM), so everything is runnable offline.
Options may be preloaded from a JSON config file; explicit flags win over
file values, which win over defaults.

Exit codes: 0 success, 1 attack/probe failure, 2 runtime error, 64 usage
error, 69 oracle unavailable.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from tibattack import benchmark
from tibattack.attack import AttackConfig, AttackStatus, attack
from tibattack.baseline import baseline_attack_fn, random_attack
from tibattack.campaign import (
    DatasetError,
    PreflightError,
    Sample,
    load_dataset,
    outcome_record,
    render_report_table,
    run_campaign,
    write_record,
    write_report_json,
)
from tibattack.http_client import HttpClassifier, HttpMaskedLM
from tibattack.oracle import OracleError, ProtocolError, TransportError
from tibattack.segmenters import LexiconSegmenter
from tibattack.tibetan import TSHEG, Granularity, segment_syllables

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_ERROR = 2
EXIT_USAGE = 64
EXIT_UNAVAILABLE = 69

CONFIG_KEYS = {
    "text",
    "dataset",
    "granularity",
    "k",
    "budget",
    "max_substitutions",
    "classifier_url",
    "mlm_url",
    "mock",
    "lexicon",
    "out",
    "report",
    "parallelism",
    "seed",
    "resume",
}

DEFAULTS = {
    "text": None,
    "dataset": None,
    "granularity": "syllable",
    "k": 50,
    "budget": None,
    "max_substitutions": None,
    "classifier_url": None,
    "mlm_url": None,
    "mock": [],
    "lexicon": None,
    "out": None,
    "report": None,
    "parallelism": 1,
    "seed": 0,
    "resume": False,
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


@dataclass
class RunSpec:
    """Fully resolved options for one CLI invocation."""

    command: str
    text: str | None
    dataset: str | None
    granularity: Granularity
    k: int
    budget: int | None
    max_substitutions: int | None
    classifier_url: str | None
    mlm_url: str | None
    mock: list[str]
    lexicon: str | None
    out: str | None
    report: str | None
    parallelism: int
    seed: int
    resume: bool


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--granularity", choices=["syllable", "word"])
    common.add_argument("--k", type=int, help="masked-LM candidates per position")
    common.add_argument("--budget", type=int, help="classifier query budget per text")
    common.add_argument("--max-substitutions", type=int, dest="max_substitutions")
    common.add_argument("--classifier-url", dest="classifier_url")
    common.add_argument("--mlm-url", dest="mlm_url")
    common.add_argument(
        "--mock",
        action="append",
        choices=["unigram", "table"],
        help="use a built-in oracle (repeatable): unigram classifier, table masked LM",
    )
    common.add_argument("--lexicon", help="word list for word-granularity segmentation")
    common.add_argument("--out", help="outcome file (JSON record / JSON lines)")
    common.add_argument("--seed", type=int, help="baseline RNG seed")

    parser = _Parser(prog="tibattack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", parents=[common], help="attack one text")
    p_attack.add_argument("--text", help="text to attack")

    p_campaign = sub.add_parser(
        "campaign", parents=[common], help="attack a dataset and report metrics"
    )
    p_campaign.add_argument("--dataset", help="TSV or JSON-lines sample file")
    p_campaign.add_argument("--report", help="write the metric report as JSON")
    p_campaign.add_argument("--parallelism", type=int)
    p_campaign.add_argument("--resume", action="store_true", default=None)

    p_baseline = sub.add_parser(
        "baseline", parents=[common], help="random-substitution baseline"
    )
    p_baseline.add_argument("--text")
    p_baseline.add_argument("--dataset")
    p_baseline.add_argument("--report")
    p_baseline.add_argument("--parallelism", type=int)
    p_baseline.add_argument("--resume", action="store_true", default=None)

    sub.add_parser(
        "probe", parents=[common], help="check a model server against the wire contract"
    )
    return parser


def load_config_file(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return raw


def resolve(args: argparse.Namespace) -> RunSpec:
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value

    try:
        granularity = Granularity(merged["granularity"])
    except ValueError:
        raise UsageError(f"granularity must be syllable or word, got {merged['granularity']!r}")
    mock = list(merged["mock"] or [])
    if any(m not in ("unigram", "table") for m in mock):
        raise UsageError("mock entries must be 'unigram' or 'table'")

    spec = RunSpec(
        command=args.command,
        text=merged["text"],
        dataset=merged["dataset"],
        granularity=granularity,
        k=int(merged["k"]),
        budget=None if merged["budget"] is None else int(merged["budget"]),
        max_substitutions=(
            None if merged["max_substitutions"] is None else int(merged["max_substitutions"])
        ),
        classifier_url=merged["classifier_url"],
        mlm_url=merged["mlm_url"],
        mock=mock,
        lexicon=merged["lexicon"],
        out=merged["out"],
        report=merged["report"],
        parallelism=int(merged["parallelism"]),
        seed=int(merged["seed"]),
        resume=bool(merged["resume"]),
    )
    if spec.k < 1:
        raise UsageError("--k must be >= 1")
    if spec.budget is not None and spec.budget < 1:
        raise UsageError("--budget must be >= 1")
    if spec.parallelism < 1:
        raise UsageError("--parallelism must be >= 1")
    return spec


def make_oracles(spec: RunSpec):
    """(classifier, masked_lm, segmenter) per the spec's source options."""
    bench = None
    if spec.mock:
        bench = benchmark.make_benchmark(n_samples=1)

    if spec.classifier_url:
        classifier = HttpClassifier(spec.classifier_url)
    elif "unigram" in spec.mock:
        classifier = bench.classifier
    else:
        raise UsageError("need --classifier-url or --mock unigram")

    if spec.mlm_url:
        masked_lm = HttpMaskedLM(spec.mlm_url)
    elif "table" in spec.mock:
        masked_lm = (
            bench.word_lm if spec.granularity is Granularity.WORD else bench.syllable_lm
        )
    else:
        raise UsageError("need --mlm-url or --mock table")

    segmenter = None
    if spec.granularity is Granularity.WORD:
        if spec.lexicon:
            segmenter = LexiconSegmenter.from_file(spec.lexicon)
        elif spec.mock:
            segmenter = LexiconSegmenter(bench.lexicon)
        else:
            print(
                "warning: word granularity without --lexicon; "
                "falling back to per-syllable word spans",
                file=sys.stderr,
            )
    return classifier, masked_lm, segmenter


def _attack_config(spec: RunSpec) -> AttackConfig:
    return AttackConfig(
        granularity=spec.granularity,
        k=spec.k,
        query_budget=spec.budget,
        max_substitutions=spec.max_substitutions,
    )


def _print_outcome(outcome) -> None:
    print(f"status: {outcome.status.value}")
    if outcome.original_label is not None:
        print(f"original label: {outcome.original_label}")
    if outcome.status is AttackStatus.SUCCESS:
        print(f"adversarial label: {outcome.adversarial_label}")
        print(f"adversarial text: {outcome.adversarial_text}")
        print(f"edit distance: {outcome.ld}")
    for index, old, new in outcome.substitutions_applied:
        print(f"  unit {index}: {old} -> {new}")
    print(f"queries: {outcome.queries_used}  mlm calls: {outcome.mlm_calls}")
    if outcome.error:
        print(f"error: {outcome.error}")


def _outcome_exit(outcome) -> int:
    if outcome.status is AttackStatus.SUCCESS:
        return EXIT_SUCCESS
    if outcome.status is AttackStatus.ERROR:
        return EXIT_ERROR
    return EXIT_FAILURE


def _write_single_outcome(spec: RunSpec, outcome) -> None:
    if spec.out:
        with open(spec.out, "w", encoding="utf-8") as fp:
            write_record(fp, outcome_record(Sample(id="cli", text=outcome.original_text), outcome))


def _preflight(classifier, masked_lm) -> None:
    # Let TransportError escape to main(), which maps it to exit 69.
    classifier.info()
    masked_lm.info()


def cmd_attack(spec: RunSpec) -> int:
    if not spec.text:
        raise UsageError("attack needs --text")
    classifier, masked_lm, segmenter = make_oracles(spec)
    _preflight(classifier, masked_lm)
    outcome = attack(spec.text, classifier, masked_lm, _attack_config(spec), segmenter=segmenter)
    _print_outcome(outcome)
    _write_single_outcome(spec, outcome)
    return _outcome_exit(outcome)


def _run_dataset(spec: RunSpec, attack_fn, column: str) -> int:
    samples = load_dataset(spec.dataset)
    classifier, masked_lm, segmenter = make_oracles(spec)
    report = run_campaign(
        samples,
        classifier,
        masked_lm,
        _attack_config(spec),
        parallelism=spec.parallelism,
        outcome_path=spec.out,
        resume=spec.resume,
        segmenter=segmenter,
        attack_fn=attack_fn,
    )
    print(render_report_table(report, column=column))
    counts = report.counts
    print(
        f"samples: {counts['total']}  success: {counts['success']}  "
        f"failure: {counts['failure']}  skipped: {counts['skipped']}  "
        f"error: {counts['error']}"
    )
    if spec.report:
        write_report_json(report, spec.report)
    return EXIT_SUCCESS


def cmd_campaign(spec: RunSpec) -> int:
    if not spec.dataset:
        raise UsageError("campaign needs --dataset")
    return _run_dataset(spec, attack, column="attack")


def cmd_baseline(spec: RunSpec) -> int:
    if bool(spec.text) == bool(spec.dataset):
        raise UsageError("baseline needs exactly one of --text or --dataset")
    if spec.dataset:
        return _run_dataset(spec, baseline_attack_fn(spec.seed), column="baseline")
    classifier, masked_lm, segmenter = make_oracles(spec)
    _preflight(classifier, masked_lm)
    outcome = random_attack(
        spec.text, classifier, masked_lm, _attack_config(spec), seed=spec.seed, segmenter=segmenter
    )
    _print_outcome(outcome)
    _write_single_outcome(spec, outcome)
    return _outcome_exit(outcome)


SMOKE_TEXT = TSHEG.join(("ཀ", "ཁ"))


class _Probe:
    """Contract checks against a live server; one ok/FAIL line per check."""

    def __init__(self):
        self.failures = 0

    def check(self, name: str, fn):
        try:
            result = fn()
        except OracleError as exc:
            self.failures += 1
            print(f"FAIL  {name}: {exc}")
            return None
        print(f"ok    {name}")
        return result

    def probe_classifier(self, client: HttpClassifier) -> None:
        info = self.check("classifier info", client.info)
        if info is not None and not info.unk_literal:
            self.failures += 1
            print("FAIL  classifier declares unk_literal: missing (saliency needs it)")

        def smoke():
            [dist] = client.classify([SMOKE_TEXT])
            return dist

        dist = self.check("classifier smoke classify", smoke)
        if dist is not None:
            print(f"      top label: {dist.top_label()} of {len(dist.labels)}")

    def probe_masked_lm(self, client: HttpMaskedLM) -> None:
        info = self.check("masked-lm info", client.info)
        if info is not None and not info.mask_literal:
            self.failures += 1
            print("FAIL  masked-lm declares mask_literal: missing")
            return
        seg = segment_syllables(SMOKE_TEXT)

        def smoke():
            raw = client.fill_mask_raw(seg, 0, 5)
            if not raw:
                raise ProtocolError("server returned zero candidates")
            return raw

        raw = self.check("masked-lm smoke fill-mask", smoke)
        if raw is not None:
            cleaned = client.fill_mask(seg, 0, 5)
            print(f"      candidates: {len(raw)} raw, {len(cleaned)} after filtering")
            if any(token == seg.units[0].token for token, _ in raw):
                print("note  server echoes the original token; the engine filters it")


def cmd_probe(spec: RunSpec) -> int:
    if not spec.classifier_url and not spec.mlm_url:
        raise UsageError("probe needs --classifier-url and/or --mlm-url")
    probe = _Probe()
    for url, label, client_cls, run in (
        (spec.classifier_url, "classifier", HttpClassifier, probe.probe_classifier),
        (spec.mlm_url, "masked-lm", HttpMaskedLM, probe.probe_masked_lm),
    ):
        if not url:
            continue
        client = client_cls(url)
        if not client.healthy():
            print(f"FAIL  {label} healthz: {url} unreachable")
            return EXIT_UNAVAILABLE
        print(f"ok    {label} healthz")
        run(client)
    if probe.failures:
        print(f"{probe.failures} check(s) failed")
        return EXIT_FAILURE
    return EXIT_SUCCESS


COMMANDS = {
    "attack": cmd_attack,
    "campaign": cmd_campaign,
    "baseline": cmd_baseline,
    "probe": cmd_probe,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        spec = resolve(args)
        return COMMANDS[spec.command](spec)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreflightError, TransportError) as exc:
        print(f"oracle unavailable: {exc}", file=sys.stderr)
        return EXIT_UNAVAILABLE
    except (DatasetError, OracleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
