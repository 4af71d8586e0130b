#!/usr/bin/env python3
"""Run the synthetic benchmark: engine vs. random baseline, both granularities.

All four campaigns share the same query budget and substitution cap, so the
only difference between engine and baseline rows is position ordering and
candidate selection.  Deterministic: same seed, same numbers.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tibattack.attack import AttackConfig
from tibattack.baseline import baseline_attack_fn
from tibattack.benchmark import DEFAULT_SEED, make_benchmark
from tibattack.campaign import run_campaign
from tibattack.segmenters import LexiconSegmenter
from tibattack.tibetan import Granularity

QUERY_BUDGET = 400
MAX_SUBSTITUTIONS = 3
BASELINE_SEED = 7


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=200)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--parallelism", type=int, default=4)
    parser.add_argument("--out-dir", help="write per-run outcome/report files here")
    args = parser.parse_args()

    bench = make_benchmark(n_samples=args.samples, seed=args.seed)
    segmenter = LexiconSegmenter(bench.lexicon)

    def config(granularity: Granularity) -> AttackConfig:
        return AttackConfig(
            granularity=granularity,
            query_budget=QUERY_BUDGET,
            max_substitutions=MAX_SUBSTITUTIONS,
        )

    runs = [
        ("engine-syllable", None, Granularity.SYLLABLE, bench.syllable_lm),
        ("engine-word", None, Granularity.WORD, bench.word_lm),
        ("baseline-syllable", baseline_attack_fn(BASELINE_SEED), Granularity.SYLLABLE, bench.syllable_lm),
        ("baseline-word", baseline_attack_fn(BASELINE_SEED), Granularity.WORD, bench.word_lm),
    ]

    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    print(f"{'run':<20}{'ADV':>8}{'ASR':>8}{'LD':>8}{'queries':>10}")
    reports = {}
    for name, attack_fn, granularity, lm in runs:
        kwargs = {"attack_fn": attack_fn} if attack_fn else {}
        report = run_campaign(
            list(bench.samples),
            bench.classifier,
            lm,
            config(granularity),
            parallelism=args.parallelism,
            segmenter=segmenter if granularity is Granularity.WORD else None,
            outcome_path=out_dir / f"{name}.jsonl" if out_dir else None,
            **kwargs,
        )
        reports[name] = report
        ld = f"{report.mean_ld:.3f}" if report.mean_ld_defined else "n/a"
        print(
            f"{name:<20}{report.adv:>8.3f}{report.asr:>8.3f}{ld:>8}"
            f"{report.mean_queries:>10.1f}"
        )
        if out_dir:
            (out_dir / f"{name}.report.json").write_text(
                json.dumps(report.to_json_dict(), ensure_ascii=False, indent=2) + "\n",
                encoding="utf-8",
            )

    print()
    gap = reports["engine-syllable"].asr - reports["baseline-syllable"].asr
    print(f"engine ASR lead over baseline (syllable): {gap:+.3f}")
    print(
        "syllable mean-LD <= word mean-LD: "
        f"{reports['engine-syllable'].mean_ld:.3f} <= {reports['engine-word'].mean_ld:.3f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
