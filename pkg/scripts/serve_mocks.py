#!/usr/bin/env python3
"""Serve the benchmark mock oracles over the wire protocol.

Starts one HTTP server for the unigram classifier and one for the table
masked LM, so CLI runs and probes can exercise the real client stack:

    python3 scripts/serve_mocks.py --classifier-port 8761 --mlm-port 8762
    tibattack probe --classifier-url http://127.0.0.1:8761 \\
                    --mlm-url http://127.0.0.1:8762
"""

import argparse
import signal
import sys
import threading
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from tibattack.benchmark import make_benchmark
from tibattack.mock_server import start_server
from tibattack.segmenters import LexiconSegmenter
from tibattack.tibetan import Granularity


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--classifier-port", type=int, default=8761)
    parser.add_argument("--mlm-port", type=int, default=8762)
    parser.add_argument(
        "--granularity", choices=["syllable", "word"], default="syllable",
        help="which mock masked LM to serve",
    )
    args = parser.parse_args()

    bench = make_benchmark(n_samples=1)
    lm = bench.word_lm if args.granularity == "word" else bench.syllable_lm
    segmenter = (
        LexiconSegmenter(bench.lexicon)
        if Granularity(args.granularity) is Granularity.WORD
        else None
    )

    clf_server = start_server(
        classifier=bench.classifier, host=args.host, port=args.classifier_port
    )
    lm_server = start_server(
        masked_lm=lm, segmenter=segmenter, host=args.host, port=args.mlm_port
    )
    print(f"classifier: {clf_server.base_url}  (model {bench.classifier.info().model_id})")
    print(f"masked lm:  {lm_server.base_url}  (model {lm.info().model_id})")
    print("Ctrl-C to stop")

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()
    clf_server.shutdown()
    lm_server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
