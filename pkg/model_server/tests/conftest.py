"""Fixtures: tiny local BERT checkpoints and live uvicorn servers.

Models are built in-process with seeded random weights over a small
Tibetan-syllable vocabulary, then saved to disk so the backends exercise
the real from_pretrained loading path.
"""

import threading
import time

import pytest
import torch
import uvicorn
from transformers import (
    BertConfig,
    BertForMaskedLM,
    BertForSequenceClassification,
    BertTokenizer,
)

from model_server.backends import build_backend
from model_server.config import ServerConfig
from model_server.service import build_app

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "་", "།",
    "ཀ", "ཁ", "ག", "ང", "ཅ", "ཆ", "ཇ", "ཉ", "ཏ", "ཐ", "ད", "ན",
    "##ཀ", "##ི", "##ུ",
]


def _write_tokenizer(out_dir):
    vocab = {token: index for index, token in enumerate(VOCAB)}
    BertTokenizer(vocab=vocab, do_lower_case=False).save_pretrained(out_dir)


def _tiny_config(**extra):
    return BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        **extra,
    )


@pytest.fixture(scope="session")
def mlm_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny-mlm")
    _write_tokenizer(out)
    torch.manual_seed(7)
    BertForMaskedLM(_tiny_config()).save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def classifier_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny-classifier")
    _write_tokenizer(out)
    torch.manual_seed(11)
    config = _tiny_config(
        num_labels=2, id2label={0: "neg", 1: "pos"}, label2id={"neg": 0, "pos": 1}
    )
    BertForSequenceClassification(config).save_pretrained(out)
    return str(out)


class LiveServer:
    """uvicorn on an ephemeral port in a daemon thread."""

    def __init__(self, app):
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self.url = ""

    def __enter__(self):
        self._thread.start()
        deadline = time.monotonic() + 30
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 30s")
            time.sleep(0.05)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        self.url = f"http://127.0.0.1:{port}"
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture(scope="session")
def live_servers(classifier_dir, mlm_dir):
    """(classifier_url, masked_lm_url) for a running server pair."""
    cls_app = build_app(
        build_backend(ServerConfig(model=classifier_dir, role="classifier", max_batch=400))
    )
    mlm_app = build_app(
        build_backend(ServerConfig(model=mlm_dir, role="masked-lm", max_batch=400))
    )
    with LiveServer(cls_app) as cls_srv, LiveServer(mlm_app) as mlm_srv:
        yield cls_srv.url, mlm_srv.url
