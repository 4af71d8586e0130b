"""Model-backed request handlers.

Inference runs in eval mode with no sampling, so identical requests get
identical bodies. All probability math is done in float64 and explicitly
renormalized before emission.
"""

import threading

import numpy as np
import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)

from model_server.config import ConfigError, ServerConfig

# Sub-word continuation markers emitted by WordPiece and SentencePiece.
_SUBWORD_MARKERS = ("##", "▁")


class MaskIndexError(ValueError):
    """mask_token_index does not select a mask occurrence in the text."""


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits.astype(np.float64) - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def _check_head(model, required: str, model_id: str):
    # Loading a checkpoint under the wrong Auto class silently re-inits
    # the head, so trust the recorded architectures instead.
    architectures = getattr(model.config, "architectures", None) or []
    if architectures and not any(required in arch for arch in architectures):
        raise ConfigError(
            f"{model_id}: checkpoint head {architectures} does not match role"
        )


def strip_marker(token: str) -> str:
    for marker in _SUBWORD_MARKERS:
        if token.startswith(marker):
            return token[len(marker):]
    return token


class ClassifierBackend:
    role = "classifier"

    def __init__(self, config: ServerConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModelForSequenceClassification.from_pretrained(config.model)
        _check_head(self.model, "SequenceClassification", config.model)
        self.model.to(config.device)
        self.model.eval()
        # One inference at a time per device; handlers run concurrently.
        self._lock = threading.Lock()
        n = self.model.config.num_labels
        if config.labels is not None:
            if len(config.labels) != n:
                raise ConfigError(f"model has {n} outputs, {len(config.labels)} labels given")
            self.labels = list(config.labels)
        else:
            id2label = self.model.config.id2label
            self.labels = [id2label[i] for i in range(n)]

    def classify(self, texts: list[str]) -> list[dict]:
        if not texts:
            return []
        enc = self.tokenizer(
            texts, padding=True, truncation=True, return_tensors="pt"
        ).to(self.config.device)
        with self._lock, torch.no_grad():
            logits = self.model(**enc).logits
        probs = _softmax(logits.cpu().numpy())
        return [
            {"probs": row.tolist(), "labels": self.labels} for row in probs
        ]

    def info(self) -> dict:
        return {
            "model_id": self.config.model,
            "labels": self.labels,
            "max_batch": self.config.max_batch,
            "unk_literal": self.tokenizer.unk_token,
        }


class MaskedLMBackend:
    role = "masked-lm"

    def __init__(self, config: ServerConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModelForMaskedLM.from_pretrained(config.model)
        _check_head(self.model, "MaskedLM", config.model)
        self.model.to(config.device)
        self.model.eval()
        self._lock = threading.Lock()
        self._special_ids = set(self.tokenizer.all_special_ids)

    def fill_mask(
        self,
        text_with_mask: str,
        mask_token_index: int,
        top_k: int,
        original_token=None,
    ) -> list[dict]:
        enc = self.tokenizer(
            text_with_mask, truncation=True, return_tensors="pt"
        ).to(self.config.device)
        ids = enc["input_ids"][0]
        positions = (ids == self.tokenizer.mask_token_id).nonzero().flatten().tolist()
        if mask_token_index >= len(positions):
            raise MaskIndexError(
                f"mask_token_index {mask_token_index} out of range: "
                f"text has {len(positions)} mask occurrence(s)"
            )
        with self._lock, torch.no_grad():
            logits = self.model(**enc).logits[0, positions[mask_token_index]]
        probs = _softmax(logits.cpu().numpy())

        # Descending probability; ties resolve to the lower token id so
        # repeated requests cannot reorder.
        order = np.argsort(-probs, kind="stable")
        candidates = []
        seen = set()
        for token_id in order:
            if int(token_id) in self._special_ids:
                continue
            token = strip_marker(self.tokenizer.convert_ids_to_tokens(int(token_id)))
            if not token or token == original_token or token in seen:
                continue
            seen.add(token)
            candidates.append({"token": token, "score": float(probs[token_id])})
            if len(candidates) == top_k:
                break
        return candidates

    def info(self) -> dict:
        return {
            "model_id": self.config.model,
            "max_batch": self.config.max_batch,
            "unk_literal": self.tokenizer.unk_token,
            "mask_literal": self.tokenizer.mask_token,
        }


def build_backend(config: ServerConfig):
    if config.role == "classifier":
        return ClassifierBackend(config)
    return MaskedLMBackend(config)
