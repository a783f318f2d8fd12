"""Entailment backends.

A backend turns (premise, hypothesis) pairs into (contradiction,
entailment) logit pairs; the service layer owns all normalization. Two
implementations: a transformers-based MNLI model and a deterministic
hash backend for protocol tests and offline use.
"""

from __future__ import annotations

import hashlib
import re
from typing import Sequence

_WORD_RE = re.compile(r"\w+")

HASH_MODEL_ID = "hash"
HASH_MAX_PREMISE_WORDS = 512


def _tokens(text: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(text.casefold()))


class HashEntailmentBackend:
    """Deterministic stand-in model.

    Logits mix token overlap with digest-derived noise, so related
    hypotheses score higher while everything stays a pure function of the
    (premise, hypothesis) pair - which makes label-order equivariance and
    determinism structural.
    """

    model_id = HASH_MODEL_ID

    def score_pairs(
        self, premise: str, hypotheses: Sequence[str]
    ) -> tuple[list[tuple[float, float]], bool]:
        words = premise.split()
        truncated = len(words) > HASH_MAX_PREMISE_WORDS
        if truncated:
            premise = " ".join(words[:HASH_MAX_PREMISE_WORDS])
        premise_tokens = _tokens(premise)
        pairs = []
        for hypothesis in hypotheses:
            digest = hashlib.sha256(f"{premise}\x1f{hypothesis}".encode()).digest()
            noise_e = int.from_bytes(digest[:8], "big") / 2**64
            noise_c = int.from_bytes(digest[8:16], "big") / 2**64
            overlap = len(premise_tokens & _tokens(hypothesis))
            entail = 2.0 * overlap + 2.0 * noise_e - 1.0
            contra = 1.0 - overlap + 2.0 * noise_c - 1.0
            pairs.append((contra, entail))
        return pairs, truncated


class TransformersEntailmentBackend:
    """MNLI-finetuned sequence classifier loaded from a checkpoint name.

    The premise is truncated server-side to the model context (token
    granularity, hypothesis kept whole); truncation is reported upward.
    """

    def __init__(self, checkpoint: str):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self.model_id = checkpoint
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = AutoModelForSequenceClassification.from_pretrained(checkpoint)
        self.model.eval()
        label2id = {k.lower(): v for k, v in self.model.config.label2id.items()}
        self._entail = next(v for k, v in label2id.items() if "entail" in k)
        self._contra = next(v for k, v in label2id.items() if "contradict" in k)

    def score_pairs(
        self, premise: str, hypotheses: Sequence[str]
    ) -> tuple[list[tuple[float, float]], bool]:
        max_length = min(self.tokenizer.model_max_length, 1024)
        encoded = self.tokenizer(
            [premise] * len(hypotheses),
            list(hypotheses),
            truncation="only_first",
            max_length=max_length,
            padding=True,
            return_tensors="pt",
        )
        truncated = bool((encoded["input_ids"].shape[1] >= max_length))
        with self._torch.no_grad():
            logits = self.model(**encoded).logits
        pairs = [
            (float(row[self._contra]), float(row[self._entail])) for row in logits
        ]
        return pairs, truncated


def build_backend(checkpoint: str):
    if checkpoint == HASH_MODEL_ID:
        return HashEntailmentBackend()
    return TransformersEntailmentBackend(checkpoint)
