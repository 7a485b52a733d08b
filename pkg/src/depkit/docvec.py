"""Distributed-memory paragraph vectors with negative sampling.

Each document owns a trainable vector; at every position the document
vector is averaged with the window's word vectors and trained to score the
center word above sampled negatives (sigmoid loss on dot products).
Inference for unseen documents freezes word and output weights and fits
only a fresh document vector.

Defaults: 100 dimensions, 20 epochs, window 5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput


def _sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


@dataclass
class DocVecParams:
    dim: int = 100
    epochs: int = 20
    window: int = 5
    negative: int = 5
    min_count: int = 2
    initial_lr: float = 0.025
    min_lr: float = 1e-4

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "epochs": self.epochs,
            "window": self.window,
            "negative": self.negative,
            "min_count": self.min_count,
            "initial_lr": self.initial_lr,
            "min_lr": self.min_lr,
        }


class DocVecModel:
    """Paragraph-vector embedder; fit on training texts, infer for new ones."""

    def __init__(self, params: DocVecParams | None = None, seed: int = 1) -> None:
        self.params = params or DocVecParams()
        self.seed = seed
        self.vocab: dict[str, int] = {}
        self.word_in: np.ndarray | None = None
        self.word_out: np.ndarray | None = None
        self.doc_vectors: np.ndarray | None = None
        self._neg_table: np.ndarray | None = None

    # - internals -

    def _tokenize(self, text: str) -> list[str]:
        return text.lower().split()

    def _doc_ids(self, text: str) -> np.ndarray:
        return np.array(
            [self.vocab[w] for w in self._tokenize(text) if w in self.vocab],
            dtype=np.int64,
        )

    def _build_vocab(self, texts: list[str]) -> list[np.ndarray]:
        counts: dict[str, int] = {}
        for text in texts:
            for w in self._tokenize(text):
                counts[w] = counts.get(w, 0) + 1
        kept = sorted(w for w, c in counts.items() if c >= self.params.min_count)
        if not kept:  # degenerate corpora: keep everything rather than nothing
            kept = sorted(counts)
        self.vocab = {w: i for i, w in enumerate(kept)}
        freqs = np.array([counts[w] for w in kept], dtype=np.float64)
        # Unigram^0.75 negative-sampling table.
        probs = freqs**0.75
        self._neg_table = probs / probs.sum()
        return [self._doc_ids(t) for t in texts]

    def _train_doc(
        self,
        doc_vec: np.ndarray,
        word_ids: np.ndarray,
        rng: np.random.Generator,
        lr: float,
        update_words: bool,
    ) -> None:
        p = self.params
        n = len(word_ids)
        for t in range(n):
            lo, hi = max(0, t - p.window), min(n, t + p.window + 1)
            context = np.concatenate([word_ids[lo:t], word_ids[t + 1 : hi]])
            if len(context) == 0:
                h = doc_vec.copy()
            else:
                h = (doc_vec + self.word_in[context].sum(axis=0)) / (1 + len(context))
            center = word_ids[t]
            negatives = rng.choice(
                len(self.vocab), size=p.negative, p=self._neg_table
            )
            targets = np.concatenate([[center], negatives])
            signs = np.zeros(len(targets))
            signs[0] = 1.0
            out = self.word_out[targets]
            grad_scale = (_sigmoid(out @ h) - signs) * lr
            grad_h = grad_scale @ out
            self.word_out[targets] -= np.outer(grad_scale, h)
            share = grad_h / (1 + len(context))
            doc_vec -= share
            if update_words and len(context):
                np.add.at(self.word_in, context, -share)

    # - public API -

    def fit(self, texts: list[str]) -> "DocVecModel":
        if not texts:
            raise EmptyInput("cannot fit document embeddings on no texts")
        p = self.params
        docs = self._build_vocab(list(texts))
        rng = np.random.default_rng(self.seed)
        vocab_size = len(self.vocab)
        scale = 1.0 / p.dim
        self.word_in = (rng.random((vocab_size, p.dim)) - 0.5) * scale
        self.word_out = np.zeros((vocab_size, p.dim))
        self.doc_vectors = (rng.random((len(docs), p.dim)) - 0.5) * scale

        total = p.epochs * max(1, len(docs))
        step = 0
        for _epoch in range(p.epochs):
            for d, word_ids in enumerate(docs):
                lr = max(
                    p.min_lr, p.initial_lr * (1.0 - step / total)
                )
                self._train_doc(
                    self.doc_vectors[d], word_ids, rng, lr, update_words=True
                )
                step += 1
        return self

    def transform(self, texts: list[str]) -> np.ndarray:
        """Infer vectors for new texts with frozen word/output weights."""
        if self.doc_vectors is None:
            raise EmptyInput("model is not fitted")
        if not texts:
            raise EmptyInput("no texts to embed")
        p = self.params
        out = np.zeros((len(texts), p.dim))
        for i, text in enumerate(texts):
            rng = np.random.default_rng((self.seed, 0x5EED, i))
            vec = (rng.random(p.dim) - 0.5) / p.dim
            word_ids = self._doc_ids(text)
            total = max(1, p.epochs)
            for epoch in range(p.epochs):
                lr = max(p.min_lr, p.initial_lr * (1.0 - epoch / total))
                self._train_doc(vec, word_ids, rng, lr, update_words=False)
            out[i] = vec
        return out
