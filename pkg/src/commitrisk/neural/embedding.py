"""Node-content vocabulary, skip-gram pretraining, and input features.

A node's content token is its label when nonempty, else its kind.  Features
for the classifier are the content embedding concatenated with a one-hot of
the change annotation, in the fixed order (unchanged, added, deleted).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

UNK = "<unk>"
ALPHA_ORDER = ("unchanged", "added", "deleted")


@dataclass(frozen=True)
class Vocab:
    index: dict[str, int]

    def __post_init__(self):
        if UNK not in self.index:
            raise ValueError("vocab must contain the UNK token")

    @property
    def size(self) -> int:
        return len(self.index)

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.index[UNK])

    def tokens(self) -> list[str]:
        """Tokens in index order."""
        return sorted(self.index, key=self.index.get)


@dataclass
class EmbeddingTable:
    vocab: Vocab
    weights: np.ndarray  # V x d_emb

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape[0] != self.vocab.size:
            raise ValueError("embedding rows do not match vocab size")


def build_vocab(streams: Iterable[Sequence[str]], min_count: int = 1) -> Vocab:
    counts = Counter()
    for stream in streams:
        counts.update(stream)
    kept = sorted(t for t, c in counts.items() if c >= min_count and t != UNK)
    index = {UNK: 0}
    for token in kept:
        index[token] = len(index)
    return Vocab(index)


@dataclass(frozen=True)
class SkipgramConfig:
    dim: int = 64
    window: int = 2
    negatives: int = 5
    epochs: int = 1
    lr: float = 0.025
    seed: int = 0


def skipgram_pretrain(streams: Iterable[Sequence[str]], vocab: Vocab,
                      cfg: SkipgramConfig = SkipgramConfig()) -> EmbeddingTable:
    """Skip-gram with negative sampling over the token streams.

    Sequential single-threaded SGD, so a fixed seed gives byte-identical
    tables.  epochs=0 returns the seeded initialization untouched.
    """
    rng = np.random.default_rng(cfg.seed)
    v = vocab.size
    w_in = (rng.random((v, cfg.dim)) - 0.5) / cfg.dim
    w_out = np.zeros((v, cfg.dim))
    encoded = [[vocab.lookup(t) for t in stream] for stream in streams]
    for _ in range(cfg.epochs):
        for stream in encoded:
            for pos, center in enumerate(stream):
                lo = max(0, pos - cfg.window)
                hi = min(len(stream), pos + cfg.window + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    targets = [stream[ctx_pos]]
                    labels = [1.0]
                    for t in rng.integers(0, v, cfg.negatives):
                        targets.append(int(t))
                        labels.append(0.0)
                    vc = w_in[center]
                    grad_c = np.zeros(cfg.dim)
                    for t, y in zip(targets, labels):
                        z = 1.0 / (1.0 + np.exp(-vc @ w_out[t]))
                        g = cfg.lr * (y - z)
                        grad_c += g * w_out[t]
                        w_out[t] += g * vc
                    w_in[center] = vc + grad_c
    return EmbeddingTable(vocab, w_in)


def node_content(node) -> str:
    """Content token for any AST/graph/change-graph node."""
    return node.label if node.label else node.kind


def node_token_ids(nodes, vocab: Vocab) -> np.ndarray:
    return np.array([vocab.lookup(node_content(n)) for n in nodes], dtype=np.intp)


def alpha_onehot(nodes) -> np.ndarray:
    out = np.zeros((len(nodes), len(ALPHA_ORDER)))
    for row, node in enumerate(nodes):
        out[row, ALPHA_ORDER.index(node.alpha)] = 1.0
    return out


def node_features(g, emb: EmbeddingTable) -> np.ndarray:
    """|N| x (d_emb + 3) input matrix for a change graph."""
    ids = node_token_ids(g.nodes, emb.vocab)
    return np.concatenate([emb.weights[ids], alpha_onehot(g.nodes)], axis=1)
