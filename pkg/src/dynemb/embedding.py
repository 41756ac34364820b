"""Embedding weight tables: construction, cold-start initializers, remap.

A weight table is a plain ``(vocab_size, dim)`` float64 ndarray whose row
``i`` belongs to the token with id ``i`` in the owning :class:`VocabMap`.
``remap`` rebuilds a table against a new vocabulary: rows for tokens that
survive are copied verbatim, rows for fresh tokens come from the chosen
initializer. Because it walks the new map, the same operation covers both
growth and shrinkage; tokens dropped from the new map simply contribute
nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .vocab import UNK, VocabMap

SimilarityRanking = Union[
    Mapping[str, Sequence[tuple[str, float]]],
    Callable[[str], Sequence[tuple[str, float]]],
]


@dataclass(frozen=True)
class RandomInit:
    """Fresh uniform draws on [-scale, +scale] for every new row."""

    scale: float = 0.1

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class UnknownCopy:
    """Copy the unknown token's learned row."""


@dataclass(frozen=True)
class GlobalAverage:
    """Arithmetic mean over every existing row, the unknown row included."""


@dataclass(frozen=True)
class CategoryAverage:
    """Mean over existing rows sharing the new token's category label.

    Falls back to the global average when the new token has no category or
    no existing token shares it, and to the unknown row as a last resort.
    """


@dataclass(frozen=True)
class FeatureSimilar:
    """Copy the row of the highest-scored similar token.

    The ranking is supplied externally, either as a mapping from new token
    to a list of ``(existing token, score)`` pairs or as a callable with the
    same contract. An empty ranking falls back to the category-average
    chain.
    """

    ranking: SimilarityRanking = field(default_factory=dict)

    def candidates(self, token: str) -> Sequence[tuple[str, float]]:
        if callable(self.ranking):
            return self.ranking(token) or ()
        return self.ranking.get(token, ())


InitStrategy = Union[RandomInit, UnknownCopy, GlobalAverage, CategoryAverage, FeatureSimilar]

# Strategy constructors keyed by the names used in configs and the CLI.
STRATEGIES: dict[str, Callable[..., InitStrategy]] = {
    "random": RandomInit,
    "unknown": UnknownCopy,
    "average": GlobalAverage,
    "category": CategoryAverage,
    "similar": FeatureSimilar,
}


def new_random(
    vocab: VocabMap,
    dim: int,
    seed: int | np.random.SeedSequence | np.random.Generator,
    scale: float = 0.1,
) -> np.ndarray:
    """Whole table of i.i.d. uniform[-scale, +scale] draws, seeded."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(len(vocab), dim))


def init_row(
    strategy: InitStrategy,
    old_emb: np.ndarray,
    old_vocab: VocabMap,
    token: str,
    rng: Optional[np.random.Generator] = None,
    category: Optional[str] = None,
) -> np.ndarray:
    """Initial weight row for a token absent from ``old_vocab``.

    ``category`` is the new token's category label; it cannot come from
    ``old_vocab`` because the token is not in it. Only :class:`RandomInit`
    consumes the generator; every other strategy is a pure function of the
    existing table.
    """
    if old_emb.ndim != 2 or old_emb.shape[0] == 0:
        raise ValueError("existing embedding table is empty or malformed")
    dim = old_emb.shape[1]

    if isinstance(strategy, RandomInit):
        if rng is None:
            raise ValueError("RandomInit requires a generator")
        return rng.uniform(-strategy.scale, strategy.scale, size=dim)

    if isinstance(strategy, UnknownCopy):
        return old_emb[old_vocab.lookup(UNK)].copy()

    if isinstance(strategy, GlobalAverage):
        return old_emb.mean(axis=0)

    if isinstance(strategy, CategoryAverage):
        if category is not None:
            rows = [
                idx for tok, idx in old_vocab.items()
                if old_vocab.category(tok) == category
            ]
            if rows:
                return old_emb[rows].mean(axis=0)
        return old_emb.mean(axis=0)

    if isinstance(strategy, FeatureSimilar):
        best: Optional[int] = None
        best_score = -np.inf
        for cand, score in strategy.candidates(token):
            if not np.isfinite(score):
                raise ValueError(f"non-finite similarity score for {token!r}")
            if cand in old_vocab and score > best_score:
                best = old_vocab.lookup(cand)
                best_score = score
        if best is not None:
            return old_emb[best].copy()
        return init_row(CategoryAverage(), old_emb, old_vocab, token, rng, category)

    raise TypeError(f"unknown init strategy: {strategy!r}")


def remap(
    new_vocab: VocabMap,
    old_vocab: VocabMap,
    old_emb: np.ndarray,
    strategy: InitStrategy,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Rebuild ``old_emb`` against ``new_vocab``.

    Rows of tokens present in both vocabularies are copied bit for bit. Rows
    of fresh tokens are initialized by ``strategy``; random draws happen in
    ascending new-id order so results do not depend on map iteration order.
    Tokens present only in the old vocabulary are dropped.
    """
    old_emb = np.asarray(old_emb, dtype=np.float64)
    if old_emb.ndim != 2:
        raise ValueError("embedding table must be 2-dimensional")
    if old_emb.shape[0] != len(old_vocab):
        raise ValueError(
            f"embedding rows ({old_emb.shape[0]}) do not match "
            f"old vocabulary size ({len(old_vocab)})"
        )
    dim = old_emb.shape[1]

    kept_new: list[int] = []
    kept_old: list[int] = []
    fresh: list[tuple[int, str]] = []
    for token, new_id in new_vocab.items():
        if token in old_vocab:
            kept_new.append(new_id)
            kept_old.append(old_vocab.lookup(token))
        else:
            fresh.append((new_id, token))

    out = np.empty((len(new_vocab), dim), dtype=np.float64)
    if kept_new:
        out[kept_new] = old_emb[kept_old]
    for new_id, token in fresh:  # items() yields ascending ids already
        out[new_id] = init_row(
            strategy, old_emb, old_vocab, token, rng,
            category=new_vocab.category(token),
        )
    return out
