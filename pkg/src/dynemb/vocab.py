"""Token-to-id vocabularies with a reserved unknown token.

A :class:`VocabMap` is an immutable bijection between tokens (product id
strings) and contiguous integer ids. Id 0 always belongs to the reserved
unknown token ``"<UNK>"``; any token not present in the map resolves to it.
Extension keeps every existing id stable, pruning re-indexes survivors while
preserving their relative order, so successive vocabularies can drive an
embedding-table rebuild week after week.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Optional

UNK = "<UNK>"


class VocabMap:
    """Immutable token -> id mapping with ``"<UNK>"`` pinned to id 0.

    Ids are contiguous ``0..len-1`` and assigned in first-occurrence order,
    which makes construction deterministic for a given token sequence.
    Optionally carries a token -> category label association used by the
    category-average cold-start initializer.
    """

    __slots__ = ("_ids", "_categories")

    def __init__(
        self,
        ids: Mapping[str, int],
        categories: Optional[Mapping[str, str]] = None,
    ) -> None:
        ids = dict(ids)
        if ids.get(UNK) != 0:
            raise ValueError(f"vocabulary must contain {UNK!r} at id 0")
        seen = sorted(ids.values())
        if seen != list(range(len(ids))):
            raise ValueError("vocabulary ids must be contiguous and unique")
        for token in ids:
            if not token:
                raise ValueError("empty token in vocabulary")
        self._ids = ids
        self._categories = {
            tok: cat for tok, cat in dict(categories or {}).items()
            if tok in ids and tok != UNK
        }

    @classmethod
    def build(
        cls,
        tokens: Iterable[str],
        categories: Optional[Mapping[str, str]] = None,
    ) -> "VocabMap":
        """Build a vocabulary from a token sequence, duplicates allowed.

        Distinct tokens get ids 1..k in first-occurrence order. The literal
        unknown token is rejected: it is reserved and never a data token.
        """
        ids = {UNK: 0}
        for token in tokens:
            if token == UNK:
                raise ValueError(f"input tokens must not contain the reserved {UNK!r}")
            if not token:
                raise ValueError("empty token")
            if token not in ids:
                ids[token] = len(ids)
        return cls(ids, categories)

    def lookup(self, token: str) -> int:
        """Id of ``token``, or 0 (the unknown token) if absent. Total."""
        return self._ids.get(token, 0)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map a token sequence through :meth:`lookup`."""
        ids = self._ids
        return [ids.get(tok, 0) for tok in tokens]

    def union_extend(
        self,
        new_tokens: Iterable[str],
        categories: Optional[Mapping[str, str]] = None,
    ) -> "VocabMap":
        """New vocabulary with unseen tokens appended after the existing ids.

        Every token already present keeps its exact id. Unseen tokens are
        appended in first-occurrence order. Category labels are merged, with
        the new mapping winning on conflict.
        """
        ids = dict(self._ids)
        for token in new_tokens:
            if token == UNK:
                raise ValueError(f"input tokens must not contain the reserved {UNK!r}")
            if not token:
                raise ValueError("empty token")
            if token not in ids:
                ids[token] = len(ids)
        merged = dict(self._categories)
        merged.update(categories or {})
        return VocabMap(ids, merged)

    def prune(self, keep: Iterable[str]) -> "VocabMap":
        """New vocabulary keeping only ``keep`` (plus ``"<UNK>"``).

        Survivors are re-indexed contiguously in their current id order.
        """
        keep = set(keep)
        survivors = [tok for tok, _ in self.items() if tok == UNK or tok in keep]
        ids = {tok: i for i, tok in enumerate(survivors)}
        cats = {tok: cat for tok, cat in self._categories.items() if tok in ids}
        return VocabMap(ids, cats)

    def category(self, token: str) -> Optional[str]:
        return self._categories.get(token)

    @property
    def categories(self) -> Mapping[str, str]:
        return dict(self._categories)

    def items(self) -> Iterator[tuple[str, int]]:
        """(token, id) pairs in ascending id order."""
        return iter(sorted(self._ids.items(), key=lambda kv: kv[1]))

    def tokens(self) -> list[str]:
        """Tokens in ascending id order."""
        return [tok for tok, _ in self.items()]

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VocabMap):
            return NotImplemented
        return self._ids == other._ids and self._categories == other._categories

    def __repr__(self) -> str:
        return f"VocabMap(size={len(self)}, categorized={len(self._categories)})"
