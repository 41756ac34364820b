"""Bit-exact persistence for a vocabulary plus its embedding table.

File layout (all integers little-endian):

    magic    4 bytes  b"LLEB"
    version  u32      currently 1; readers reject anything else
    vocab    u32      row count
    dim      u32      columns per row
    metadata u32 length, then UTF-8 JSON object
    table    vocab records of:
                 u32 token byte-length, token bytes (UTF-8),
                 u32 id,
                 u8 has-category flag,
                 if set: u32 category byte-length, category bytes (UTF-8)
    weights  vocab * dim f64 values, row-major

Weights round-trip as raw 64-bit patterns, so save followed by load is
bitwise lossless.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .vocab import UNK, VocabMap

MAGIC = b"LLEB"
VERSION = 1


class SnapshotFormatError(ValueError):
    """Malformed snapshot file; ``field`` names the offending part."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(message)
        self.field = field_name


@dataclass
class Snapshot:
    vocab: VocabMap
    weights: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (
            self.vocab == other.vocab
            and self.metadata == other.metadata
            and self.weights.shape == other.weights.shape
            and self.weights.tobytes() == other.weights.tobytes()
        )


def save_snapshot(snapshot: Snapshot, path: str | Path) -> None:
    weights = np.ascontiguousarray(snapshot.weights, dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError("weights must be 2-dimensional")
    if weights.shape[0] != len(snapshot.vocab):
        raise ValueError(
            f"weights rows ({weights.shape[0]}) do not match vocabulary "
            f"size ({len(snapshot.vocab)})"
        )
    if not np.isfinite(weights).all():
        raise ValueError("weights contain non-finite values")

    parts = [MAGIC, struct.pack("<III", VERSION, weights.shape[0], weights.shape[1])]
    meta = json.dumps(snapshot.metadata, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(meta)))
    parts.append(meta)
    for token, token_id in snapshot.vocab.items():
        raw = token.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", token_id))
        cat = snapshot.vocab.category(token)
        if cat is None:
            parts.append(b"\x00")
        else:
            raw_cat = cat.encode("utf-8")
            parts.append(b"\x01" + struct.pack("<I", len(raw_cat)) + raw_cat)
    parts.append(weights.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes) -> None:
        self.buf = buf
        self.pos = 0

    def take(self, n: int, field_name: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise SnapshotFormatError(field_name, f"unexpected end of {field_name}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, field_name: str) -> int:
        return struct.unpack("<I", self.take(4, field_name))[0]

    def u8(self, field_name: str) -> int:
        return self.take(1, field_name)[0]


def load_snapshot(path: str | Path) -> Snapshot:
    reader = _Reader(Path(path).read_bytes())

    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise SnapshotFormatError("magic", f"bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.u32("version")
    if version != VERSION:
        raise SnapshotFormatError(
            "version", f"unsupported snapshot version {version}, expected {VERSION}"
        )
    vocab_size = reader.u32("header")
    dim = reader.u32("header")
    if vocab_size < 1 or dim < 1:
        raise SnapshotFormatError("header", f"invalid shape {vocab_size}x{dim}")

    meta_len = reader.u32("metadata")
    meta_raw = reader.take(meta_len, "metadata")
    try:
        metadata = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotFormatError("metadata", f"metadata is not valid JSON: {exc}") from exc
    if not isinstance(metadata, dict):
        raise SnapshotFormatError("metadata", "metadata must be a JSON object")

    entries: list[tuple[str, int, str | None]] = []
    for _ in range(vocab_size):
        tok_len = reader.u32("vocab table")
        token = reader.take(tok_len, "vocab table").decode("utf-8", errors="strict")
        token_id = reader.u32("vocab table")
        cat: str | None = None
        if reader.u8("vocab table"):
            cat_len = reader.u32("vocab table")
            cat = reader.take(cat_len, "vocab table").decode("utf-8", errors="strict")
        entries.append((token, token_id, cat))

    ids = {token: token_id for token, token_id, _ in entries}
    if len(ids) != vocab_size:
        raise SnapshotFormatError("vocab table", "duplicate tokens in vocab table")
    try:
        vocab = VocabMap(ids, {t: c for t, _, c in entries if c is not None})
    except ValueError as exc:
        raise SnapshotFormatError("vocab table", f"invalid vocab table: {exc}") from exc

    raw = reader.take(vocab_size * dim * 8, "weights")
    weights = np.frombuffer(raw, dtype="<f8").reshape(vocab_size, dim).copy()
    if reader.pos != len(reader.buf):
        raise SnapshotFormatError(
            "weights", f"trailing data after weights ({len(reader.buf) - reader.pos} bytes)"
        )
    return Snapshot(vocab=vocab, weights=weights, metadata=metadata)
