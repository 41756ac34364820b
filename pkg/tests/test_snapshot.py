import numpy as np
import pytest

from dynemb import Snapshot, SnapshotFormatError, VocabMap, load_snapshot, save_snapshot


def small_snapshot():
    vocab = VocabMap.build(["a", "b"], {"a": "cat1"})
    weights = np.array([[0.5, -1.5], [1e-300, 2.0], [3.0, -0.0]])
    return Snapshot(vocab, weights, {"week": 3, "strategy": "unknown"})


def test_roundtrip_bit_exact(tmp_path):
    snap = small_snapshot()
    path = tmp_path / "s.emb"
    save_snapshot(snap, path)
    loaded = load_snapshot(path)
    assert loaded == snap
    assert loaded.weights.tobytes() == snap.weights.tobytes()
    assert loaded.vocab.category("a") == "cat1"
    assert loaded.metadata == {"week": 3, "strategy": "unknown"}


def test_roundtrip_many_random(tmp_path):
    rng = np.random.default_rng(31)
    for i in range(30):
        n_tok = int(rng.integers(0, 12))
        dim = int(rng.integers(1, 9))
        vocab = VocabMap.build(
            [f"tok{j}" for j in range(n_tok)],
            {f"tok{j}": f"c{j % 3}" for j in range(n_tok) if rng.random() < 0.5},
        )
        weights = rng.normal(size=(len(vocab), dim))
        snap = Snapshot(vocab, weights, {"i": i})
        path = tmp_path / f"s{i}.emb"
        save_snapshot(snap, path)
        assert load_snapshot(path) == snap


def test_bad_magic(tmp_path):
    path = tmp_path / "s.emb"
    save_snapshot(small_snapshot(), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotFormatError, match="bad magic") as err:
        load_snapshot(path)
    assert err.value.field == "magic"


def test_unsupported_version(tmp_path):
    path = tmp_path / "s.emb"
    save_snapshot(small_snapshot(), path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotFormatError, match="version") as err:
        load_snapshot(path)
    assert err.value.field == "version"


def test_truncated_weights(tmp_path):
    path = tmp_path / "s.emb"
    save_snapshot(small_snapshot(), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(SnapshotFormatError, match="unexpected end of weights") as err:
        load_snapshot(path)
    assert err.value.field == "weights"


def test_truncated_header(tmp_path):
    path = tmp_path / "s.emb"
    save_snapshot(small_snapshot(), path)
    path.write_bytes(path.read_bytes()[:10])
    with pytest.raises(SnapshotFormatError, match="unexpected end"):
        load_snapshot(path)


def test_trailing_data_rejected(tmp_path):
    path = tmp_path / "s.emb"
    save_snapshot(small_snapshot(), path)
    path.write_bytes(path.read_bytes() + b"junk")
    with pytest.raises(SnapshotFormatError, match="trailing data"):
        load_snapshot(path)


def test_metadata_must_be_object(tmp_path):
    path = tmp_path / "s.emb"
    save_snapshot(small_snapshot(), path)
    raw = path.read_bytes()
    # Metadata block starts after magic(4) + version/vocab/dim(12) + len(4).
    meta_len = int.from_bytes(raw[16:20], "little")
    bad_meta = b"[1, 2]".ljust(meta_len, b" ")
    path.write_bytes(raw[:20] + bad_meta + raw[20 + meta_len:])
    with pytest.raises(SnapshotFormatError, match="JSON object") as err:
        load_snapshot(path)
    assert err.value.field == "metadata"


def test_save_validates_shape_and_finiteness(tmp_path):
    vocab = VocabMap.build(["a"])
    with pytest.raises(ValueError, match="do not match"):
        save_snapshot(Snapshot(vocab, np.zeros((5, 2))), tmp_path / "x.emb")
    bad = np.zeros((2, 2))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        save_snapshot(Snapshot(vocab, bad), tmp_path / "x.emb")
