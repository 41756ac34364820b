"""Minimal end-to-end session classifier with hand-written gradients.

The whole point of the model is that embedding rows receive gradient signal
during training, so weight rows carried across weeks are genuinely learned.
Architecture: embedding lookup, an aggregator (mean pooling by default, or
a small Elman recurrence), then an affine map and a sigmoid. Training is
weighted binary cross-entropy under Adam. Everything is plain numpy with
analytic gradients; no autodiff framework.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .vocab import VocabMap

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12
POS_WEIGHT_MIN = 1.0
POS_WEIGHT_MAX = 50.0

AGGREGATORS = ("mean", "elman")


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs_per_segment: int = 5
    minibatch_size: int = 32
    max_sequence_length: int = 50

    def validate(self) -> None:
        problems = []
        if not self.learning_rate > 0:
            problems.append("learning_rate must be positive")
        if not 0 < self.adam_beta1 < 1:
            problems.append("adam_beta1 must be in (0, 1)")
        if not 0 < self.adam_beta2 < 1:
            problems.append("adam_beta2 must be in (0, 1)")
        if not self.adam_eps > 0:
            problems.append("adam_eps must be positive")
        if self.epochs_per_segment < 0:
            problems.append("epochs_per_segment must be >= 0")
        if self.minibatch_size < 1:
            problems.append("minibatch_size must be >= 1")
        if self.max_sequence_length < 1:
            problems.append("max_sequence_length must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class ElmanParams:
    """Recurrence h_t = tanh(w_h @ h_{t-1} + w_x @ x_t + b_h), h_0 = 0."""

    w_h: np.ndarray  # (dim, dim)
    w_x: np.ndarray  # (dim, dim)
    b_h: np.ndarray  # (dim,)


@dataclass
class ClassifierParams:
    emb: np.ndarray                 # (vocab_size, dim)
    agg: Optional[ElmanParams]      # None selects mean pooling
    w_out: np.ndarray               # (dim,)
    b_out: np.ndarray               # (1,)

    @property
    def dim(self) -> int:
        return self.emb.shape[1]

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = [("emb", self.emb)]
        if self.agg is not None:
            out += [("w_h", self.agg.w_h), ("w_x", self.agg.w_x), ("b_h", self.agg.b_h)]
        out += [("w_out", self.w_out), ("b_out", self.b_out)]
        return out

    def replace_arrays(self, arrays: dict[str, np.ndarray]) -> "ClassifierParams":
        agg = None
        if self.agg is not None:
            agg = ElmanParams(arrays["w_h"], arrays["w_x"], arrays["b_h"])
        return ClassifierParams(arrays["emb"], agg, arrays["w_out"], arrays["b_out"])

    def copy(self) -> "ClassifierParams":
        return self.replace_arrays(
            {name: arr.copy() for name, arr in self.named_arrays()}
        )


def new_params(
    emb: np.ndarray,
    aggregator: str,
    rng: np.random.Generator,
    scale: float = 0.1,
) -> ClassifierParams:
    """Fresh head (and aggregator) parameters around an existing embedding.

    Draw order is fixed (w_h, w_x, b_h, then w_out) so results do not
    depend on anything but the generator state. b_out starts at zero.
    """
    if aggregator not in AGGREGATORS:
        raise ValueError(f"unknown aggregator {aggregator!r}, expected one of {AGGREGATORS}")
    dim = emb.shape[1]
    agg = None
    if aggregator == "elman":
        agg = ElmanParams(
            w_h=rng.uniform(-scale, scale, size=(dim, dim)),
            w_x=rng.uniform(-scale, scale, size=(dim, dim)),
            b_h=rng.uniform(-scale, scale, size=dim),
        )
    w_out = rng.uniform(-scale, scale, size=dim)
    return ClassifierParams(emb=emb, agg=agg, w_out=w_out, b_out=np.zeros(1))


def _check_ids(params: ClassifierParams, ids: np.ndarray) -> None:
    if ids.size == 0:
        raise ValueError("cannot score an empty id sequence")
    if ids.min() < 0 or ids.max() >= params.emb.shape[0]:
        raise ValueError("token id out of range for the embedding table")


def forward(params: ClassifierParams, ids: Sequence[int]) -> float:
    """Purchase probability for one id sequence. Reference scalar path."""
    ids = np.asarray(ids, dtype=np.int64)
    _check_ids(params, ids)
    if params.agg is None:
        h = params.emb[ids].mean(axis=0)
    else:
        h = np.zeros(params.dim)
        for i in ids:
            h = np.tanh(params.agg.w_h @ h + params.agg.w_x @ params.emb[i] + params.agg.b_h)
    z = float(params.w_out @ h + params.b_out[0])
    p = float(sigmoid(np.float64(z)))
    return min(max(p, PROB_EPS), 1.0 - PROB_EPS)


def loss(
    params: ClassifierParams,
    ids: Sequence[int],
    label: int,
    pos_weight: float = 1.0,
) -> float:
    """Weighted binary cross-entropy for one sequence."""
    p = forward(params, ids)
    if label == 1:
        return float(-pos_weight * np.log(p))
    return float(-np.log(1.0 - p))


def _pad_batch(id_lists: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    n = len(id_lists)
    width = max(len(seq) for seq in id_lists)
    ids = np.zeros((n, width), dtype=np.int64)
    mask = np.zeros((n, width), dtype=np.float64)
    for i, seq in enumerate(id_lists):
        ids[i, : len(seq)] = seq
        mask[i, : len(seq)] = 1.0
    return ids, mask


def _forward_batch(params: ClassifierParams, ids: np.ndarray, mask: np.ndarray):
    """Vectorized forward over a padded batch; returns (p, cache)."""
    emb_rows = params.emb[ids]  # (B, L, dim)
    if params.agg is None:
        lengths = mask.sum(axis=1)
        h = (emb_rows * mask[:, :, None]).sum(axis=1) / lengths[:, None]
        states = None
    else:
        h = np.zeros((ids.shape[0], params.dim))
        states = [h]
        for t in range(ids.shape[1]):
            fresh = np.tanh(
                h @ params.agg.w_h.T + emb_rows[:, t, :] @ params.agg.w_x.T + params.agg.b_h
            )
            gate = mask[:, t : t + 1]
            h = gate * fresh + (1.0 - gate) * h
            states.append(h)
    z = h @ params.w_out + params.b_out[0]
    p = np.clip(sigmoid(z), PROB_EPS, 1.0 - PROB_EPS)
    return p, (emb_rows, h, states)


def gradients(
    params: ClassifierParams,
    batch: Sequence[tuple[np.ndarray, int]],
    pos_weight: float = 1.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean minibatch loss and its exact analytic gradient.

    The embedding gradient is dense-shaped but only rows indexed by the
    batch are nonzero, which is what keeps untouched rows bit-identical
    through an Adam step.
    """
    if not batch:
        raise ValueError("empty minibatch")
    id_lists = [np.asarray(ids, dtype=np.int64) for ids, _ in batch]
    for seq in id_lists:
        _check_ids(params, seq)
    labels = np.array([label for _, label in batch], dtype=np.float64)
    ids, mask = _pad_batch(id_lists)
    n = len(batch)

    p, (emb_rows, h, states) = _forward_batch(params, ids, mask)
    sample_losses = -(pos_weight * labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))
    mean_loss = float(sample_losses.mean())

    # d(mean loss)/dz, with p already clamped; the clamp only bites in the
    # saturated regime where the true derivative is ~0 anyway.
    dz = (pos_weight * labels * (p - 1.0) + (1.0 - labels) * p) / n

    grads: dict[str, np.ndarray] = {
        "emb": np.zeros_like(params.emb),
        "w_out": h.T @ dz,
        "b_out": np.array([dz.sum()]),
    }
    dh = dz[:, None] * params.w_out[None, :]  # (B, dim)

    if params.agg is None:
        lengths = mask.sum(axis=1)
        contrib = dh / lengths[:, None]
        sel = mask.astype(bool)
        per_pos = np.broadcast_to(contrib[:, None, :], emb_rows.shape)
        np.add.at(grads["emb"], ids[sel], per_pos[sel])
    else:
        gw_h = np.zeros_like(params.agg.w_h)
        gw_x = np.zeros_like(params.agg.w_x)
        gb_h = np.zeros_like(params.agg.b_h)
        for t in reversed(range(ids.shape[1])):
            gate = mask[:, t : t + 1]
            h_t = states[t + 1]
            da = dh * (1.0 - h_t * h_t) * gate
            gw_h += da.T @ states[t]
            gw_x += da.T @ emb_rows[:, t, :]
            gb_h += da.sum(axis=0)
            sel = mask[:, t].astype(bool)
            np.add.at(grads["emb"], ids[sel, t], (da @ params.agg.w_x)[sel])
            dh = da @ params.agg.w_h + dh * (1.0 - gate)
        grads["w_h"], grads["w_x"], grads["b_h"] = gw_h, gw_x, gb_h

    return mean_loss, grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: ClassifierParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.named_arrays()},
            v={name: np.zeros_like(arr) for name, arr in params.named_arrays()},
        )


def adam_step(
    params: ClassifierParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[ClassifierParams, AdamState]:
    """One Adam update. Functional: returns fresh params and state."""
    t = state.t + 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    new_arrays: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, arr in params.named_arrays():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_arrays[name] = arr - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        new_m[name] = m
        new_v[name] = v
    return params.replace_arrays(new_arrays), AdamState(new_m, new_v, t)


def encode_session(vocab: VocabMap, items: Sequence[str], max_len: int) -> np.ndarray:
    """Token ids for a session, truncated to the most recent ``max_len``."""
    ids = vocab.encode(items)
    if len(ids) > max_len:
        ids = ids[-max_len:]
    return np.asarray(ids, dtype=np.int64)


def _pos_weight(labels: Sequence[int]) -> float:
    pos = sum(labels)
    if pos == 0:
        return 1.0
    neg = len(labels) - pos
    return min(POS_WEIGHT_MAX, max(POS_WEIGHT_MIN, neg / pos))


def train_segment(
    params: ClassifierParams,
    vocab: VocabMap,
    sessions: Sequence,
    config: TrainConfig,
    seed: int | np.random.SeedSequence | np.random.Generator,
) -> ClassifierParams:
    """Train on one week of sessions; returns updated parameters.

    Each epoch reshuffles the session order with the seeded generator. The
    positive-class weight is computed once from this segment's label counts
    and clamped to [1, 50]. Adam state starts fresh for the segment.
    """
    config.validate()
    sessions = list(sessions)
    if not sessions:
        raise ValueError("no sessions to train on")
    encoded = [
        (encode_session(vocab, s.items, config.max_sequence_length), int(s.label))
        for s in sessions
        if len(s.items) > 0
    ]
    if not encoded:
        raise ValueError("no non-empty sessions to train on")
    if len(encoded) < len(sessions):
        logger.warning("dropped %d empty sessions from training", len(sessions) - len(encoded))

    pos_weight = _pos_weight([label for _, label in encoded])
    rng = np.random.default_rng(seed)
    trained = params.copy()
    state = AdamState.fresh(trained)
    for _ in range(config.epochs_per_segment):
        order = rng.permutation(len(encoded))
        for lo in range(0, len(order), config.minibatch_size):
            chunk = [encoded[i] for i in order[lo : lo + config.minibatch_size]]
            _, grads = gradients(trained, chunk, pos_weight)
            trained, state = adam_step(trained, grads, state, config)
    return trained


def score_sessions(
    params: ClassifierParams,
    vocab: VocabMap,
    sessions: Sequence,
    config: TrainConfig,
    batch_size: int = 512,
) -> tuple[list[float], list[int]]:
    """Purchase probability per session, in order.

    Tokens outside the vocabulary resolve to the unknown id. Sessions with
    no items cannot be scored; their indices come back in the second list.
    Parameters are read-only.
    """
    encoded: list[np.ndarray] = []
    kept: list[int] = []
    skipped: list[int] = []
    for i, session in enumerate(sessions):
        if len(session.items) == 0:
            skipped.append(i)
            continue
        encoded.append(encode_session(vocab, session.items, config.max_sequence_length))
        kept.append(i)
    if skipped:
        logger.warning("skipped %d sessions with no items", len(skipped))

    scores: list[float] = []
    for lo in range(0, len(encoded), batch_size):
        chunk = encoded[lo : lo + batch_size]
        for seq in chunk:
            _check_ids(params, seq)
        ids, mask = _pad_batch(chunk)
        p, _ = _forward_batch(params, ids, mask)
        scores.extend(float(x) for x in p)
    return scores, skipped
