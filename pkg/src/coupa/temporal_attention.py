"""Continuous-time attention over a user's click history.

A behavior sequence is laid out as a matrix whose rows are
``item_embedding || time_encoding(t - t_i)``, oldest behavior first, with
a final row for the target item at elapsed time zero. Scaled dot-product
attention over that matrix yields one summary vector per row; the target
(last) row is the history summary consumed downstream. Temporal causality
is enforced at construction time (only events strictly before ``t`` may
appear), so no per-row mask is needed inside the attention block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn_core as nc
from . import time_encoding as te


@dataclass
class TemporalMatrix:
    """Row ``i`` covers behavior ``i`` (oldest first); the last row is the target."""

    rows: np.ndarray            # (n_behaviors + 1, item_dim + encoding_dim)
    intervals: np.ndarray       # elapsed seconds per row; 0.0 for the target row

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


def build_temporal_matrix(item_vectors: np.ndarray, event_times: np.ndarray,
                          target_vector: np.ndarray, t: float,
                          config: te.TimeEncodingConfig,
                          max_len: int = 50) -> TemporalMatrix:
    """Reference (non-differentiable) construction of the sequence matrix.

    ``item_vectors`` holds one embedding per history event, aligned with
    ``event_times`` which must be chronologically sorted and strictly
    before ``t``. Only the most recent ``max_len`` behaviors are kept.
    """
    event_times = np.asarray(event_times, dtype=np.float64)
    item_vectors = np.asarray(item_vectors, dtype=np.float64)
    if event_times.size and np.any(np.diff(event_times) < 0):
        raise ValueError("history must be chronologically sorted")
    if np.any(event_times >= t):
        raise ValueError("history events must be strictly before the target time")
    if event_times.shape[0] > max_len:
        item_vectors = item_vectors[-max_len:]
        event_times = event_times[-max_len:]

    intervals = np.concatenate([t - event_times, [0.0]])
    encodings = np.stack([te.encode(dt, config) for dt in intervals])
    vectors = np.vstack([item_vectors.reshape(-1, target_vector.shape[-1]),
                         target_vector[None, :]])
    return TemporalMatrix(rows=np.hstack([vectors, encodings]), intervals=intervals)


@dataclass
class AttentionParams:
    """Projection matrices, each (row_width, attn_dim), unconstrained."""

    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray

    @property
    def attn_dim(self) -> int:
        return self.w_query.shape[1]


def init_attention_params(rng: np.random.Generator, row_width: int, attn_dim: int,
                          params: dict[str, nc.Parameter], prefix: str = "attn") -> AttentionParams:
    """Query and key projections start equal (they train independently).

    With W_Q = W_K the initial logits form a Gram matrix of randomly
    projected rows, so attention begins as row similarity: the inner
    product of two rows' time-encoding blocks is the translation
    invariant kernel of the interval difference, which is the pattern
    the encoding exists to expose. A sign-free independent init would
    bury it under random bilinear noise.
    """
    shared = nc.init_uniform(rng, (row_width, attn_dim), fan_in=row_width)
    mats = {}
    for name, init in (("w_query", shared), ("w_key", shared.copy()),
                       ("w_value", nc.init_uniform(rng, (row_width, attn_dim), fan_in=row_width))):
        p = nc.Parameter(f"{prefix}.{name}", init)
        params[p.name] = p
        mats[name] = p
    return AttentionParams(w_query=mats["w_query"], w_key=mats["w_key"], w_value=mats["w_value"])


def attend(matrix: TemporalMatrix | np.ndarray, params: AttentionParams
           ) -> tuple[np.ndarray, np.ndarray]:
    """Reference scaled dot-product attention.

    Returns (summary, weights): the target-row output vector and the full
    (n, n) attention-weight matrix whose rows sum to 1.
    """
    z = matrix.rows if isinstance(matrix, TemporalMatrix) else np.asarray(matrix)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("attention input must be a non-empty 2-d matrix")
    wq = params.w_query.data if isinstance(params.w_query, nc.Tensor) else params.w_query
    wk = params.w_key.data if isinstance(params.w_key, nc.Tensor) else params.w_key
    wv = params.w_value.data if isinstance(params.w_value, nc.Tensor) else params.w_value
    q, k, v = z @ wq, z @ wk, z @ wv
    logits = q @ k.T / np.sqrt(wq.shape[1])
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    weights = shifted / shifted.sum(axis=1, keepdims=True)
    return (weights @ v)[-1], weights


def attend_graph(z: nc.Tensor, params: AttentionParams,
                 key_mask: np.ndarray | None = None) -> nc.Tensor:
    """Differentiable batched attention: z is (batch, rows, width).

    ``key_mask`` is (batch, rows) with 1 for real rows; masked keys get a
    large negative logit so they receive exactly zero weight. Returns the
    full (batch, rows, attn_dim) output; callers slice the target row.
    """
    q = nc.matmul(z, params.w_query)
    k = nc.matmul(z, params.w_key)
    v = nc.matmul(z, params.w_value)
    logits = nc.scale(nc.matmul(q, nc.swap_last_axes(k)), 1.0 / np.sqrt(params.attn_dim))
    if key_mask is not None:
        bias = np.where(np.asarray(key_mask) > 0, 0.0, -1e30)[:, None, :]
        logits = nc.add(logits, nc.Tensor(bias))
    weights = nc.softmax(logits, axis=-1)
    return nc.matmul(weights, v)
