"""Personalized position-bias modelling.

Per display position the model produces a non-negative "uplift": a
mixture-of-experts over a shared input with one softmax gate per
position, a shared readout, and a ReLU. A gated linear unit driven by
position-related features (click-position history, item id) then squashes
each uplift into [0, 1). The score logit of position k is the sum of the
uplifts of positions k..K, which makes the predicted click probability
structurally non-increasing in the position index, and serving-time
inference reads position 0 (the full sum).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn_core as nc


def _arr(x) -> np.ndarray:
    return x.data if isinstance(x, nc.Tensor) else np.asarray(x, dtype=np.float64)


@dataclass
class MmoeParams:
    """n experts (two dense layers each), one gate matrix per position,
    a shared readout vector and shared bias."""

    expert_w1: list  # per expert (input_dim, width)
    expert_b1: list
    expert_w2: list  # (width, width)
    expert_b2: list
    gates: list      # per position (input_dim, n_experts)
    readout: object  # (width,)
    bias: object     # scalar, shared across positions

    @property
    def n_experts(self) -> int:
        return len(self.expert_w1)

    @property
    def n_positions(self) -> int:
        return len(self.gates)


def init_mmoe_params(rng: np.random.Generator, input_dim: int, n_experts: int,
                     expert_width: int, n_positions: int,
                     params: dict[str, nc.Parameter], prefix: str = "mmoe") -> MmoeParams:
    def make(name, shape, fan_in, constraint=nc.FREE):
        p = nc.Parameter(f"{prefix}.{name}", nc.init_uniform(rng, shape, fan_in, constraint),
                         constraint=constraint)
        params[p.name] = p
        return p

    # The readout and shared bias are kept non-negative: the experts end in
    # ReLUs, so this makes the raw uplift >= bias before its own ReLU ever
    # acts. Clicks are sparse (the label mean sits below the smallest
    # expressible click probability), and with a sign-free readout the
    # resulting one-way calibration pressure eventually drives the raw
    # uplift through zero into a state where both the ReLU and the
    # downstream tanh gate have zero gradient, freezing every score at
    # exactly one half. The constraint keeps that state unreachable while
    # leaving the mixture, gates and GLU free to carry the ordering.
    bias = nc.Parameter(f"{prefix}.bias", np.asarray(1.0), constraint=nc.NON_NEGATIVE)
    params[bias.name] = bias

    return MmoeParams(
        expert_w1=[make(f"expert{i}.w1", (input_dim, expert_width), input_dim)
                   for i in range(n_experts)],
        expert_b1=[make(f"expert{i}.b1", (expert_width,), input_dim)
                   for i in range(n_experts)],
        expert_w2=[make(f"expert{i}.w2", (expert_width, expert_width), expert_width)
                   for i in range(n_experts)],
        expert_b2=[make(f"expert{i}.b2", (expert_width,), expert_width)
                   for i in range(n_experts)],
        gates=[make(f"gate{k}", (input_dim, n_experts), input_dim)
               for k in range(n_positions)],
        readout=make("readout", (expert_width,), expert_width, constraint=nc.NON_NEGATIVE),
        bias=bias,
    )


@dataclass
class GluParams:
    """Shared linear map from position features to one gate logit per position."""

    w: object  # (feature_dim, n_positions)
    b: object  # (n_positions,)


def init_glu_params(rng: np.random.Generator, feature_dim: int, n_positions: int,
                    params: dict[str, nc.Parameter], prefix: str = "glu") -> GluParams:
    # gates start mostly closed: with sparse clicks the early cross-entropy
    # pressure is downward, and the sigmoid path absorbs it without driving
    # the ReLU'd uplifts into their dead zone
    w = nc.Parameter(f"{prefix}.w", nc.init_uniform(rng, (feature_dim, n_positions), feature_dim))
    b = nc.Parameter(f"{prefix}.b", np.full(n_positions, -2.0))
    params[w.name] = w
    params[b.name] = b
    return GluParams(w=w, b=b)


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def expert_outputs(x: np.ndarray, mmoe: MmoeParams) -> np.ndarray:
    """(n_experts, width) expert activations for one input vector."""
    outs = []
    for i in range(mmoe.n_experts):
        h = np.maximum(x @ _arr(mmoe.expert_w1[i]) + _arr(mmoe.expert_b1[i]), 0.0)
        outs.append(np.maximum(h @ _arr(mmoe.expert_w2[i]) + _arr(mmoe.expert_b2[i]), 0.0))
    return np.stack(outs)


def mmoe_uplift(x: np.ndarray, mmoe: MmoeParams, k: int) -> float:
    """Raw (pre-gate) uplift of position k: ReLU(readout . gated expert mix + bias)."""
    if not 0 <= k < mmoe.n_positions:
        raise ValueError(f"position {k} out of range 0..{mmoe.n_positions - 1}")
    x = np.asarray(x, dtype=np.float64)
    logits = x @ _arr(mmoe.gates[k])
    e = np.exp(logits - logits.max())
    gate = e / e.sum()
    mixed = gate @ expert_outputs(x, mmoe)
    return float(max(_arr(mmoe.readout) @ mixed + float(_arr(mmoe.bias)), 0.0))


def glu_gate(uplift_raw: float, position_features: np.ndarray, glu: GluParams, k: int) -> float:
    """Final uplift of position k: sigmoid(gate logit) * tanh(raw uplift) in [0, 1)."""
    if uplift_raw < 0:
        raise ValueError("raw uplift must be >= 0")
    eps = np.asarray(position_features, dtype=np.float64) @ _arr(glu.w) + _arr(glu.b)
    return float(_sigmoid(eps[k]) * np.tanh(uplift_raw))


def position_matrix(n_positions: int) -> np.ndarray:
    """Row k selects positions k..K: zeros before k, ones from k on."""
    return np.triu(np.ones((n_positions, n_positions)))


def position_logit(uplifts: np.ndarray, k: int) -> float:
    """Summation form: sum of uplifts from position k through K."""
    uplifts = np.asarray(uplifts, dtype=np.float64)
    if not 0 <= k < len(uplifts):
        raise ValueError(f"position {k} out of range 0..{len(uplifts) - 1}")
    total = 0.0
    for i in range(k, len(uplifts)):
        total += float(uplifts[i])
    return total


def position_logits_matrix(uplifts: np.ndarray) -> np.ndarray:
    """Matrix form S_k . uplifts for every k, accumulated in index order so
    it agrees bit-for-bit with the summation form."""
    uplifts = np.asarray(uplifts, dtype=np.float64)
    n = len(uplifts)
    s = position_matrix(n)
    out = np.zeros(n)
    for k in range(n):
        acc = 0.0
        for i in range(n):
            acc += float(s[k, i] * uplifts[i])
        out[k] = acc
    return out


def click_probability(logit: float) -> float:
    return float(_sigmoid(np.asarray(logit, dtype=np.float64)))


# ---------------------------------------------------------------------------
# differentiable batched versions (training path)
# ---------------------------------------------------------------------------

def mmoe_uplifts_graph(x: nc.Tensor, mmoe: MmoeParams) -> nc.Tensor:
    """All raw uplifts for a (batch, input_dim) node -> (batch, n_positions)."""
    experts = []
    for i in range(mmoe.n_experts):
        h = nc.relu(nc.add(nc.matmul(x, mmoe.expert_w1[i]), mmoe.expert_b1[i]))
        h = nc.relu(nc.add(nc.matmul(h, mmoe.expert_w2[i]), mmoe.expert_b2[i]))
        experts.append(nc.reshape(h, (h.shape[0], 1, h.shape[1])))
    stack = nc.concat(experts, axis=1)  # (batch, n_experts, width)

    per_position = []
    for k in range(mmoe.n_positions):
        gate = nc.softmax(nc.matmul(x, mmoe.gates[k]), axis=-1)      # (batch, n_experts)
        gate3 = nc.reshape(gate, (gate.shape[0], gate.shape[1], 1))
        mixed = nc.tsum(nc.mul(stack, gate3), axis=1)                # (batch, width)
        score = nc.add(nc.tsum(nc.mul(mixed, mmoe.readout), axis=-1, keepdims=True),
                       mmoe.bias)                                    # (batch, 1)
        per_position.append(nc.relu(score))
    return nc.concat(per_position, axis=-1)


def glu_graph(uplifts_raw: nc.Tensor, position_features: nc.Tensor,
              glu: GluParams) -> nc.Tensor:
    """(batch, n_positions) final uplifts in [0, 1)."""
    eps = nc.add(nc.matmul(position_features, glu.w), glu.b)
    return nc.mul(nc.sigmoid(eps), nc.tanh(uplifts_raw))


def position_logits_graph(uplifts: nc.Tensor) -> nc.Tensor:
    """Suffix sums over positions; exactly non-increasing for non-negative uplifts."""
    return nc.reverse_cumsum(uplifts, axis=-1)
