"""Intensity-free temporal point process.

The cumulative intensity over the elapsed window is modelled directly by
a feed-forward network with non-negative weights and biases and ReLU
activations (including the output), evaluated on
``[user_embedding || behavior_summary || elapsed]``. Non-negative weights
plus monotone activations make the output non-decreasing in every input
coordinate, in particular in the elapsed time, so its partial derivative
with respect to elapsed time is a valid (non-negative) event rate.

The network is anchored at zero by subtracting its value at elapsed 0,
and the rate is obtained by exact differentiation of the layers with
respect to the elapsed coordinate; at a ReLU kink the right-derivative is
taken (activation gate = 1 at a preactivation of exactly 0).

Elapsed times enter the network in hours (callers pass seconds), which
keeps inputs O(1..100) for 90-day histories; rates are per hour.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn_core as nc

SECONDS_PER_HOUR = 3600.0
DEFAULT_RATE_FLOOR = 1e-8


@dataclass
class MonotoneNet:
    """Stacked dense layers; every weight/bias entry must be >= 0."""

    weights: list  # Parameter or ndarray, each (fan_in, fan_out); final fan_out == 1
    biases: list   # matching (fan_out,) vectors

    def layer_arrays(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for w, b in zip(self.weights, self.biases):
            wa = w.data if isinstance(w, nc.Tensor) else np.asarray(w)
            ba = b.data if isinstance(b, nc.Tensor) else np.asarray(b)
            out.append((wa, ba))
        return out

    def check_constraints(self) -> None:
        for wa, ba in self.layer_arrays():
            if np.any(wa < 0) or np.any(ba < 0):
                raise ValueError("monotone net weights and biases must be non-negative")


def init_monotone_net(rng: np.random.Generator, input_dim: int,
                      hidden: tuple[int, ...], params: dict[str, nc.Parameter],
                      prefix: str = "intensity") -> MonotoneNet:
    dims = [input_dim, *hidden, 1]
    weights, biases = [], []
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = nc.Parameter(f"{prefix}.w{i}", nc.init_uniform(rng, (d_in, d_out), d_in, nc.NON_NEGATIVE),
                         constraint=nc.NON_NEGATIVE)
        b = nc.Parameter(f"{prefix}.b{i}", nc.init_uniform(rng, (d_out,), d_in, nc.NON_NEGATIVE),
                         constraint=nc.NON_NEGATIVE)
        params[w.name] = w
        params[b.name] = b
        weights.append(w)
        biases.append(b)
    return MonotoneNet(weights=weights, biases=biases)


@dataclass
class IntensityContext:
    """Conditioning for one (user, item) pair at a given elapsed time."""

    user_vec: np.ndarray
    summary_vec: np.ndarray
    elapsed_seconds: float

    def net_input(self) -> np.ndarray:
        if self.elapsed_seconds < 0:
            raise ValueError(f"elapsed time must be >= 0, got {self.elapsed_seconds}")
        return np.concatenate([np.asarray(self.user_vec, dtype=np.float64).ravel(),
                               np.asarray(self.summary_vec, dtype=np.float64).ravel(),
                               [self.elapsed_seconds / SECONDS_PER_HOUR]])


def _forward_raw(net: MonotoneNet, x: np.ndarray) -> float:
    a = x
    for w, b in net.layer_arrays():
        a = np.maximum(a @ w + b, 0.0)
    return float(a[0])


def cumulative_intensity(ctx: IntensityContext, net: MonotoneNet) -> float:
    """Anchored cumulative intensity: net(elapsed) - net(0), always >= 0."""
    x = ctx.net_input()
    x0 = x.copy()
    x0[-1] = 0.0
    return _forward_raw(net, x) - _forward_raw(net, x0)


def intensity(ctx: IntensityContext, net: MonotoneNet) -> float:
    """Event rate: exact derivative of the cumulative net in the elapsed
    coordinate, with right-derivatives at ReLU kinks."""
    x = ctx.net_input()
    layers = net.layer_arrays()
    w0, b0 = layers[0]
    z = x @ w0 + b0
    v = (z >= 0.0) * w0[-1, :]
    a = np.maximum(z, 0.0)
    for w, b in layers[1:]:
        z = a @ w + b
        v = (z >= 0.0) * (v @ w)
        a = np.maximum(z, 0.0)
    return float(v[0])


def temporal_nll(pos_ctx: IntensityContext, neg_ctxs: list[IntensityContext],
                 net: MonotoneNet, rate_floor: float = DEFAULT_RATE_FLOOR) -> float:
    """-log rate of the observed event plus the non-event mass of sampled
    negatives over the same elapsed window (their cumulative intensities).

    The floor sits additively inside the logarithm: ReLU nets can have
    exactly-zero derivative regions, and log(rate + floor) both stays
    finite there and keeps a usable gradient when the rate is merely
    small, unlike a hard max."""
    nll = -np.log(intensity(pos_ctx, net) + rate_floor)
    for ctx in neg_ctxs:
        nll += cumulative_intensity(ctx, net)
    return float(nll)


# ---------------------------------------------------------------------------
# differentiable batched versions (training path)
# ---------------------------------------------------------------------------

def cumulative_graph(net: MonotoneNet, x: nc.Tensor) -> nc.Tensor:
    """Raw (un-anchored) cumulative value for a (batch, input_dim) node."""
    a = x
    for w, b in zip(net.weights, net.biases):
        a = nc.relu(nc.add(nc.matmul(a, w), b))
    return nc.reshape(a, (a.shape[0],))


def anchored_cumulative_graph(net: MonotoneNet, features: nc.Tensor,
                              elapsed_hours: np.ndarray) -> nc.Tensor:
    """Psi(elapsed) - Psi(0) for a batch; ``features`` is (batch, dim-1)."""
    tau = nc.Tensor(np.asarray(elapsed_hours, dtype=np.float64)[:, None])
    x_t = nc.concat([features, tau], axis=-1)
    x_0 = nc.concat([features, nc.Tensor(np.zeros_like(tau.data))], axis=-1)
    return nc.sub(cumulative_graph(net, x_t), cumulative_graph(net, x_0))


def rate_graph(net: MonotoneNet, features: nc.Tensor,
               elapsed_hours: np.ndarray) -> nc.Tensor:
    """Differentiable event rate for a batch: the exact elapsed-coordinate
    derivative, built from activation gates treated as constants."""
    tau = nc.Tensor(np.asarray(elapsed_hours, dtype=np.float64)[:, None])
    a = nc.concat([features, tau], axis=-1)
    v: nc.Tensor | None = None
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = nc.add(nc.matmul(a, w), b)
        gate = nc.relu_gate(z)
        if i == 0:
            tau_row = nc.take(w, (-1, slice(None)))  # (fan_out,)
            v = nc.mul(gate, tau_row)
        else:
            v = nc.mul(gate, nc.matmul(v, w))
        a = nc.relu(z)
    return nc.reshape(v, (v.shape[0],))
