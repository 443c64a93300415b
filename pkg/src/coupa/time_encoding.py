"""Functional time encoding.

A timestamp interval is mapped into a vector whose inner products realize
a translation-invariant kernel: per base period ``omega`` the encoding is

    [a_0, a_1*cos(pi*t/omega), a_1*sin(pi*t/omega),
          a_2*cos(2*pi*t/omega), a_2*sin(2*pi*t/omega), ...]

with one constant entry and H harmonic pairs, then the blocks for all k
base periods are concatenated. The cos/sin amplitudes of a harmonic are
tied, which makes <enc(t1), enc(t2)> depend on t1 - t2 only and keeps
|enc(t)| constant over t.

The kernel weights c_j in the closed form

    K(t1, t2) = sum_omega [ c_0 + sum_j c_j * cos(j*pi*(t1-t2)/omega) ]

are the squared amplitudes, c_j = a_j**2. The trainable quantity is the
amplitude vector (non-negative-constrained), which keeps gradients finite
when a weight is driven to zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nc

HOUR = 3600.0

DEFAULT_FREQUENCIES_SECONDS = (1 * HOUR, 6 * HOUR, 24 * HOUR, 168 * HOUR)
DEFAULT_HARMONICS = 2


@dataclass
class TimeEncodingConfig:
    """Periods are in seconds, same unit as the encoded intervals.

    ``harmonics`` is the number of cos/sin pairs per period, so each
    period contributes d = 1 + 2*harmonics entries and the full encoding
    has d * len(frequencies) entries.
    """

    frequencies: tuple[float, ...] = DEFAULT_FREQUENCIES_SECONDS
    harmonics: int = DEFAULT_HARMONICS
    learnable: bool = True
    # kernel weights c_j >= 0 per frequency: [constant, harmonic 1, ..., harmonic H]
    coefficients: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if any(w <= 0 for w in self.frequencies):
            raise ValueError("all frequencies must be positive")
        if self.harmonics < 0:
            raise ValueError("harmonics must be >= 0")
        if not self.coefficients:
            self.coefficients = [[1.0] * (self.harmonics + 1) for _ in self.frequencies]
        for c in self.coefficients:
            if len(c) != self.harmonics + 1:
                raise ValueError("each frequency needs harmonics+1 coefficients")
            if any(v < 0 for v in c):
                raise ValueError("coefficients must be non-negative")

    @property
    def per_frequency_dim(self) -> int:
        return 1 + 2 * self.harmonics

    @property
    def dim(self) -> int:
        return self.per_frequency_dim * len(self.frequencies)


def encode_frequency(t: float, omega: float, coefficients) -> np.ndarray:
    """Encoding block for one base period. ``coefficients`` are the kernel
    weights [c_0, c_1, ..., c_H]; amplitudes are their square roots."""
    if omega <= 0:
        raise ValueError(f"period must be positive, got {omega}")
    c = np.asarray(coefficients, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("coefficients must be non-negative")
    amps = np.sqrt(c)
    out = np.empty(1 + 2 * (len(c) - 1))
    out[0] = amps[0]
    for j in range(1, len(c)):
        arg = j * np.pi * t / omega
        out[2 * j - 1] = amps[j] * np.cos(arg)
        out[2 * j] = amps[j] * np.sin(arg)
    return out


def encode(t: float, config: TimeEncodingConfig) -> np.ndarray:
    """Concatenated encoding over all configured base periods."""
    blocks = [encode_frequency(t, w, c) for w, c in zip(config.frequencies, config.coefficients)]
    return np.concatenate(blocks)


def kernel_value(t1: float, t2: float, config: TimeEncodingConfig) -> float:
    """<enc(t1), enc(t2)>, computed from the closed form."""
    delta = t1 - t2
    total = 0.0
    for omega, coeffs in zip(config.frequencies, config.coefficients):
        total += coeffs[0]
        for j in range(1, len(coeffs)):
            total += coeffs[j] * np.cos(j * np.pi * delta / omega)
    return float(total)


class TimeEncoder:
    """Differentiable encoder over (batch, seq) interval arrays.

    Owns the trainable amplitude and period parameters; when the config is
    not learnable the same values are held as constants. With ``disabled``
    the encoder emits zero vectors of the right width (used by the
    time-encoding ablation).
    """

    def __init__(self, config: TimeEncodingConfig, params: dict[str, nc.Parameter],
                 prefix: str = "time_enc", disabled: bool = False):
        self.config = config
        self.disabled = disabled
        amp_init = np.sqrt(np.asarray(config.coefficients, dtype=np.float64))
        freq_init = np.asarray(config.frequencies, dtype=np.float64)
        if config.learnable:
            self.amplitudes = params.setdefault(
                f"{prefix}.amplitudes",
                nc.Parameter(f"{prefix}.amplitudes", amp_init, constraint=nc.NON_NEGATIVE))
            self.periods = params.setdefault(
                f"{prefix}.periods", nc.Parameter(f"{prefix}.periods", freq_init))
        else:
            self.amplitudes = nc.Tensor(amp_init)
            self.periods = nc.Tensor(freq_init)

    @property
    def dim(self) -> int:
        return self.config.dim

    def encode_intervals(self, dt_seconds: np.ndarray) -> nc.Tensor:
        """Encode an array of intervals; output shape = dt.shape + (dim,)."""
        dt = np.asarray(dt_seconds, dtype=np.float64)
        if self.disabled:
            return nc.Tensor(np.zeros(dt.shape + (self.dim,)))
        n_freq = len(self.config.frequencies)
        H = self.config.harmonics
        blocks: list[nc.Tensor] = []
        dt_node = nc.Tensor(dt[..., None])  # trailing axis broadcasts against amplitudes
        for f in range(n_freq):
            amp0 = nc.take(self.amplitudes, (f, 0))
            const = nc.mul(nc.Tensor(np.ones(dt.shape + (1,))), nc.reshape(amp0, (1,)))
            blocks.append(const)
            if H == 0:
                continue
            inv_omega = nc.div(nc.Tensor(1.0), nc.take(self.periods, f))
            base = nc.mul(nc.scale(dt_node, np.pi), inv_omega)  # pi * dt / omega
            for j in range(1, H + 1):
                amp = nc.reshape(nc.take(self.amplitudes, (f, j)), (1,))
                arg = nc.scale(base, float(j))
                blocks.append(nc.mul(nc.cos(arg), amp))
                blocks.append(nc.mul(nc.sin(arg), amp))
        return nc.concat(blocks, axis=-1)

    def coefficient_values(self) -> np.ndarray:
        """Current kernel weights c_j = amplitude**2 (squared back from params)."""
        return np.asarray(self.amplitudes.data) ** 2
