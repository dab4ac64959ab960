"""Leaky-tanh echo state update over FDTD-derived weights."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

from .wave import (DampingField, GridSpec, SpeedField, build_coupling_matrix,
                   coupling_to_reservoir_weights)

NOISE_BLOCK = 256


@dataclass(frozen=True)
class ReservoirModel:
    """Fixed reservoir: weights, input weights, leak rate and noise level.

    ``w`` is derived from ``(c, k, alpha)`` on construction. Models that do
    not come from a wave field (the random baseline) pass ``w_override``.
    """

    spec: GridSpec
    c: SpeedField
    k: DampingField
    alpha: float
    w_in: NDArray
    noise_amp: float = 1e-3
    seed: int = 0
    input_gain: float = 1.0
    w_override: sparse.csr_matrix | None = None
    w: sparse.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be non-negative")
        w_in = np.array(self.w_in, dtype=float)
        w_in.flags.writeable = False
        if w_in.shape != (self.spec.state_dim,):
            raise ValueError("w_in must cover the full state")
        object.__setattr__(self, "w_in", w_in)
        if self.w_override is not None:
            w = sparse.csr_matrix(self.w_override)
        else:
            a = build_coupling_matrix(self.c, self.k, self.spec)
            w = coupling_to_reservoir_weights(a, self.alpha)
        object.__setattr__(self, "w", w)

    @property
    def is_wave(self) -> bool:
        return self.w_override is None

    @property
    def state_dim(self) -> int:
        return self.spec.state_dim

    def with_fields(self, c: SpeedField | None = None,
                    k: DampingField | None = None) -> "ReservoirModel":
        """Copy with new fields and weights rebuilt from them."""
        if not self.is_wave:
            raise ValueError("random reservoirs carry no wave fields")
        return replace(self, c=self.c if c is None else c,
                       k=self.k if k is None else k)


def init_reservoir(spec: GridSpec, c: SpeedField, k: DampingField,
                   alpha: float = 0.03, input_gain: float = 1.0,
                   noise_amp: float = 1e-3, seed: int = 0) -> ReservoirModel:
    """Build the wave reservoir; input weights ~ U[0, input_gain) on row 0."""
    if input_gain < 0:
        raise ValueError("input_gain must be non-negative")
    w_in = np.zeros(spec.state_dim)
    w_in[:spec.n] = np.random.default_rng(seed).uniform(
        0.0, input_gain, size=spec.n)
    return ReservoirModel(spec, c, k, alpha, w_in, noise_amp, seed, input_gain)


class NoiseSource:
    """Per-step bias noise ``U[-amp, amp]`` drawn in blocks from one stream.

    Blocked draws consume the generator in the same order as per-step draws,
    so traces do not depend on how runs are batched.
    """

    def __init__(self, amp: float, dim: int, seed, block: int = NOISE_BLOCK):
        self.amp = amp
        self.dim = dim
        self.rng = np.random.default_rng(seed)
        self.block = block
        self._buf = np.empty((0, dim))
        self._pos = 0

    def draw(self) -> NDArray:
        if self.amp == 0:
            return np.zeros(self.dim)
        if self._pos >= len(self._buf):
            self._buf = self.rng.uniform(-self.amp, self.amp,
                                         size=(self.block, self.dim))
            self._pos = 0
        out = self._buf[self._pos]
        self._pos += 1
        return out


def step(model: ReservoirModel, x: NDArray, s, noise: NDArray | None = None,
         activation=np.tanh) -> NDArray:
    """One leaky update ``(1 - a) x + a f(w_in s + W x + b)``.

    ``x`` may be a single state or a ``(dim, batch)`` stack with ``s`` of
    shape ``(batch,)``; ``noise`` must match ``x``.
    """
    h = model.w @ x
    h += np.multiply.outer(model.w_in, s) if np.ndim(s) else model.w_in * s
    if noise is not None:
        h += noise
    return (1.0 - model.alpha) * x + model.alpha * activation(h)


@dataclass
class StateTrace:
    """Recorded reservoir response to one input signal.

    ``p`` has shape ``(length, n^2)``; ``states`` holds the full stacked
    states when requested.
    """

    p: NDArray
    inputs: NDArray
    final_state: NDArray
    states: NDArray | None = None

    @property
    def length(self) -> int:
        return len(self.inputs)


def _signal_values(signal) -> NDArray:
    return np.asarray(getattr(signal, "samples", signal), dtype=float)


def run(model: ReservoirModel, signal, noise_seed=0, record_full: bool = False,
        x0: NDArray | None = None) -> StateTrace:
    """Drive the reservoir from a zero (or given) state through ``signal``."""
    s = _signal_values(signal)
    if s.ndim != 1 or len(s) == 0:
        raise ValueError("signal must be a non-empty 1D sequence")
    m = model.spec.n_cells
    x = np.zeros(model.state_dim) if x0 is None else np.array(x0, dtype=float)
    noise = NoiseSource(model.noise_amp, model.state_dim, noise_seed)
    p = np.empty((len(s), m))
    full = np.empty((len(s), model.state_dim)) if record_full else None
    for t, st in enumerate(s):
        x = step(model, x, st, noise.draw() if model.noise_amp else None)
        p[t] = x[:m]
        if record_full:
            full[t] = x
    return StateTrace(p, s, x, full)


def run_batch(model: ReservoirModel, signals: NDArray, noise_seeds,
              dtype=np.float64) -> NDArray:
    """p traces for several equal-length signals, shape ``(batch, T, n^2)``.

    Each column uses its own noise stream, so the result equals running the
    signals one at a time through :func:`run`.
    """
    s = np.atleast_2d(np.asarray(signals, dtype=float))
    batch, length = s.shape
    m = model.spec.n_cells
    dim = model.state_dim
    sources = [NoiseSource(model.noise_amp, dim, seed) for seed in noise_seeds]
    if len(sources) != batch:
        raise ValueError("need one noise seed per signal")
    x = np.zeros((dim, batch))
    out = np.empty((batch, length, m), dtype=dtype)
    noise = np.empty((dim, batch))
    for t in range(length):
        if model.noise_amp:
            for b, src in enumerate(sources):
                noise[:, b] = src.draw()
            x = step(model, x, s[:, t], noise)
        else:
            x = step(model, x, s[:, t])
        out[:, t, :] = x[:m].T
    return out
