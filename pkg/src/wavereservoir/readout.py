"""Linear readout over the p-neurons, trained online by SGD on MSE."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .reservoir import ReservoirModel, run_batch

logger = logging.getLogger(__name__)

HORIZON_STEPS = 33  # 198 ms at 6 ms: 200 ms rounded down to the grid
WARMUP_STEPS = 100


class TrainingDiverged(FloatingPointError):
    """Raised when the SGD loss becomes non-finite."""


@dataclass
class Readout:
    w_out: NDArray
    bias: float = 0.0

    def __post_init__(self):
        self.w_out = np.asarray(self.w_out, dtype=float)
        if self.w_out.ndim != 1:
            raise ValueError("w_out must be a vector")
        if not (np.all(np.isfinite(self.w_out)) and np.isfinite(self.bias)):
            raise ValueError("readout weights must be finite")

    @classmethod
    def zeros(cls, n_cells: int) -> "Readout":
        return cls(np.zeros(n_cells), 0.0)

    def copy(self) -> "Readout":
        return Readout(self.w_out.copy(), float(self.bias))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 20
    horizon_steps: int = HORIZON_STEPS
    shuffle_seed: int = 0
    warmup_steps: int = WARMUP_STEPS
    min_rel_improvement: float = 1e-3
    noise_seed: int = 0
    batch_size: int = 4

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.horizon_steps < 0 or self.warmup_steps < 0:
            raise ValueError("horizon and warm-up must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")


def make_target(signal, horizon_steps: int = HORIZON_STEPS) -> NDArray:
    """``target[t] = signal[t + horizon]``; the last ``horizon`` steps drop out."""
    s = np.asarray(getattr(signal, "samples", signal), dtype=float)
    if horizon_steps < 0:
        raise ValueError("horizon must be non-negative")
    if horizon_steps >= len(s):
        raise ValueError(
            f"horizon {horizon_steps} must be shorter than the signal ({len(s)})")
    return s[horizon_steps:].copy()


def predict(r: Readout, p: NDArray) -> NDArray | float:
    """``w_out . p + bias`` for one state or a ``(T, n^2)`` stack."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != r.w_out.shape[0]:
        raise ValueError(
            f"state has {p.shape[-1]} p-neurons, readout expects {r.w_out.shape[0]}")
    return p @ r.w_out + r.bias


def sample_gradient(r: Readout, p: NDArray, y: float) -> tuple[NDArray, float]:
    """Gradient of ``(w . p + b - y)^2`` with respect to ``(w, b)``."""
    err = float(p @ r.w_out + r.bias - y)
    return 2.0 * err * p, 2.0 * err


def sgd_epoch(r: Readout, p_trace: NDArray, target: NDArray, lr: float,
              skip: int = 0) -> tuple[Readout, float]:
    """One online pass in time order.

    Each sample's squared error is taken before its own update; the returned
    MSE averages those pre-update errors. The first ``skip`` steps are not
    used.
    """
    p_trace = np.asarray(p_trace, dtype=float)
    target = np.asarray(target, dtype=float)
    if len(p_trace) != len(target):
        raise ValueError(
            f"trace ({len(p_trace)}) and target ({len(target)}) lengths differ")
    w = r.w_out.copy()
    b = float(r.bias)
    total = 0.0
    count = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(skip, len(target)):
            p = p_trace[t]
            err = p @ w + b - target[t]
            total += err * err
            count += 1
            g = 2.0 * lr * err
            w -= g * p
            b -= g
    mse = total / max(count, 1)
    if not (np.isfinite(mse) and np.all(np.isfinite(w))):
        raise TrainingDiverged(
            f"non-finite loss after {count} updates (lr={lr}); "
            "lower the learning rate or the input gain")
    return Readout(w, b), mse


@dataclass
class TrainResult:
    readout: Readout
    loss_curve: list[float] = field(default_factory=list)


def _noise_seed(cfg: TrainConfig, epoch: int, index: int):
    return np.random.SeedSequence([cfg.noise_seed, epoch, index])


def train(model: ReservoirModel, dataset, cfg: TrainConfig,
          readout: Readout | None = None, start_epoch: int = 0,
          progress=None) -> TrainResult:
    """Fit the readout on every sample of ``dataset`` for up to ``cfg.epochs``.

    Sample order is reshuffled each epoch from ``cfg.shuffle_seed``. Training
    stops early once the epoch MSE improves by less than
    ``cfg.min_rel_improvement`` relative.
    """
    signals = list(dataset)
    if not signals:
        raise ValueError("dataset is empty")
    lengths = {len(getattr(s, "samples", s)) for s in signals}
    if len(lengths) != 1:
        raise ValueError("all training signals must share one length")
    r = readout.copy() if readout is not None else Readout.zeros(model.spec.n_cells)
    h = cfg.horizon_steps
    curve: list[float] = []
    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        order = np.random.default_rng([cfg.shuffle_seed, epoch]).permutation(len(signals))
        total, count = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            batch = np.stack([np.asarray(getattr(signals[i], "samples", signals[i]))
                              for i in idx])
            traces = run_batch(model, batch, [_noise_seed(cfg, epoch, i) for i in idx])
            for trace, s in zip(traces, batch):
                target = make_target(s, h)
                steps = len(target) - cfg.warmup_steps
                r, mse = sgd_epoch(r, trace[:len(target)], target,
                                   cfg.learning_rate, skip=cfg.warmup_steps)
                total += mse * steps
                count += steps
        epoch_mse = total / count
        curve.append(epoch_mse)
        logger.info("epoch %d mse %.6g", epoch, epoch_mse)
        if progress is not None:
            progress(epoch, epoch_mse)
        if len(curve) >= 2 and curve[-2] > 0:
            if (curve[-2] - curve[-1]) / curve[-2] < cfg.min_rel_improvement:
                break
    return TrainResult(r, curve)
