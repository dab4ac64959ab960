"""Synthetic beat signals, aperiodic distractors, datasets and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

DT_DEFAULT = 0.006
TEST_INTERVALS_S = (0.360, 0.500, 0.720, 1.000, 1.440, 2.556)
TEST_PHASE_S = 0.2


@dataclass
class Signal:
    """Uniformly sampled amplitude envelope in [0, 1].

    ``beat_times`` are pulse centres in seconds; ``interval_s`` is the
    inter-beat interval for rhythmic signals and None otherwise.
    """

    samples: NDArray
    dt: float = DT_DEFAULT
    beat_times: NDArray = field(default_factory=lambda: np.zeros(0))
    interval_s: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.beat_times = np.asarray(self.beat_times, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError("samples must be 1D")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if np.any(self.samples < 0) or np.any(self.samples > 1):
            raise ValueError("samples must lie in [0, 1]")
        if np.any(np.diff(self.beat_times) <= 0):
            raise ValueError("beat times must be strictly increasing")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt

    @property
    def times(self) -> NDArray:
        return np.arange(len(self.samples)) * self.dt

    @property
    def rhythmic(self) -> bool:
        return self.interval_s is not None


def _n_steps(duration_s: float, dt_s: float) -> int:
    return int(round(duration_s / dt_s))


def pulse_train(centres: NDArray, n_steps: int, dt_s: float,
                pulse_width_s: float) -> NDArray:
    """Sum of unit-height Hann pulses of full width ``pulse_width_s``."""
    t = np.arange(n_steps) * dt_s
    out = np.zeros(n_steps)
    half = 0.5 * pulse_width_s
    for tc in centres:
        lo = max(0, int(math.floor((tc - half) / dt_s)))
        hi = min(n_steps, int(math.ceil((tc + half) / dt_s)) + 1)
        if hi <= lo:
            continue
        u = t[lo:hi] - tc
        bump = np.where(np.abs(u) < half,
                        0.5 * (1.0 + np.cos(2 * np.pi * u / pulse_width_s)), 0.0)
        out[lo:hi] = np.maximum(out[lo:hi], bump)
    return out


def gen_beat_signal(interval_s: float, duration_s: float = 30.0,
                    dt_s: float = DT_DEFAULT, pulse_width_s: float = 0.06,
                    phase_s: float | None = 0.0, seed: int | None = None) -> Signal:
    """Periodic Hann pulse train with beats at ``phase_s + m * interval_s``.

    A ``phase_s`` of None draws the phase uniformly in ``[0, interval_s)``
    from ``seed``.
    """
    if not 0 < pulse_width_s < interval_s:
        raise ValueError(
            f"pulse width {pulse_width_s} must be in (0, interval={interval_s})")
    if phase_s is None:
        phase_s = float(np.random.default_rng(seed).uniform(0.0, interval_s))
    if not 0 <= phase_s < interval_s:
        raise ValueError("phase must lie in [0, interval)")
    n_steps = _n_steps(duration_s, dt_s)
    n_beats = int(math.ceil((n_steps * dt_s - phase_s) / interval_s))
    centres = phase_s + interval_s * np.arange(max(n_beats, 0))
    centres = centres[centres < n_steps * dt_s]
    samples = pulse_train(centres, n_steps, dt_s, pulse_width_s)
    return Signal(samples, dt_s, centres, float(interval_s))


def gen_nonrhythmic(duration_s: float = 30.0, dt_s: float = DT_DEFAULT,
                    seed: int = 0, pulse_width_s: float = 0.06,
                    gap_range_s: tuple[float, float] = (0.2, 1.5)) -> Signal:
    """Aperiodic pulse train with i.i.d. uniform inter-onset gaps."""
    rng = np.random.default_rng(seed)
    n_steps = _n_steps(duration_s, dt_s)
    end = n_steps * dt_s
    onsets = []
    t = rng.uniform(0.0, gap_range_s[1])
    while t < end:
        onsets.append(t)
        t += rng.uniform(*gap_range_s)
    samples = pulse_train(np.array(onsets), n_steps, dt_s, pulse_width_s)
    # no beat annotations: there is no periodic structure to annotate
    return Signal(samples, dt_s)


@dataclass(frozen=True)
class DatasetConfig:
    n_samples: int = 1000
    bpm_range: tuple[float, float] = (66.0, 168.0)
    nonrhythmic_fraction: float = 0.25
    duration_s: float = 30.0
    dt_s: float = DT_DEFAULT
    pulse_width_s: float = 0.06
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bpm_range", tuple(float(b) for b in self.bpm_range))
        lo, hi = self.bpm_range
        if not 0 < lo <= hi:
            raise ValueError("bpm bounds must be positive and ordered")
        if not 0 <= self.nonrhythmic_fraction <= 1:
            raise ValueError("nonrhythmic_fraction must be in [0, 1]")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


@dataclass
class Dataset:
    signals: list[Signal]
    params: list[dict]
    config: DatasetConfig

    def __len__(self):
        return len(self.signals)

    def __iter__(self):
        return iter(self.signals)

    def __getitem__(self, i):
        return self.signals[i]


def gen_dataset(cfg: DatasetConfig) -> Dataset:
    """Rhythmic and non-rhythmic samples, fully determined by ``cfg.seed``.

    The rhythmic count is ``ceil((1 - fraction) * n)``; rhythmic and
    non-rhythmic samples are interleaved in a seeded random order.
    """
    n_rhythmic = int(math.ceil((1.0 - cfg.nonrhythmic_fraction) * cfg.n_samples
                               - 1e-9))
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_samples + 1)
    kinds = np.array([True] * n_rhythmic + [False] * (cfg.n_samples - n_rhythmic))
    np.random.default_rng(children[-1]).shuffle(kinds)
    signals, params = [], []
    for i, (rhythmic, child) in enumerate(zip(kinds, children)):
        sample_seed = int(child.generate_state(1)[0])
        rng = np.random.default_rng(sample_seed)
        if rhythmic:
            bpm = float(rng.uniform(*cfg.bpm_range))
            interval = 60.0 / bpm
            phase = float(rng.uniform(0.0, interval))
            sig = gen_beat_signal(interval, cfg.duration_s, cfg.dt_s,
                                  cfg.pulse_width_s, phase)
            params.append({"index": i, "kind": "rhythmic", "bpm": bpm,
                           "interval_s": interval, "phase_s": phase,
                           "seed": sample_seed})
        else:
            sig = gen_nonrhythmic(cfg.duration_s, cfg.dt_s, sample_seed,
                                  cfg.pulse_width_s)
            params.append({"index": i, "kind": "nonrhythmic",
                           "seed": sample_seed})
        signals.append(sig)
    return Dataset(signals, params, cfg)


def test_suite(dt_s: float = DT_DEFAULT, duration_s: float = 30.0,
               pulse_width_s: float = 0.06) -> list[Signal]:
    """The six fixed evaluation signals, one per interval in ``TEST_INTERVALS_S``."""
    return [gen_beat_signal(iv, duration_s, dt_s, pulse_width_s, TEST_PHASE_S)
            for iv in TEST_INTERVALS_S]


# keep pytest from collecting the suite builder as a test
test_suite.__test__ = False
