"""End-to-end pipelines shared by the command line and the demo scripts."""

from __future__ import annotations

import logging
from dataclasses import asdict, replace

import numpy as np
from numpy.typing import NDArray

from .adaptation import adaptive_run
from .config import ExperimentConfig
from .evaluation import (detect_peaks, interval_errors, lag_by_xcorr,
                         random_reservoir, resonance_map, time_offset_ratio)
from .readout import Readout, TrainConfig, TrainResult, predict, train
from .reservoir import ReservoirModel, init_reservoir, run
from .signals import (DatasetConfig, Signal, gen_beat_signal, gen_dataset,
                      pulse_train)
from .wave import init_damping_field, init_speed_field, scale_speed

logger = logging.getLogger(__name__)


def build_model(cfg: ExperimentConfig) -> ReservoirModel:
    f = cfg.fields
    c = init_speed_field(cfg.grid, f.c0, f.grad_per_row, f.c_noise_amp,
                         cfg.seeds.field_seed)
    k = init_damping_field(cfg.grid, f.k0, f.k_min, f.k_max)
    r = cfg.reservoir
    return init_reservoir(cfg.grid, c, k, r.alpha, r.input_gain, r.noise_amp,
                          cfg.seeds.input_seed)


def build_baseline(cfg: ExperimentConfig, template: ReservoirModel | None = None):
    template = template if template is not None else build_model(cfg)
    return random_reservoir(cfg.grid, cfg.baseline.density,
                            cfg.baseline.spectral_radius,
                            cfg.seeds.input_seed, template)


def dataset_config(cfg: ExperimentConfig) -> DatasetConfig:
    d = cfg.dataset
    return DatasetConfig(d.n_samples, d.bpm_range, d.nonrhythmic_fraction,
                         d.duration_s, cfg.grid.dt, d.pulse_width_s,
                         cfg.seeds.data_seed)


def build_dataset(cfg: ExperimentConfig):
    return gen_dataset(dataset_config(cfg))


def train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(shuffle_seed=cfg.seeds.shuffle_seed,
                       noise_seed=cfg.seeds.noise_seed, **asdict(cfg.train))


def train_model(cfg: ExperimentConfig, model: ReservoirModel, signals,
                readout: Readout | None = None, start_epoch: int = 0,
                progress=None) -> TrainResult:
    return train(model, signals, train_config(cfg), readout, start_epoch, progress)


def test_signals(cfg: ExperimentConfig) -> list[Signal]:
    from .signals import test_suite
    return test_suite(cfg.grid.dt, cfg.dataset.duration_s, cfg.dataset.pulse_width_s)


test_signals.__test__ = False


def eval_noise_seed(cfg: ExperimentConfig, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seeds.noise_seed, 7919, index])


def prediction_peaks(pred: NDArray, interval_s: float, cfg: ExperimentConfig) -> NDArray:
    """Peak times of a prediction, shifted forward by the horizon onto the target clock."""
    dt = cfg.grid.dt
    peaks = detect_peaks(pred, dt, rel_height=cfg.eval.rel_height,
                         min_separation_s=max(cfg.eval.min_separation_frac * interval_s,
                                              2 * dt))
    return peaks + cfg.train.horizon_steps * dt


def _scored(times: NDArray, lo: float, hi: float) -> NDArray:
    times = np.asarray(times, dtype=float)
    return times[(times >= lo) & (times <= hi)]


def score_window(sig: Signal, cfg: ExperimentConfig) -> tuple[float, float]:
    """Time span over which beats are scored.

    Scoring starts after the readout warm-up and ``eval.score_from_s``, and
    ends where the last target sample lies.
    """
    warm = (cfg.train.warmup_steps + cfg.train.horizon_steps) * cfg.grid.dt
    return max(warm, cfg.eval.score_from_s), (len(sig) - 1) * sig.dt


def offset_stats(pred: NDArray, sig: Signal, cfg: ExperimentConfig):
    lo, hi = score_window(sig, cfg)
    pk = _scored(prediction_peaks(pred, sig.interval_s, cfg), lo, hi)
    targ = _scored(sig.beat_times, lo, hi)
    return time_offset_ratio(pk, targ, sig.interval_s), pk


def _summary(stats, peaks, interval_s) -> dict:
    rec = stats.as_dict()
    try:
        rec["interval_mae_s"], rec["interval_var"] = interval_errors(peaks, interval_s)
    except ValueError:
        rec["interval_mae_s"] = rec["interval_var"] = None
    return rec


def evaluate_sample(model: ReservoirModel, r: Readout, sig: Signal,
                    cfg: ExperimentConfig, index: int = 0, adapt: bool = False,
                    sync_on: bool = True, ds_on: bool = True) -> dict:
    """Pre-adaptation metrics for one test signal, plus post-adaptation if asked.

    Both runs see the same bias-noise sequence.
    """
    seed = eval_noise_seed(cfg, index)
    pred = predict(r, run(model, sig, noise_seed=seed).p)
    stats, peaks = offset_stats(pred, sig, cfg)
    rec = {"index": index, "interval_s": sig.interval_s,
           "pre": _summary(stats, peaks, sig.interval_s)}
    if adapt:
        res = adaptive_run(model, r, sig, cfg.sync if sync_on else None,
                           cfg.ds if ds_on else None,
                           cfg.train.horizon_steps, seed)
        post, post_peaks = offset_stats(res.prediction, sig, cfg)
        rec["post"] = _summary(post, post_peaks, sig.interval_s)
        rec["sync_enabled"], rec["ds_enabled"] = sync_on, ds_on
        rec["final_delta_sum"] = res.model.c.scale_accum
        rec["_log"] = res.log
    return rec


def evaluate_suite(model, r, signals, cfg, adapt=False, sync_on=True, ds_on=True):
    return [evaluate_sample(model, r, sig, cfg, i, adapt, sync_on, ds_on)
            for i, sig in enumerate(signals)]


def peak_shift(base_peaks: NDArray, new_peaks: NDArray, fallback_interval: float
               ) -> tuple[float, int]:
    """Mean ``(t_new - t_base) / interval`` over matched peaks; negative is earlier.

    The interval is the median spacing of the base peaks.
    """
    base = np.sort(base_peaks)
    interval = float(np.median(np.diff(base))) if len(base) > 2 else fallback_interval
    stats = time_offset_ratio(new_peaks, base, interval)
    # time_offset_ratio reports (base - new) / interval
    return (-stats.mean if stats.matched_count else float("nan")), stats.matched_count


def sweep_c(model: ReservoirModel, r: Readout, signals, deltas,
            cfg: ExperimentConfig) -> list[dict]:
    """Shift of prediction peaks after scaling ``c`` by ``1 + delta`` without retraining."""
    records = []
    for i, sig in enumerate(signals):
        seed = eval_noise_seed(cfg, i)
        lo, hi = score_window(sig, cfg)
        base = _scored(prediction_peaks(predict(r, run(model, sig, noise_seed=seed).p),
                                        sig.interval_s, cfg), lo, hi)
        for delta in deltas:
            c = scale_speed(model.c, 1.0 + delta, model.spec, delta)
            scaled = model.with_fields(c=c)
            pred = predict(r, run(scaled, sig, noise_seed=seed).p)
            new = _scored(prediction_peaks(pred, sig.interval_s, cfg), lo, hi)
            shift, matched = (peak_shift(base, new, sig.interval_s)
                              if len(base) and len(new) else (float("nan"), 0))
            records.append({"index": i, "interval_s": sig.interval_s,
                            "delta_c": float(delta), "mean_shift_ratio": shift,
                            "matched": matched})
    return records


def ratio_signal(base_hz: float, ratio: str, duration_s: float, dt: float,
                 pulse_width_s: float) -> Signal:
    """Average of pulse trains at ``base_hz`` times each term of ``ratio`` (e.g. ``"1:2"``).

    Averaging rather than taking the maximum keeps coinciding pulses
    louder, so the slower train stays audible in the spectrum.
    """
    try:
        terms = [float(t) for t in ratio.split(":")]
    except ValueError as err:
        raise ValueError(f"bad ratio {ratio!r}; expected e.g. '1:2'") from err
    if not terms or min(terms) <= 0:
        raise ValueError("ratio terms must be positive")
    n = int(round(duration_s / dt))
    out = np.zeros(n)
    for t in terms:
        interval = 1.0 / (base_hz * t)
        out += pulse_train(np.arange(0.0, n * dt, interval), n, dt, pulse_width_s)
    return Signal(out / len(terms), dt)


def spectra(model: ReservoirModel, base_hz: float, ratio: str, cfg: ExperimentConfig,
            duration_s: float = 30.0):
    """Resonance map and mean-|p| heat map under a multi-frequency drive."""
    sig = ratio_signal(base_hz, ratio, duration_s, cfg.grid.dt, cfg.dataset.pulse_width_s)
    rmap = resonance_map(model, sig, cfg.eval.settle_steps)
    quiet = replace(model, noise_amp=0.0)
    p = run(quiet, sig).p[cfg.eval.settle_steps:]
    heat = np.mean(np.abs(p), axis=0).reshape(model.spec.n, model.spec.n)
    return rmap, heat


def baseline_lags(model: ReservoirModel, r: Readout, signals, cfg) -> list[dict]:
    """Cross-correlation lag of each prediction behind its target, in seconds."""
    out = []
    h = cfg.train.horizon_steps
    for i, sig in enumerate(signals):
        pred = predict(r, run(model, sig, noise_seed=eval_noise_seed(cfg, i)).p)
        skip = cfg.train.warmup_steps
        lag = lag_by_xcorr(pred[skip:len(sig) - h], sig.samples[skip + h:],
                           cfg.grid.dt, cfg.eval.max_lag_s)
        out.append({"index": i, "interval_s": sig.interval_s, "lag_s": lag})
    return out


def beat_signal(interval_s: float, cfg: ExperimentConfig, phase_s: float = 0.0) -> Signal:
    return gen_beat_signal(interval_s, cfg.dataset.duration_s, cfg.grid.dt,
                           cfg.dataset.pulse_width_s, phase_s)
