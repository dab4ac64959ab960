"""Beat metrics, per-neuron spectra and the random-reservoir baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import signal as sps
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .reservoir import ReservoirModel, run
from .wave import GridSpec, init_damping_field, init_speed_field

MIN_FFT_STEPS = 2048


def detect_peaks(series, dt: float, min_height: float | None = None,
                 min_separation_s: float = 0.2,
                 rel_height: float = 0.3) -> NDArray:
    """Peak times in seconds.

    Local maxima above ``min_height`` (default ``rel_height`` times the
    series maximum) are kept greedily by height, dropping any lower peak
    within ``min_separation_s`` of a kept one. Times are refined by fitting a
    parabola through each peak and its two neighbours.
    """
    x = np.asarray(series, dtype=float)
    if not min_separation_s > dt:
        raise ValueError("min_separation_s must exceed dt")
    if x.size < 3 or np.ptp(x) == 0:
        return np.zeros(0)
    if min_height is None:
        min_height = rel_height * float(np.max(x))
    distance = max(1, int(np.ceil(min_separation_s / dt - 1e-9)))
    idx, _ = sps.find_peaks(x, height=min_height, distance=distance)
    times = np.empty(len(idx))
    for n, i in enumerate(idx):
        y0, y1, y2 = x[i - 1], x[i], x[i + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        times[n] = (i + shift) * dt
    return times


@dataclass
class OffsetStats:
    ratios: NDArray
    mean: float
    variance: float
    matched_count: int
    missed_count: int
    spurious_count: int
    pairs: list[tuple[float, float]]

    def as_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance,
                "mean_abs": float(np.mean(np.abs(self.ratios))) if len(self.ratios) else float("nan"),
                "matched": self.matched_count, "missed": self.missed_count,
                "spurious": self.spurious_count}


def match_peaks(pred_peaks, target_peaks, gate_s: float) -> list[tuple[int, int]]:
    """Pair target and prediction peaks, closest pairs first, within ``gate_s``.

    Inputs are sorted first, so the matched set does not depend on their
    order. Returns index pairs into the sorted arrays.
    """
    pred = np.sort(np.asarray(pred_peaks, dtype=float))
    targ = np.sort(np.asarray(target_peaks, dtype=float))
    if len(pred) == 0 or len(targ) == 0:
        return []
    dist = np.abs(targ[:, None] - pred[None, :])
    ti, pi = np.nonzero(dist <= gate_s)
    order = np.lexsort((pi, ti, dist[ti, pi]))
    used_t, used_p, pairs = set(), set(), []
    for o in order:
        a, b = int(ti[o]), int(pi[o])
        if a in used_t or b in used_p:
            continue
        used_t.add(a)
        used_p.add(b)
        pairs.append((a, b))
    return sorted(pairs)


def time_offset_ratio(pred_peaks, target_peaks,
                      target_interval_s: float) -> OffsetStats:
    """Per-beat ``(t_target - t_pred) / interval``; positive means early."""
    if not target_interval_s > 0:
        raise ValueError("target interval must be positive")
    targ = np.sort(np.asarray(target_peaks, dtype=float))
    pred = np.sort(np.asarray(pred_peaks, dtype=float))
    if len(targ) == 0:
        raise ValueError("no target peaks to match against")
    pairs = match_peaks(pred, targ, 0.5 * target_interval_s)
    ratios = np.array([(targ[a] - pred[b]) / target_interval_s for a, b in pairs])
    mean = float(np.mean(ratios)) if len(ratios) else float("nan")
    var = float(np.var(ratios)) if len(ratios) else float("nan")
    return OffsetStats(ratios, mean, var, len(pairs), len(targ) - len(pairs),
                       len(pred) - len(pairs),
                       [(float(targ[a]), float(pred[b])) for a, b in pairs])


def interval_errors(pred_peaks, target_interval_s: float) -> tuple[float, float]:
    """Mean and variance of ``|consecutive peak gap - target interval|``."""
    pred = np.sort(np.asarray(pred_peaks, dtype=float))
    if len(pred) < 2:
        raise ValueError("need at least two prediction peaks")
    err = np.abs(np.diff(pred) - target_interval_s)
    return float(np.mean(err)), float(np.var(err))


def lag_by_xcorr(pred, reference, dt: float, max_lag_s: float = 0.5) -> float:
    """Lag in seconds by which ``pred`` trails ``reference`` (cross-correlation argmax).

    Positive values mean the prediction comes later than the reference.
    """
    a = np.asarray(pred, dtype=float)
    b = np.asarray(reference, dtype=float)
    n = min(len(a), len(b))
    a = a[:n] - a[:n].mean()
    b = b[:n] - b[:n].mean()
    max_lag = int(round(max_lag_s / dt))
    lags = np.arange(-max_lag, max_lag + 1)
    scores = np.array([np.dot(a[max(l, 0):n + min(l, 0)],
                              b[max(-l, 0):n - max(l, 0)]) for l in lags])
    return float(lags[int(np.argmax(scores))] * dt)


@dataclass
class ResonanceMap:
    dominant_freq: NDArray
    freqs: NDArray
    spectra: NDArray | None = None

    def row_medians(self) -> NDArray:
        return np.median(self.dominant_freq, axis=1)


def neuron_spectra(p_trace: NDArray, dt: float) -> tuple[NDArray, NDArray]:
    """Hann-windowed magnitude spectra per column of a ``(T, neurons)`` trace.

    The mean of each neuron is removed; the FFT length is the next power of
    two at or above ``T``.
    """
    x = np.asarray(p_trace, dtype=float)
    x = x - x.mean(axis=0)
    x = x * np.hanning(len(x))[:, None]
    nfft = 1 << int(np.ceil(np.log2(len(x))))
    spec = np.abs(np.fft.rfft(x, n=nfft, axis=0)).T
    return np.fft.rfftfreq(nfft, dt), spec


def resonance_map(model: ReservoirModel, excitation, settle_steps: int = 500,
                  keep_spectra: bool = True) -> ResonanceMap:
    """Dominant frequency (Hz, DC excluded) of every p-neuron under ``excitation``.

    The reservoir runs without bias noise.
    """
    s = np.asarray(getattr(excitation, "samples", excitation), dtype=float)
    if len(s) - settle_steps < MIN_FFT_STEPS:
        raise ValueError(
            f"excitation too short: need {MIN_FFT_STEPS} steps after settling")
    quiet = _without_noise(model)
    trace = run(quiet, s).p[settle_steps:]
    freqs, spec = neuron_spectra(trace, model.spec.dt)
    dominant = np.zeros(spec.shape[0])
    active = spec[:, 1:].max(axis=1) > 0
    dominant[active] = freqs[1 + np.argmax(spec[active, 1:], axis=1)]
    n = model.spec.n
    return ResonanceMap(dominant.reshape(n, n), freqs,
                        spec if keep_spectra else None)


def _without_noise(model: ReservoirModel) -> ReservoirModel:
    from dataclasses import replace
    if model.noise_amp == 0:
        return model
    return replace(model, noise_amp=0.0)


def random_reservoir(spec: GridSpec, density: float = 0.01,
                     spectral_radius: float = 0.95, seed: int = 0,
                     template: ReservoirModel | None = None,
                     max_tries: int = 5) -> ReservoirModel:
    """Sparse U(-1, 1) reservoir rescaled to ``spectral_radius``.

    Input weights, leak rate and noise level come from ``template`` (a wave
    model), so only the recurrent matrix differs.
    """
    if not 0 < density < 1:
        raise ValueError("density must be in (0, 1)")
    if not spectral_radius > 0:
        raise ValueError("spectral_radius must be positive")
    if template is None:
        from .reservoir import init_reservoir
        template = init_reservoir(spec, init_speed_field(spec),
                                  init_damping_field(spec))
    dim = spec.state_dim
    last_err = None
    for attempt in range(max_tries):
        rng = np.random.default_rng([seed, attempt])
        w = sparse.random(dim, dim, density=density, format="csr", rng=rng,
                          data_rvs=lambda size: rng.uniform(-1.0, 1.0, size))
        try:
            vals = eigs(w, k=1, which="LM", return_eigenvectors=False,
                        tol=1e-8, maxiter=50 * dim,
                        v0=np.random.default_rng([seed, attempt, 1]).uniform(size=dim))
        except ArpackNoConvergence as err:
            last_err = err
            continue
        radius = float(np.abs(vals).max())
        w = (w * (spectral_radius / radius)).tocsr()
        from dataclasses import replace
        return replace(template, w_override=w, seed=seed)
    raise RuntimeError(f"spectral radius estimate did not converge: {last_err}")
