"""Online tuning of a trained reservoir while it predicts.

Two mechanisms run once per window of ``update_step`` samples:

* synchronisation: prediction and target are normalised by a streaming
  moving average and log-sum-exp, early/late slope mismatches are counted,
  and the whole speed field is scaled up or down by ``delta_c``;
* dynamic selection: each p-neuron's readout contribution is masked, the
  change in window MSE scores it, and damping is lowered around the most
  helpful neurons and raised around the most harmful ones.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import NDArray

from .readout import HORIZON_STEPS, Readout
from .reservoir import NoiseSource, ReservoirModel, StateTrace, step
from .wave import DampingField, GridSpec, SpeedField, scale_speed

logger = logging.getLogger(__name__)

EPS_DIV = 1e-9
_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class SyncConfig:
    update_step: int = 200
    threshold: float = 100.0
    delta_c: float = 0.02
    threshold_sum: float = 0.10
    delta_early: float = 1.0
    delta_late: float = 1.0
    tau_softmax: float = 500.0

    def __post_init__(self):
        if self.update_step < 2:
            raise ValueError("update_step must be >= 2")
        if not self.delta_c > 0:
            raise ValueError("delta_c must be positive")
        if not 0 < self.threshold_sum < 1:
            raise ValueError("threshold_sum must be in (0, 1)")
        if not self.tau_softmax > 0:
            raise ValueError("tau_softmax must be positive")


@dataclass(frozen=True)
class DsConfig:
    n_select: int = 40
    delta_k: float = 0.002
    window: int = 200
    ds_sign: int = 1
    mask_mode: str = "readout"

    def __post_init__(self):
        if self.n_select < 1:
            raise ValueError("n_select must be positive")
        if not self.delta_k > 0:
            raise ValueError("delta_k must be positive")
        if self.ds_sign not in (1, -1):
            raise ValueError("ds_sign must be +1 or -1")
        if self.mask_mode not in ("readout", "resim"):
            raise ValueError("mask_mode must be 'readout' or 'resim'")


# -- normalisation ---------------------------------------------------------

@dataclass
class NormalizerState:
    """Carried accumulators: ``log_acc`` is ``ln E``, ``mean`` the running average."""

    log_acc: float = -math.inf
    mean: float | None = None


class SoftmaxNormalizer:
    """Streaming ``(x - M) / ln E`` with exponentially forgotten E and M.

    ``E(t) = E(t-1) exp(-1/tau) + exp(x(t))`` is kept in the log domain so
    large inputs cannot overflow. ``M`` is an exponential moving average with
    the same time constant, started at the first sample. Steps where
    ``ln E <= eps`` output 0 and are counted in ``degenerate_steps``.
    """

    def __init__(self, tau: float, eps: float = EPS_DIV,
                 state: NormalizerState | None = None):
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.tau = tau
        self.eps = eps
        self.state = state if state is not None else NormalizerState()
        self.degenerate_steps = 0

    def __call__(self, series) -> NDArray:
        x = np.asarray(series, dtype=float)
        out = np.empty_like(x)
        decay = 1.0 / self.tau
        beta = math.exp(-decay)
        log_acc = self.state.log_acc
        mean = self.state.mean
        for t, v in enumerate(x):
            log_acc = np.logaddexp(log_acc - decay, v)
            mean = v if mean is None else beta * mean + (1.0 - beta) * v
            if log_acc <= self.eps:
                out[t] = 0.0
                self.degenerate_steps += 1
            else:
                out[t] = (v - mean) / log_acc
        self.state = NormalizerState(float(log_acc), mean)
        return out


def softmax_normalize(series, tau: float, state: NormalizerState | None = None,
                      eps: float = EPS_DIV) -> NDArray:
    return SoftmaxNormalizer(tau, eps, state)(series)


def log_accumulator(series, tau: float) -> NDArray:
    """``ln E(t)`` for every step of ``series`` from an empty accumulator."""
    x = np.asarray(series, dtype=float)
    out = np.empty_like(x)
    acc = -math.inf
    for t, v in enumerate(x):
        acc = np.logaddexp(acc - 1.0 / tau, v)
        out[t] = acc
    return out


# -- synchronisation -------------------------------------------------------

def sync_errors(p_norm, t_norm, cfg: SyncConfig = SyncConfig(),
                prev: tuple[float, float] | None = None) -> tuple[float, float]:
    """Early and late errors over one window.

    Counters start at zero and only grow; at each step where the target is
    above both the prediction and zero, a rising target with a falling
    prediction counts as early, a falling target with a rising prediction as
    late. The running counters are added to the errors every step. ``prev``
    carries ``(p, t)`` from the end of the previous window so the first
    sample has a slope too.
    """
    p = np.asarray(p_norm, dtype=float)
    tn = np.asarray(t_norm, dtype=float)
    if p.shape != tn.shape:
        raise ValueError("prediction and target windows differ in length")
    if prev is not None:
        p = np.concatenate([[prev[0]], p])
        tn = np.concatenate([[prev[1]], tn])
    elif len(p) < 2:
        raise ValueError("windows need at least two samples")
    i_early = i_late = 0
    eps_early = eps_late = 0.0
    for t in range(1, len(p)):
        if tn[t] > max(p[t], 0.0):
            dt_ = tn[t] - tn[t - 1]
            dp_ = p[t] - p[t - 1]
            if dt_ > 0:
                if dp_ < 0:
                    i_early += 1
            elif dt_ < 0:
                if dp_ > 0:
                    i_late += 1
        eps_early += cfg.delta_early * i_early
        eps_late += cfg.delta_late * i_late
    return eps_early, eps_late


def speed_decision(scale_accum: float, eps_early: float, eps_late: float,
                   cfg: SyncConfig) -> int:
    """+1 to speed up, -1 to slow down, 0 when the step would leave the budget."""
    direction = 1 if eps_early - eps_late < cfg.threshold else -1
    if abs(scale_accum + direction * cfg.delta_c) > cfg.threshold_sum + _BOUND_TOL:
        return 0
    return direction


def adapt_c(c: SpeedField, eps_early: float, eps_late: float,
            cfg: SyncConfig, spec: GridSpec) -> SpeedField:
    """Scale every speed by ``1 +/- delta_c`` according to the early/late balance."""
    direction = speed_decision(c.scale_accum, eps_early, eps_late, cfg)
    if direction == 0:
        return c
    return scale_speed(c, 1.0 + direction * cfg.delta_c, spec,
                       direction * cfg.delta_c)


# -- dynamic selection -----------------------------------------------------

def contribution_scores(p_window, r: Readout, target) -> NDArray:
    """Increase in window MSE when each neuron's readout term is removed.

    Positive scores mark neurons the prediction relies on.
    """
    p = np.asarray(getattr(p_window, "p", p_window), dtype=float)
    y = np.asarray(target, dtype=float)
    if len(p) == 0:
        raise ValueError("empty scoring window")
    if len(p) != len(y):
        raise ValueError("window and target lengths differ")
    resid = p @ r.w_out + r.bias - y
    w = r.w_out
    # mean((e - w_i p_i)^2) - mean(e^2), expanded per neuron
    cross = resid @ p / len(y)
    power = np.einsum("ti,ti->i", p, p) / len(y)
    return w * w * power - 2.0 * w * cross


def contribution_scores_resim(model: ReservoirModel, r: Readout, x0: NDArray,
                              inputs, target, noise_block: NDArray | None = None
                              ) -> NDArray:
    """Scores from re-simulating the window with each p-neuron held at zero.

    Costs one reservoir run per neuron; meant for small grids.
    """
    s = np.asarray(inputs, dtype=float)
    y = np.asarray(target, dtype=float)
    m = model.spec.n_cells

    def window_mse(clamp: int | None) -> float:
        x = np.array(x0, dtype=float)
        err = 0.0
        for t, st in enumerate(s):
            x = step(model, x, st, None if noise_block is None else noise_block[t])
            if clamp is not None:
                x[clamp] = 0.0
            e = x[:m] @ r.w_out + r.bias - y[t]
            err += e * e
        return err / len(s)

    base = window_mse(None)
    return np.array([window_mse(i) - base for i in range(m)])


def select_neurons(scores, n_select: int) -> tuple[NDArray, NDArray]:
    """Indices of the ``n_select`` highest and lowest scores.

    Ties go to the lower flat index first, so with equal scores the helpful
    set is a prefix and the harmful set a suffix of index order. The two
    sets never overlap.
    """
    s = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(len(s)), -s))
    n_sel = min(n_select, len(s))
    helpful = order[:n_sel]
    harmful = order[::-1][:n_sel]
    harmful = harmful[~np.isin(harmful, helpful)]
    return helpful, harmful


def adapt_k(k: DampingField, scores, cfg: DsConfig = DsConfig()) -> DampingField:
    """Lower damping left of and below helpful neurons, raise it for harmful ones.

    Neuron ``(i, j)`` owns ``kx[i, j-1]`` and ``ky[i-1, j]``; neighbours off
    the grid are skipped. Results are clamped to the field's bounds.
    """
    n = k.n
    helpful, harmful = select_neurons(scores, cfg.n_select)
    kx = np.array(k.kx)
    ky = np.array(k.ky)
    for group, sign in ((helpful, -1.0), (harmful, 1.0)):
        delta = sign * cfg.ds_sign * cfg.delta_k
        i, j = np.divmod(group, n)
        has_left = j > 0
        kx[i[has_left], j[has_left] - 1] += delta
        has_below = i > 0
        ky[i[has_below] - 1, j[has_below]] += delta
    return k.clamped(kx, ky)


# -- adaptive loop ---------------------------------------------------------

@dataclass
class WindowRecord:
    window: int
    t_end: int
    eps_early: float
    eps_late: float
    c_decision: int
    delta_sum: float
    boosted: list[int] = field(default_factory=list)
    damped: list[int] = field(default_factory=list)
    window_mse: float = float("nan")
    degenerate_steps: int = 0


@dataclass
class AdaptationLog:
    records: list[WindowRecord] = field(default_factory=list)
    sync_enabled: bool = True
    ds_enabled: bool = True

    def __len__(self):
        return len(self.records)

    def delta_sums(self) -> NDArray:
        return np.array([rec.delta_sum for rec in self.records])

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                row = asdict(rec)
                row["sync_enabled"] = self.sync_enabled
                row["ds_enabled"] = self.ds_enabled
                fh.write(json.dumps(row) + "\n")


@dataclass
class AdaptiveResult:
    prediction: NDArray
    log: AdaptationLog
    model: ReservoirModel
    trace: StateTrace


def adaptive_run(model: ReservoirModel, r: Readout, signal,
                 sync: SyncConfig | None = SyncConfig(),
                 ds: DsConfig | None = DsConfig(),
                 horizon_steps: int = HORIZON_STEPS,
                 noise_seed=0) -> AdaptiveResult:
    """Predict through ``signal`` while tuning ``c`` and ``k`` every window.

    Passing ``None`` for ``sync`` or ``ds`` disables that mechanism. Only
    samples already seen are used: the prediction made at ``tau`` is judged
    against the input at ``tau + horizon_steps``. After each field change the
    weights are rebuilt and stepping continues from the current state.
    """
    s = np.asarray(getattr(signal, "samples", signal), dtype=float)
    if len(s) == 0:
        raise ValueError("signal must be non-empty")
    if (sync is not None or ds is not None) and not model.is_wave:
        raise ValueError("only wave reservoirs can be adapted")
    period = sync.update_step if sync is not None else (ds.window if ds is not None else 0)
    tau = sync.tau_softmax if sync is not None else SyncConfig().tau_softmax
    norm_pred = SoftmaxNormalizer(tau)
    norm_targ = SoftmaxNormalizer(tau)
    h = horizon_steps
    m = model.spec.n_cells
    noise = NoiseSource(model.noise_amp, model.state_dim, noise_seed)
    x = np.zeros(model.state_dim)
    p_hist = np.empty((len(s), m))
    y_hist = np.empty(len(s))
    resim = ds is not None and ds.mask_mode == "resim"
    if resim:
        # resim masking replays windows from stored states and noise
        x_hist = np.empty((len(s) + 1, model.state_dim))
        x_hist[0] = x
        b_hist = np.zeros((len(s), model.state_dim))
    log = AdaptationLog(sync_enabled=sync is not None, ds_enabled=ds is not None)
    prev_norm: tuple[float, float] | None = None
    consumed = 0  # aligned samples already fed to the normalisers
    for t, st in enumerate(s):
        b = noise.draw() if model.noise_amp else None
        x = step(model, x, st, b)
        p_hist[t] = x[:m]
        y_hist[t] = x[:m] @ r.w_out + r.bias
        if resim:
            x_hist[t + 1] = x
            if b is not None:
                b_hist[t] = b
        t_end = t + 1
        if not period or t_end % period or (sync is None and ds is None):
            continue
        lo, hi = consumed, t_end - h
        if hi - lo < 2:
            continue
        consumed = hi
        pred_w = y_hist[lo:hi]
        targ_w = s[lo + h:hi + h]
        record = WindowRecord(len(log), t_end, 0.0, 0.0, 0, model.c.scale_accum,
                              window_mse=float(np.mean((pred_w - targ_w) ** 2)))
        c_new, k_new = model.c, model.k
        if sync is not None:
            before = norm_pred.degenerate_steps + norm_targ.degenerate_steps
            pn = norm_pred(pred_w)
            tn = norm_targ(targ_w)
            record.degenerate_steps = (norm_pred.degenerate_steps
                                       + norm_targ.degenerate_steps - before)
            e_early, e_late = sync_errors(pn, tn, sync, prev_norm)
            prev_norm = (float(pn[-1]), float(tn[-1]))
            record.eps_early, record.eps_late = e_early, e_late
            record.c_decision = speed_decision(model.c.scale_accum, e_early,
                                               e_late, sync)
            c_new = adapt_c(model.c, e_early, e_late, sync, model.spec)
            record.delta_sum = c_new.scale_accum
        if ds is not None:
            wlo = max(lo, hi - ds.window)
            if resim:
                scores = contribution_scores_resim(
                    model, r, x_hist[wlo], s[wlo:hi], s[wlo + h:hi + h],
                    b_hist[wlo:hi])
            else:
                scores = contribution_scores(p_hist[wlo:hi], r, s[wlo + h:hi + h])
            helpful, harmful = select_neurons(scores, ds.n_select)
            record.boosted = helpful.tolist()
            record.damped = harmful.tolist()
            k_new = adapt_k(model.k, scores, ds)
        log.records.append(record)
        if c_new is not model.c or k_new is not model.k:
            model = model.with_fields(c_new, k_new)
    trace = StateTrace(p_hist, s, x)
    return AdaptiveResult(y_hist, log, model, trace)
