"""Staggered-grid FDTD core: grid, speed/damping fields, coupling matrix.

The reservoir state is the stacked vector ``[p; ox; oy]`` of length ``3 n^2``.
Cell ``(i, j)`` maps to flat index ``i * n + j`` in every block. Row 0 is the
fast end of the grid, row ``n - 1`` the slow end.

``ox[i, j]`` sits on the face between ``p[i, j]`` and ``p[i, j + 1]``;
``oy[i, j]`` on the face between ``p[i, j]`` and ``p[i + 1, j]``. The top and
left edges are rigid walls (no face, zero flux). The last column of ``ox`` and
the last row of ``oy`` are pressure-release faces: the pressure beyond them
is held at zero. The scheme is lossless at k = 0 and has no static
(uniform-pressure) mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

logger = logging.getLogger(__name__)

K_MIN_DEFAULT = -0.01
K_MAX_DEFAULT = 0.1


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry and time base.

    Attributes:
        n: Side length of the p-grid.
        dt: Sample period in seconds.
        c_ref: Speed at which the 2D courant number reaches 1.
        k_sign: +1 makes positive damping values decay the o-neurons,
            -1 applies the opposite (amplifying) convention.
    """

    n: int = 40
    dt: float = 0.006
    c_ref: float = 300.0
    k_sign: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid side n must be >= 2, got {self.n}")
        if not self.dt > 0 or not self.c_ref > 0:
            raise ValueError("dt and c_ref must be positive")
        if self.k_sign not in (1.0, -1.0):
            raise ValueError("k_sign must be +1 or -1")

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    @property
    def state_dim(self) -> int:
        return 3 * self.n * self.n


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpeedField:
    """Per-cell wave speed plus the cumulative relative rescaling applied so far."""

    values: NDArray
    scale_accum: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"speed field must be square, got {self.values.shape}")
        if not np.all(self.values > 0):
            raise ValueError("speed field must be strictly positive")

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DampingField:
    """Damping on the horizontal (kx) and vertical (ky) o-neurons."""

    kx: NDArray
    ky: NDArray
    k_min: float = K_MIN_DEFAULT
    k_max: float = K_MAX_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "kx", _frozen(self.kx))
        object.__setattr__(self, "ky", _frozen(self.ky))
        if self.kx.shape != self.ky.shape or self.kx.ndim != 2:
            raise ValueError("kx and ky must be equal-shaped 2D grids")
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        for grid in (self.kx, self.ky):
            if np.any(grid < self.k_min) or np.any(grid > self.k_max):
                raise ValueError(
                    f"damping outside [{self.k_min}, {self.k_max}]")

    @property
    def n(self) -> int:
        return self.kx.shape[0]

    def clamped(self, kx: NDArray, ky: NDArray) -> "DampingField":
        """New field with the given grids clipped into this field's bounds."""
        return replace(self, kx=np.clip(kx, self.k_min, self.k_max),
                       ky=np.clip(ky, self.k_min, self.k_max))


@dataclass
class WaveState:
    """One snapshot of the three neuron populations, each flat of length n^2."""

    p: NDArray
    ox: NDArray
    oy: NDArray

    @classmethod
    def zeros(cls, spec: GridSpec) -> "WaveState":
        m = spec.n_cells
        return cls(np.zeros(m), np.zeros(m), np.zeros(m))

    @classmethod
    def from_vector(cls, x: NDArray, spec: GridSpec) -> "WaveState":
        x = np.asarray(x, dtype=float)
        if x.shape != (spec.state_dim,):
            raise ValueError(
                f"state vector must have length {spec.state_dim}, got {x.shape}")
        m = spec.n_cells
        return cls(x[:m].copy(), x[m:2 * m].copy(), x[2 * m:].copy())

    def to_vector(self) -> NDArray:
        return np.concatenate([self.p, self.ox, self.oy])


def init_speed_field(spec: GridSpec, c0: float = 300.0,
                     grad_per_row: float | None = None,
                     noise_amp: float = 0.8, seed: int = 0) -> SpeedField:
    """Graded speed field: ``c0 + grad_per_row * i - u``, ``u ~ U[0, noise_amp)``.

    ``grad_per_row`` defaults to ``-250 / n``.
    """
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0}")
    if noise_amp < 0:
        raise ValueError("noise_amp must be non-negative")
    if grad_per_row is None:
        grad_per_row = -250.0 / spec.n
    n = spec.n
    rows = np.arange(n, dtype=float)[:, None]
    u = np.random.default_rng(seed).uniform(0.0, noise_amp, size=(n, n))
    values = c0 + grad_per_row * rows - u
    if np.any(values <= 0):
        raise ValueError("speed field has non-positive entries; "
                         "reduce the gradient or noise")
    if np.any(values > spec.c_ref):
        raise ValueError(
            f"speed field exceeds c_ref={spec.c_ref} (courant violation)")
    return SpeedField(values)


def init_damping_field(spec: GridSpec, k0: float = 0.0,
                       k_min: float = K_MIN_DEFAULT,
                       k_max: float = K_MAX_DEFAULT) -> DampingField:
    if not k_min <= k0 <= k_max:
        raise ValueError(f"k0={k0} outside [{k_min}, {k_max}]")
    grid = np.full((spec.n, spec.n), float(k0))
    return DampingField(grid, grid.copy(), k_min, k_max)


def courant_coefficient(c: SpeedField, spec: GridSpec) -> NDArray:
    """Per-cell coefficient on the divergence term of the p update.

    With ``lam = c / c_ref`` the coefficient is ``lam**2 / 2``: the 2D
    explicit scheme is neutrally stable up to ``lam = 1``.
    """
    lam = c.values / spec.c_ref
    return 0.5 * lam * lam


def _check_fields(c: SpeedField, k: DampingField, spec: GridSpec):
    if c.n != spec.n or k.n != spec.n:
        raise ValueError(
            f"field size mismatch: c={c.n}, k={k.n}, grid={spec.n}")


def damping_factors(k: NDArray, spec: GridSpec) -> tuple[NDArray, NDArray]:
    """Retention and gradient gain of the o update for damping ``k``.

    The damping term is centred in time, ``o' = (a * o - b * grad p')`` with
    ``a = (1 - k/2) / (1 + k/2)`` and ``b = 1 / (1 + k/2)``, which keeps the
    leapfrog stable up to courant 1 for any ``k >= 0``.
    """
    half = 0.5 * spec.k_sign * np.asarray(k)
    return (1.0 - half) / (1.0 + half), 1.0 / (1.0 + half)


def fdtd_step(state: WaveState, c: SpeedField, k: DampingField,
              spec: GridSpec) -> WaveState:
    """Advance the wave state by one explicit leapfrog step.

    p is updated first from the old o; o is then updated from the new p.
    """
    _check_fields(c, k, spec)
    n = spec.n
    shape = (n, n)
    p = np.asarray(state.p, dtype=float).reshape(shape)
    ox = np.asarray(state.ox, dtype=float).reshape(shape)
    oy = np.asarray(state.oy, dtype=float).reshape(shape)

    div = ox + oy
    div[:, 1:] -= ox[:, :-1]
    div[1:, :] -= oy[:-1, :]
    p_new = p - courant_coefficient(c, spec) * div

    # pressure beyond the right and bottom edges is zero
    dpx = -p_new
    dpx[:, :-1] += p_new[:, 1:]
    dpy = -p_new
    dpy[:-1, :] += p_new[1:, :]
    ax, bx = damping_factors(k.kx, spec)
    ay, by = damping_factors(k.ky, spec)
    ox_new = ax * ox - bx * dpx
    oy_new = ay * oy - by * dpy
    return WaveState(p_new.ravel(), ox_new.ravel(), oy_new.ravel())


def _gradient_operator(n: int) -> sparse.csr_matrix:
    """Map p (n^2) to face differences [ox; oy] (2 n^2)."""
    m = n * n
    idx = np.arange(m).reshape(n, n)
    rows, cols, vals = [], [], []
    # ox[i, j] <- p[i, j+1] - p[i, j]; oy[i, j] <- p[i+1, j] - p[i, j]
    for offset, own, nxt in ((0, idx[:, :-1], idx[:, 1:]),
                             (m, idx[:-1, :], idx[1:, :])):
        rows.append(offset + own.ravel())
        cols.append(nxt.ravel())
        vals.append(np.ones(own.size))
    rows += [np.arange(m), m + np.arange(m)]
    cols += [np.arange(m), np.arange(m)]
    vals += [-np.ones(m), -np.ones(m)]
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n * n, n * n))


def build_coupling_matrix(c: SpeedField, k: DampingField,
                          spec: GridSpec) -> sparse.csr_matrix:
    """Sparse matrix ``A`` with ``A @ x == fdtd_step(x)`` for stacked states.

    Built as ``A = O @ P`` where ``P`` applies the p half-step and ``O`` the
    o half-step, mirroring the update order of :func:`fdtd_step`.
    """
    _check_fields(c, k, spec)
    n = spec.n
    m = n * n
    grad = _gradient_operator(n)
    # the discrete divergence is the negative adjoint of the gradient
    div = -grad.T.tocsr()
    coef = sparse.diags(courant_coefficient(c, spec).ravel())
    keep, gain = damping_factors(
        np.concatenate([k.kx.ravel(), k.ky.ravel()]), spec)

    eye_p = sparse.identity(m, format="csr")
    p_half = sparse.bmat([[eye_p, -coef @ div],
                          [None, sparse.identity(2 * m, format="csr")]],
                         format="csr")
    o_half = sparse.bmat([[eye_p, None],
                          [-sparse.diags(gain) @ grad, sparse.diags(keep)]],
                         format="csr")
    a = (o_half @ p_half).tocsr()
    a.eliminate_zeros()
    a.sort_indices()
    return a


def coupling_to_reservoir_weights(a: sparse.spmatrix,
                                  alpha: float) -> sparse.csr_matrix:
    """Reservoir weights ``W = (A - (1 - alpha) I) / alpha``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    eye = sparse.identity(a.shape[0], format="csr")
    w = ((a - (1.0 - alpha) * eye) / alpha).tocsr()
    w.sort_indices()
    return w


def spectral_radius(a, dense_limit: int = 2000) -> float:
    """Largest eigenvalue modulus; dense LAPACK below ``dense_limit`` rows."""
    size = a.shape[0]
    if size <= dense_limit:
        dense = a.toarray() if sparse.issparse(a) else np.asarray(a)
        return float(np.max(np.abs(np.linalg.eigvals(dense))))
    from scipy.sparse.linalg import eigs
    vals = eigs(a.astype(float), k=6, which="LM", return_eigenvectors=False,
                tol=1e-10, maxiter=20 * size)
    return float(np.max(np.abs(vals)))


def scale_speed(c: SpeedField, factor: float, spec: GridSpec,
                delta_accum: float = 0.0) -> SpeedField:
    """Multiply every speed by ``factor``, clipping at the courant ceiling."""
    values = c.values * factor
    if np.any(values > spec.c_ref):
        logger.warning("speed field clipped at c_ref=%g on %d cells",
                       spec.c_ref, int(np.sum(values > spec.c_ref)))
        values = np.minimum(values, spec.c_ref)
    return SpeedField(values, c.scale_accum + delta_accum)
