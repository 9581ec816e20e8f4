"""Drift-shifted generating process and its explosion time.

For a Markov functional ``X(t) = f(t, W(t))`` the shifted process is built
forward in time on the grid::

    X'_i     = f(t_i, W_i + B_i)
    logZ'_i+1 = logZ'_i + X'_i.dW_i - |X'_i|^2 dt / 2
    M_i+1    = M_i + |X'_i|^2 Z'_i dt
    Y'_i     = Z'_i / (1/y - M_i / 2)
    B_i+1    = B_i + Y'_i X'_i dt

and halts at the first index where the denominator ``1/y - M_i/2`` drops
below ``STIFF_EPS`` (explosion).  The drift therefore feeds back one step
later.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import ExprDomainError, ProcessSpec, eval_process
from .exponent import (
    PathDomainError,
    accumulate,
    area_increment,
    eval_on_path,
    exponent_paths,
    log_increment,
    sqnorm,
)
from .mc import (
    RHS_STREAM,
    Estimate,
    IdentityReport,
    MCConfig,
    PathBundle,
    dt_allowance,
    mc_estimate,
)
from .paths import DriverPaths, TimeGrid

__all__ = [
    "STIFF_EPS",
    "DriftShiftPaths",
    "drift_shift_paths",
    "explosion_probability",
    "martingale_condition_report",
]

STIFF_EPS = 1e-12


@dataclass(frozen=True)
class DriftShiftPaths:
    """Per-grid arrays of the shifted construction, time-major.

    After the explosion index ``tau`` the arrays ``x_prime``, ``drift`` and
    ``y_prime`` are NaN and ``m`` stays frozen at its value at ``tau``.
    Deterministic specs are the exception: ``x_prime`` does not depend on
    the drift, so ``x_prime``, ``log_z`` and ``m`` are defined on the whole
    grid.  ``tau == n_steps + 1`` means no explosion.
    """

    grid: TimeGrid
    y: float
    x_prime: np.ndarray
    drift: np.ndarray
    log_z: np.ndarray
    m: np.ndarray
    y_prime: np.ndarray
    tau: np.ndarray
    failed: np.ndarray
    m_zx: np.ndarray | None = None

    @property
    def exploded(self) -> np.ndarray:
        return self.tau <= self.grid.n_steps

    def exploded_by(self, i: int) -> np.ndarray:
        return self.tau <= i


def _explosion_mask(m: np.ndarray, y: float) -> np.ndarray:
    return (1.0 / y - 0.5 * m) < STIFF_EPS


def _deterministic(spec, path, y, z_x):
    x = eval_on_path(spec, path)
    e = exponent_paths(x, path, y)
    n = path.grid.n_steps
    dt = path.grid.dt
    m = e.area
    bad = _explosion_mask(m, y)
    tau = np.where(bad.any(axis=0), bad.argmax(axis=0), n + 1)
    alive = np.arange(n + 1)[:, None] < tau[None, :]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        y_prime = np.where(alive, y * e.z / (1.0 - 0.5 * y * m), np.nan)
        drift = accumulate(y_prime[:-1, :, None] * x[:-1] * dt, np.empty(x.shape))
    drift[~alive] = np.nan
    m_zx = None
    if z_x is not None:
        m_zx = _accumulate_frozen(sqnorm(x[:-1]), z_x[:-1], dt, alive)
    return DriftShiftPaths(
        path.grid, y, x, drift, e.log_z, m, y_prime, tau, e.failed, m_zx
    )


def _accumulate_frozen(x_sq, z, dt, alive):
    inc = np.where(alive[:-1], area_increment(x_sq, z, dt), 0.0)
    return accumulate(inc, np.empty(alive.shape))


def drift_shift_paths(
    spec: ProcessSpec, path: DriverPaths, y: float, z_x: np.ndarray | None = None
) -> DriftShiftPaths:
    """Run the shifted recursion along ``path``.

    If ``z_x`` (the stochastic exponential of the unshifted ``X`` on the same
    path) is given, ``m_zx`` accumulates ``|X'|^2 Z_X dt`` for comparison.
    """
    if not y > 0:
        raise ValueError(f"y must be positive, got {y}")
    if spec.d != path.d:
        raise ValueError(f"spec has d={spec.d}, path has d={path.d}")
    if spec.is_deterministic:
        return _deterministic(spec, path, float(y), z_x)

    grid = path.grid
    n, dt, P, d = grid.n_steps, grid.dt, path.n_paths, path.d
    w = path.values
    x_prime = np.full((n + 1, P, d), np.nan)
    drift = np.full((n + 1, P, d), np.nan)
    log_z = np.full((n + 1, P), np.nan)
    y_prime = np.full((n + 1, P), np.nan)
    m = np.empty((n + 1, P))
    m_zx = np.empty((n + 1, P)) if z_x is not None else None
    tau = np.full(P, n + 1)
    failed = np.zeros(P, dtype=bool)

    drift[0] = 0.0
    log_z[0] = 0.0
    m[0] = 0.0
    if m_zx is not None:
        m_zx[0] = 0.0
    alive = np.ones(P, dtype=bool)
    for i in range(n + 1):
        newly = alive & _explosion_mask(m[i], y)
        tau[newly] = i
        alive &= ~newly
        try:
            xi = eval_process(spec, grid.times[i], w[i] + drift[i])
        except ExprDomainError as err:
            k = (err.index or (0,))[0]
            raise PathDomainError(err, path.start + k, i) from err
        with np.errstate(over="ignore", invalid="ignore"):
            zi = np.exp(log_z[i])
            yi = y * zi / (1.0 - 0.5 * y * m[i])
        x_prime[i] = np.where(alive[:, None], xi, np.nan)
        y_prime[i] = np.where(alive, yi, np.nan)
        failed |= alive & ~(np.isfinite(zi) & np.isfinite(yi) & np.isfinite(xi).all(axis=-1))
        if i == n:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            xsq = sqnorm(xi)
            log_z[i + 1] = np.where(alive, log_z[i] + log_increment(xi, path.increments[i], dt), np.nan)
            m[i + 1] = np.where(alive, m[i] + area_increment(xsq, zi, dt), m[i])
            drift[i + 1] = np.where(alive[:, None], drift[i] + yi[:, None] * xi * dt, np.nan)
            if m_zx is not None:
                m_zx[i + 1] = np.where(alive, m_zx[i] + area_increment(xsq, z_x[i], dt), m_zx[i])
    return DriftShiftPaths(grid, float(y), x_prime, drift, log_z, m, y_prime, tau, failed, m_zx)


# --------------------------------------------------------- Monte Carlo layer --


def _require_on_grid(config: MCConfig, t: float) -> None:
    config.grid.index_of(t)


def explosion_probability(spec: ProcessSpec, y: float, t: float, config: MCConfig) -> Estimate:
    """Estimate of ``P(tau <= t)`` for the shifted construction."""
    _require_on_grid(config, t)

    def exploded(b: PathBundle):
        ds = drift_shift_paths(b.spec, b.driver, y)
        b.mark_failed(ds.failed)
        return ds.exploded_by(b.grid.index_of(t)).astype(float)

    return mc_estimate(exploded, spec, config, y)


def martingale_condition_report(
    spec: ProcessSpec, y: float, t: float, config: MCConfig, variant: str = "z_prime"
) -> IdentityReport:
    """``E[exp(Y(t) - y)]`` against ``P{M(t) < 2/y}``.

    ``variant="z_prime"`` integrates ``|X'|^2`` against the shifted exponential
    ``Z'`` (the explosion criterion); ``variant="z_x"`` uses the unshifted
    ``Z_X`` instead, for comparison.  The two sides use independent streams.
    """
    if variant not in ("z_prime", "z_x"):
        raise ValueError(f"variant must be 'z_prime' or 'z_x', got {variant!r}")
    _require_on_grid(config, t)

    def lhs(b: PathBundle):
        return np.exp(b.exponent.Y[b.grid.index_of(t)] - y)

    def rhs(b: PathBundle):
        i = b.grid.index_of(t)
        if variant == "z_prime":
            ds = drift_shift_paths(b.spec, b.driver, y)
            b.mark_failed(ds.failed)
            return (~ds.exploded_by(i)).astype(float)
        ds = drift_shift_paths(b.spec, b.driver, y, z_x=b.exponent.z)
        b.mark_failed(ds.failed)
        return (ds.m_zx[i] < 2.0 / y).astype(float)

    left = mc_estimate(lhs, spec, config, y)
    right = mc_estimate(rhs, spec, config.substream(RHS_STREAM), y)
    allowance = float(dt_allowance(lhs, spec, config, y)[0] + dt_allowance(rhs, spec, config, y)[0])
    return IdentityReport(left, right, allowance)
