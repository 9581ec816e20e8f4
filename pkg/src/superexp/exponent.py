"""Stochastic exponential, time integral and super-exponent along driver paths.

For a generating process ``X`` and ``y > 0``::

    Z(t) = exp(int X.dW - 1/2 int |X|^2 du)
    A(t) = int_0^t |X|^2 Z du
    Y(t) = Z(t) / (1/y + A(t)/2)

All integrals use the left-point (Ito) rule on the driver's grid.  Arrays
are time-major ``(n_steps + 1, n_paths)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .expr import ExprDomainError, ProcessSpec, eval_process
from .paths import DriverPaths, TimeGrid

__all__ = [
    "PathDomainError",
    "ExponentPaths",
    "StoppedExponent",
    "eval_on_path",
    "exponent_paths",
    "euler_super_sde",
    "transformed_exponential",
    "stop_at_barrier",
    "super_exponent",
]


class PathDomainError(ArithmeticError):
    def __init__(self, cause: ExprDomainError, path_index: int, step: int):
        self.cause = cause
        self.path_index = path_index
        self.step = step
        super().__init__(f"path {path_index}, step {step}: {cause}")


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Inner product over the trailing axis."""
    if a.shape[-1] == 1 and b.shape[-1] == 1:
        # a one-element reduction returns the element itself
        return a[..., 0] * b[..., 0]
    return np.sum(a * b, axis=-1)


def sqnorm(x: np.ndarray) -> np.ndarray:
    return dot(x, x)


def log_increment(x: np.ndarray, dw: np.ndarray, dt: float) -> np.ndarray:
    """Left-point increment ``x.dw - |x|^2 dt / 2`` of a log stochastic exponential."""
    return dot(x, dw) - 0.5 * sqnorm(x) * dt


def area_increment(x_sq: np.ndarray, z: np.ndarray, dt: float) -> np.ndarray:
    return x_sq * z * dt


def accumulate(increments: np.ndarray, out: np.ndarray) -> np.ndarray:
    """``out[0] = 0``, ``out[i+1] = out[i] + increments[i]``, row by row.

    Summation is strictly sequential in time, and rows are contiguous so
    this is much faster than ``np.cumsum(axis=0)``.
    """
    out[0] = 0.0
    for i in range(increments.shape[0]):
        np.add(out[i], increments[i], out=out[i + 1])
    return out


def super_exponent(z, area, y: float):
    """``Z / (1/y + A/2)`` written as ``y Z / (1 + y A / 2)`` so ``Y(0) == y`` exactly."""
    return y * z / (1.0 + 0.5 * y * area)


def _domain_error_on_path(err: ExprDomainError, path: DriverPaths, step_offset: int = 0):
    idx = err.index or ()
    step = step_offset + (idx[0] if len(idx) > 0 else 0)
    k = idx[1] if len(idx) > 1 else 0
    return PathDomainError(err, path.start + k, step)


def eval_on_path(spec: ProcessSpec, path: DriverPaths) -> np.ndarray:
    """``X(t_i) = f(t_i, W_i)``, shape ``(n_steps + 1, n_paths, d)``."""
    if spec.d != path.d:
        raise ValueError(f"spec has d={spec.d}, path has d={path.d}")
    times = path.grid.times
    try:
        if spec.is_deterministic:
            x = eval_process(spec, times, np.zeros((1, spec.d)))
            return np.broadcast_to(x[:, None, :], (len(times), path.n_paths, spec.d))
        return eval_process(spec, times[:, None], path.values)
    except ExprDomainError as err:
        raise _domain_error_on_path(err, path) from err


@dataclass(frozen=True)
class ExponentPaths:
    grid: TimeGrid
    y: float
    log_z: np.ndarray
    area: np.ndarray
    failed: np.ndarray  # per-path overflow flag

    @cached_property
    def z(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_z)

    @cached_property
    def Y(self) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return super_exponent(self.z, self.area, self.y)

    def with_y(self, y: float) -> "ExponentPaths":
        """Same paths, different initial value; ``log_z`` and ``area`` are reused."""
        if not y > 0:
            raise ValueError(f"y must be positive, got {y}")
        new = replace(self, y=float(y))
        if "z" in self.__dict__:
            new.__dict__["z"] = self.z
        return new


def exponent_paths(x: np.ndarray, path: DriverPaths, y: float) -> ExponentPaths:
    if not y > 0:
        raise ValueError(f"y must be positive, got {y}")
    dt = path.grid.dt
    n = path.grid.n_steps
    with np.errstate(over="ignore", invalid="ignore"):
        log_z = accumulate(log_increment(x[:-1], path.increments, dt), np.empty((n + 1, path.n_paths)))
        z = np.exp(log_z)
        area = accumulate(area_increment(sqnorm(x[:-1]), z[:-1], dt), np.empty_like(log_z))
    failed = ~(np.isfinite(z).all(axis=0) & np.isfinite(area).all(axis=0))
    out = ExponentPaths(path.grid, float(y), log_z, area, failed)
    out.__dict__["z"] = z
    return out


def euler_super_sde(x: np.ndarray, path: DriverPaths, y: float) -> np.ndarray:
    """Euler-Maruyama solution of ``dY = Y X.dW - |X|^2 Y^2 dt / 2``, ``Y(0) = y``.

    Not clamped at zero; negative excursions are left in the output.
    """
    if not y > 0:
        raise ValueError(f"y must be positive, got {y}")
    dt = path.grid.dt
    out = np.empty((path.grid.n_steps + 1, path.n_paths))
    out[0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(path.grid.n_steps):
            yi = out[i]
            xi = x[i]
            out[i + 1] = yi + yi * dot(xi, path.increments[i]) - 0.5 * sqnorm(xi) * yi * yi * dt
    return out


def transformed_exponential(x: np.ndarray, exp: ExponentPaths, path: DriverPaths) -> np.ndarray:
    """Stochastic exponential generated by ``V = Y X``; compare with ``exp(Y - y)``."""
    v = exp.Y[:-1, :, None] * x[:-1]
    with np.errstate(over="ignore", invalid="ignore"):
        log_zt = accumulate(log_increment(v, path.increments, path.grid.dt), np.empty_like(exp.log_z))
        return np.exp(log_zt)


@dataclass(frozen=True)
class StoppedExponent:
    barrier: float
    tau: np.ndarray  # first grid index with Y >= N, n_steps + 1 if never
    values: np.ndarray  # exp(Y(min(tau, i)) - y)

    @property
    def stopped(self) -> np.ndarray:
        return self.tau <= self.values.shape[0] - 1


def stop_at_barrier(exp: ExponentPaths, barrier: float) -> StoppedExponent:
    if not barrier > exp.y:
        raise ValueError(f"barrier N={barrier} must exceed y={exp.y}")
    n = exp.grid.n_steps
    hit = exp.Y >= barrier
    tau = np.where(hit.any(axis=0), hit.argmax(axis=0), n + 1)
    idx = np.minimum(np.arange(n + 1)[:, None], tau[None, :])
    stopped_y = np.take_along_axis(exp.Y, np.minimum(idx, n), axis=0)
    with np.errstate(over="ignore"):
        values = np.exp(stopped_y - exp.y)
    return StoppedExponent(float(barrier), tau, values)
