"""Chunked Monte Carlo engine with worker-count independent results.

Paths ``0..n_paths-1`` are split into contiguous chunks of fixed size.
Chunks may be evaluated concurrently, but their partial statistics are
merged strictly in chunk order, so every reported number depends only on
``(seed, n_paths, n_steps, T, chunk_size)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .exponent import ExponentPaths, eval_on_path, exponent_paths
from .expr import ProcessSpec
from .paths import DriverPaths, TimeGrid, sample_drivers
from .rng import derive_seed

__all__ = [
    "MAX_EXCLUDED_FRACTION",
    "MCConfig",
    "Estimate",
    "IdentityReport",
    "PathBundle",
    "ExclusionQuotaExceeded",
    "mc_estimate",
    "mc_estimates",
    "dt_allowance",
]

MAX_EXCLUDED_FRACTION = 1e-3

# substream ids; lhs of every identity uses the base seed
RHS_STREAM = 1
PILOT_STREAM = 2


@dataclass(frozen=True)
class MCConfig:
    T: float = 1.0
    n_steps: int = 1024
    n_paths: int = 100_000
    seed: int = 0
    workers: int = 1
    chunk_size: int = 2048
    pilot_paths: int = 0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.pilot_paths < 0:
            raise ValueError("pilot_paths must be non-negative")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.n_steps)

    def with_seed(self, seed: int) -> "MCConfig":
        return replace(self, seed=seed)

    def substream(self, stream: int) -> "MCConfig":
        return self.with_seed(derive_seed(self.seed, stream))


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_paths: int
    n_excluded: int = 0

    @property
    def ci95(self) -> tuple[float, float]:
        h = 1.96 * self.std_error
        return self.mean - h, self.mean + h

    @property
    def excluded_fraction(self) -> float:
        return self.n_excluded / self.n_paths if self.n_paths else 0.0

    @property
    def failed(self) -> bool:
        return self.excluded_fraction > MAX_EXCLUDED_FRACTION

    def scaled(self, c: float) -> "Estimate":
        return Estimate(c * self.mean, abs(c) * self.std_error, self.n_paths, self.n_excluded)

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0, 0)


@dataclass(frozen=True)
class IdentityReport:
    """Two estimates of the same quantity and their standardized discrepancy.

    Passes when ``|lhs - rhs| <= threshold * sigma + allowance``, where
    ``allowance`` absorbs time-discretization bias.
    """

    lhs: Estimate
    rhs: Estimate
    allowance: float = 0.0
    threshold: float = 3.0

    @property
    def sigma(self) -> float:
        return math.hypot(self.lhs.std_error, self.rhs.std_error)

    @property
    def z(self) -> float:
        diff = self.lhs.mean - self.rhs.mean
        if self.sigma > 0:
            return diff / self.sigma
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)

    @property
    def passed(self) -> bool:
        diff = abs(self.lhs.mean - self.rhs.mean)
        return diff <= self.threshold * self.sigma + self.allowance


class ExclusionQuotaExceeded(RuntimeError):
    def __init__(self, estimate: Estimate):
        self.estimate = estimate
        super().__init__(
            f"{estimate.n_excluded} of {estimate.n_paths} paths excluded "
            f"(> {MAX_EXCLUDED_FRACTION:.1%}); numerical failures would bias the estimate"
        )


class PathBundle:
    """Lazily computed quantities for one chunk of driver paths."""

    def __init__(self, spec: ProcessSpec, driver: DriverPaths, y: float):
        self.spec = spec
        self.driver = driver
        self.y = y
        self.failed = np.zeros(driver.n_paths, dtype=bool)

    @property
    def grid(self) -> TimeGrid:
        return self.driver.grid

    @cached_property
    def x(self) -> np.ndarray:
        return eval_on_path(self.spec, self.driver)

    @cached_property
    def exponent(self) -> ExponentPaths:
        e = exponent_paths(self.x, self.driver, self.y)
        self.mark_failed(e.failed)
        return e

    def mark_failed(self, mask: np.ndarray) -> None:
        self.failed |= mask

    def coarsen(self, factor: int) -> "PathBundle":
        return PathBundle(self.spec, self.driver.coarsen(factor), self.y)


Functional = Callable[[PathBundle], np.ndarray]


@dataclass
class _Moments:
    """Count, mean and centred sum of squares per column (Chan et al. merge)."""

    n: np.ndarray
    mean: np.ndarray
    m2: np.ndarray
    excluded: int = 0
    total: int = 0

    @classmethod
    def of(cls, values: np.ndarray, keep: np.ndarray) -> "_Moments":
        v = values[keep]
        n = np.full(values.shape[1], v.shape[0], dtype=float)
        if v.shape[0]:
            mean = np.sum(v, axis=0) / v.shape[0]
            m2 = np.sum((v - mean) ** 2, axis=0)
        else:
            mean = np.zeros(values.shape[1])
            m2 = np.zeros(values.shape[1])
        return cls(n, mean, m2, int((~keep).sum()), values.shape[0])

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        with np.errstate(invalid="ignore", divide="ignore"):
            delta = other.mean - self.mean
            frac = np.where(n > 0, other.n / np.where(n > 0, n, 1), 0.0)
            mean = self.mean + delta * frac
            m2 = self.m2 + other.m2 + delta * delta * self.n * frac
        return _Moments(
            n, mean, m2, self.excluded + other.excluded, self.total + other.total
        )

    def estimates(self) -> list[Estimate]:
        out = []
        for n, mean, m2 in zip(self.n, self.mean, self.m2):
            se = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
            out.append(Estimate(float(mean), se, self.total, self.excluded))
        return out


def _as_columns(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


def _chunks(n_paths: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk_size, n_paths)) for s in range(0, n_paths, chunk_size)]


def _map_chunks(fn, config: MCConfig, n_paths: int):
    chunks = _chunks(n_paths, config.chunk_size)
    if config.workers == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(fn, chunks))


def _reduce(parts: Sequence[_Moments]) -> _Moments:
    acc = parts[0]
    for part in parts[1:]:
        acc = acc.merge(part)
    return acc


def mc_estimates(
    functional: Functional,
    spec: ProcessSpec,
    config: MCConfig,
    y: float = 1.0,
    *,
    check_quota: bool = True,
) -> list[Estimate]:
    """One estimate per column of ``functional``'s output.

    A path is excluded when its row contains a non-finite value or a
    computation on it overflowed.
    """
    grid = config.grid

    def run_chunk(bounds):
        start, stop = bounds
        bundle = PathBundle(spec, sample_drivers(grid, spec.d, config.seed, start, stop), y)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            values = _as_columns(functional(bundle))
        keep = np.isfinite(values).all(axis=1) & ~bundle.failed
        return _Moments.of(values, keep)

    estimates = _reduce(_map_chunks(run_chunk, config, config.n_paths)).estimates()
    if check_quota:
        for est in estimates:
            if est.failed:
                raise ExclusionQuotaExceeded(est)
    return estimates


def mc_estimate(functional: Functional, spec: ProcessSpec, config: MCConfig, y: float = 1.0, **kw) -> Estimate:
    (est,) = mc_estimates(functional, spec, config, y, **kw)
    return est


def dt_allowance(
    functional: Functional, spec: ProcessSpec, config: MCConfig, y: float = 1.0
) -> np.ndarray:
    """Discretization allowance per column: ``|E_n f - E_{n/2} f|``.

    Evaluated on ``config.pilot_paths`` paths of an independent pilot
    stream, each observed at ``n_steps`` and at ``n_steps / 2`` (pairwise
    summed increments), so the difference carries little sampling noise.
    Returns zeros when no pilot is configured.
    """
    if config.pilot_paths == 0:
        return np.zeros(1)
    pilot = config.substream(PILOT_STREAM)
    grid = config.grid
    grid.coarsen(2)

    def run_chunk(bounds):
        start, stop = bounds
        fine = PathBundle(spec, sample_drivers(grid, spec.d, pilot.seed, start, stop), y)
        coarse = fine.coarsen(2)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            diff = _as_columns(functional(fine)) - _as_columns(functional(coarse))
        keep = np.isfinite(diff).all(axis=1) & ~fine.failed & ~coarse.failed
        return _Moments.of(diff, keep)

    moments = _reduce(_map_chunks(run_chunk, pilot, config.pilot_paths))
    return np.abs(moments.mean)
