"""Uniform time grids and reproducible d-dimensional Brownian driver paths.

Arrays are stored time-major, ``(n_steps [+1], n_paths, d)``, so that a
single time slice is contiguous.  Every path is a pure function of
``(seed, path_index)`` through :mod:`superexp.rng`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rng import normals

__all__ = ["TimeGrid", "DriverPaths", "make_grid", "sample_driver", "sample_drivers"]


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.T
        return t

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; ``t`` must lie on the grid."""
        if not 0 <= t <= self.T * (1 + 1e-12):
            raise ValueError(f"t={t} outside [0, T={self.T}]")
        i = round(t / self.dt)
        if abs(i * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"t={t} is not a grid point (dt={self.dt})")
        return int(i)

    def coarsen(self, factor: int) -> "TimeGrid":
        if self.n_steps % factor:
            raise ValueError(f"{self.n_steps} steps not divisible by {factor}")
        return TimeGrid(self.T, self.n_steps // factor)


def make_grid(T: float, n_steps: int) -> TimeGrid:
    return TimeGrid(float(T), int(n_steps))


@dataclass(frozen=True)
class DriverPaths:
    """A batch of Brownian paths with contiguous path indices.

    ``increments[i, k]`` is ``W(t_{i+1}) - W(t_i)`` for path ``start + k``.
    A single path is a batch of one.
    """

    grid: TimeGrid
    seed: int
    start: int
    increments: np.ndarray

    @property
    def d(self) -> int:
        return self.increments.shape[2]

    @property
    def n_paths(self) -> int:
        return self.increments.shape[1]

    @property
    def path_indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.n_paths)

    @cached_property
    def values(self) -> np.ndarray:
        w = np.empty((self.grid.n_steps + 1,) + self.increments.shape[1:])
        w[0] = 0.0
        for i in range(self.grid.n_steps):
            np.add(w[i], self.increments[i], out=w[i + 1])
        return w

    def path(self, k: int) -> "DriverPaths":
        """The single path at batch position ``k``."""
        return DriverPaths(
            self.grid, self.seed, self.start + k, self.increments[:, k : k + 1].copy()
        )

    def coarsen(self, factor: int) -> "DriverPaths":
        """Same Brownian paths observed on a grid ``factor`` times coarser."""
        grid = self.grid.coarsen(factor)
        inc = self.increments.reshape(grid.n_steps, factor, *self.increments.shape[1:])
        return DriverPaths(grid, self.seed, self.start, inc.sum(axis=1))


def sample_drivers(grid: TimeGrid, d: int, seed: int, start: int, stop: int) -> DriverPaths:
    """Paths ``start..stop-1`` of the stream keyed by ``seed``."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    inc = normals(seed, start, stop, grid.n_steps, d, math.sqrt(grid.dt))
    return DriverPaths(grid, seed, start, inc)


def sample_driver(grid: TimeGrid, d: int, seed: int, path_index: int) -> DriverPaths:
    return sample_drivers(grid, d, seed, path_index, path_index + 1)
