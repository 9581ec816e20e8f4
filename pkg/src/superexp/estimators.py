"""Monte Carlo checks of the super-exponent identities.

With ``Z``, ``A`` and ``Y`` as in :mod:`superexp.exponent`, a deterministic
generating process satisfies, for non-negative ``G``::

    E[G(Y(t)) exp(Y(t) - y)] = E[G(Z(t) / (1/y - A(t)/2)); A(t) < 2/y]

Taking ``G = 1`` gives ``E[exp(Y(t))] = e^y P{A(t) < 2/y}``, and setting
``y = 2/a`` factors the distribution function of ``A(t)`` as
``P{A(t) < a} = exp(-2/a) E[exp(Y_{2/a}(t))]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .exponent import stop_at_barrier, super_exponent
from .expr import Expr, ProcessSpec, eval_expr, eval_process, parse_expression, parse_process
from .mc import (
    RHS_STREAM,
    Estimate,
    IdentityReport,
    MCConfig,
    PathBundle,
    dt_allowance,
    mc_estimate,
    mc_estimates,
)

__all__ = [
    "BUILTIN_DETERMINISTIC",
    "BUILTIN_SPECS",
    "GSpec",
    "GNegativeError",
    "CdfCurve",
    "CurvePoint",
    "identity_report",
    "martingale_check",
    "supermartingale_curve",
    "curve_checks",
    "cdf_time_integral",
    "gk_identity_check",
    "conjecture_probe",
]

BUILTIN_DETERMINISTIC = ("0.5", "1", "2", "1+t")
BUILTIN_SPECS = BUILTIN_DETERMINISTIC + ("0", "cos(w1)")


class GNegativeError(ValueError):
    pass


@dataclass(frozen=True)
class GSpec:
    """Non-negative test function ``G(u)``.

    Text forms: ``one``, ``identity``, ``indicator:c`` (``1{u <= c}``),
    ``capped:c`` (``min(u, c)``) and ``expr:<expression in u>``.
    """

    kind: str
    c: float = math.nan
    expr: Expr | None = None
    source: str = ""

    @classmethod
    def parse(cls, text: str) -> "GSpec":
        name, _, arg = text.partition(":")
        if name in ("one", "identity") and not arg:
            return cls(name, source=text)
        if name in ("indicator", "capped"):
            try:
                c = float(arg)
            except ValueError:
                raise ValueError(f"G={text!r}: {name} needs a numeric parameter, e.g. {name}:10") from None
            return cls(name, c, source=text)
        if name == "expr" and arg:
            return cls("expr", expr=parse_expression(arg, ("u",)), source=text)
        raise ValueError(
            f"unknown G {text!r}; expected one, identity, indicator:c, capped:c or expr:<u-expression>"
        )

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "one":
            return np.ones_like(u)
        if self.kind == "identity":
            return u
        if self.kind == "indicator":
            return (u <= self.c).astype(float)
        if self.kind == "capped":
            return np.minimum(u, self.c)
        return np.broadcast_to(eval_expr(self.expr, {"u": u}), u.shape).astype(float)

    def check_nonnegative(self, lo: float, hi: float, n: int = 10_000) -> None:
        """Sample ``G`` on ``[lo, hi]``; raise on a negative value."""
        if self.kind != "expr" or not (np.isfinite(lo) and np.isfinite(hi)):
            return
        u = np.linspace(lo, hi, n)
        g = self(u)
        if (g < 0).any():
            bad = u[np.argmax(g < 0)]
            raise GNegativeError(f"G={self.source!r} is negative at u={bad:.17g}")


def _require_deterministic(spec: ProcessSpec, what: str) -> None:
    if not spec.is_deterministic:
        raise ValueError(f"{what} requires a deterministic process; {spec.source!r} depends on w")


def _checked_g(g: GSpec, u: np.ndarray, where: np.ndarray | None = None) -> np.ndarray:
    sel = u if where is None else u[where]
    finite = sel[np.isfinite(sel)]
    if finite.size:
        g.check_nonnegative(float(finite.min()), float(finite.max()))
    vals = g(u)
    neg = vals < 0 if where is None else (vals < 0) & where
    if neg.any():
        raise GNegativeError(f"G={g.source!r} produced a negative value")
    return vals


# ---------------------------------------------------------------- identity --


def identity_report(
    spec: ProcessSpec, g: GSpec, y: float, t: float, config: MCConfig
) -> IdentityReport:
    """Both sides of the G-weighted change-of-measure identity.

    The right side is estimated on an independent seed stream.
    """
    _require_deterministic(spec, "identity check")
    config.grid.index_of(t)

    def lhs(b: PathBundle):
        i = b.grid.index_of(t)
        Y = b.exponent.Y[i]
        return _checked_g(g, Y) * np.exp(Y - y)

    def rhs(b: PathBundle):
        i = b.grid.index_of(t)
        e = b.exponent
        area = e.area[i]
        event = area < 2.0 / y
        ratio = np.where(event, y * e.z[i] / (1.0 - 0.5 * y * np.where(event, area, 0.0)), 1.0)
        return np.where(event, _checked_g(g, ratio, event), 0.0)

    left = mc_estimate(lhs, spec, config, y)
    right = mc_estimate(rhs, spec, config.substream(RHS_STREAM), y)
    allowance = float(dt_allowance(lhs, spec, config, y)[0] + dt_allowance(rhs, spec, config, y)[0])
    return IdentityReport(left, right, allowance)


def martingale_check(
    spec: ProcessSpec, y: float, t: float, config: MCConfig, barrier: float | None = None
) -> IdentityReport:
    """Compare ``E[exp(Y(t) - y)]`` (optionally stopped at ``Y >= barrier``) with 1."""
    config.grid.index_of(t)

    def value(b: PathBundle):
        i = b.grid.index_of(t)
        if barrier is None:
            return np.exp(b.exponent.Y[i] - y)
        return stop_at_barrier(b.exponent, barrier).values[i]

    est = mc_estimate(value, spec, config, y)
    allowance = float(dt_allowance(value, spec, config, y)[0])
    return IdentityReport(est, Estimate.exact(1.0), allowance)


# ------------------------------------------------------------------- curve --


@dataclass(frozen=True)
class CurvePoint:
    t: float
    estimate: Estimate


def _check_strictly_increasing(spec: ProcessSpec, config: MCConfig) -> None:
    grid = config.grid
    x = eval_process(spec, grid.times[:-1], np.zeros((1, spec.d)))
    if not (np.sum(x * x, axis=-1) > 0).all():
        raise ValueError(
            f"process {spec.source!r}: integral of |X|^2 is not strictly increasing "
            "(X vanishes on some step)"
        )


def supermartingale_curve(
    spec: ProcessSpec, y: float, times: Sequence[float], config: MCConfig
) -> list[CurvePoint]:
    """``E[exp(Y(t))]`` at each requested time, from common paths."""
    _require_deterministic(spec, "supermartingale curve")
    _check_strictly_increasing(spec, config)
    for t in times:
        config.grid.index_of(t)

    def values(b: PathBundle):
        idx = [b.grid.index_of(t) for t in times]
        return np.exp(b.exponent.Y[idx]).T

    ests = mc_estimates(values, spec, config, y)
    return [CurvePoint(float(t), e) for t, e in zip(times, ests)]


def curve_checks(curve: Sequence[CurvePoint], y: float) -> dict[str, bool]:
    """Upper bound ``e^y`` (within 3 SE) and monotone decrease (within 2 SE)."""
    bound = all(p.estimate.mean - 3 * p.estimate.std_error <= math.exp(y) for p in curve)
    monotone = all(
        b.estimate.mean <= a.estimate.mean + 2 * math.hypot(a.estimate.std_error, b.estimate.std_error)
        for a, b in zip(curve, curve[1:])
    )
    return {"bounded": bound, "nonincreasing": monotone}


# --------------------------------------------------------------------- cdf --


@dataclass(frozen=True)
class CdfCurve:
    """Empirical distribution of ``A(t)`` and its exponential factorization.

    ``cdf[k]`` estimates ``P{A(t) < a_k}``; ``factor[k] = exp(2/a_k) cdf[k]``;
    ``remark[k]`` estimates ``exp(-2/a_k) E[exp(Y_{2/a_k}(t))]`` from the same
    paths.
    """

    t: float
    a: tuple[float, ...]
    cdf: tuple[Estimate, ...]
    remark: tuple[Estimate, ...]

    @property
    def factor(self) -> tuple[Estimate, ...]:
        return tuple(f.scaled(math.exp(2.0 / a)) for a, f in zip(self.a, self.cdf))

    def factor_nonincreasing(self, n_se: float = 2.0) -> bool:
        d = self.factor
        return all(
            q.mean <= p.mean + n_se * math.hypot(p.std_error, q.std_error)
            for p, q in zip(d, d[1:])
        )


def cdf_time_integral(
    spec: ProcessSpec, t: float, a_grid: Sequence[float], config: MCConfig
) -> CdfCurve:
    _require_deterministic(spec, "time-integral distribution")
    a_grid = tuple(float(a) for a in a_grid)
    if not a_grid or any(a <= 0 for a in a_grid) or any(
        q <= p for p, q in zip(a_grid, a_grid[1:])
    ):
        raise ValueError("a-grid must be positive and strictly increasing")
    config.grid.index_of(t)

    def values(b: PathBundle):
        i = b.grid.index_of(t)
        e = b.exponent
        area, z = e.area[i], e.z[i]
        cols = [(area < a).astype(float) for a in a_grid]
        cols += [
            np.exp(super_exponent(z, area, 2.0 / a) - 2.0 / a) for a in a_grid
        ]
        return np.stack(cols, axis=1)

    ests = mc_estimates(values, spec, config, 1.0)
    k = len(a_grid)
    return CdfCurve(float(t), a_grid, tuple(ests[:k]), tuple(ests[k:]))


# ---------------------------------------------------------------------- gk --


def gk_identity_check(t: float, a: float, config: MCConfig) -> IdentityReport:
    """``P{int_0^t exp(W - u/2) du <= a}`` against
    ``exp(-2/a) E[exp(2 exp(W(t) - t/2) / (a + int_0^t exp(W - u/2) du))]``.
    """
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    spec = parse_process("1", 1)
    config.grid.index_of(t)

    def lhs(b: PathBundle):
        return (b.exponent.area[b.grid.index_of(t)] <= a).astype(float)

    def rhs(b: PathBundle):
        i = b.grid.index_of(t)
        e = b.exponent
        return math.exp(-2.0 / a) * np.exp(2.0 * e.z[i] / (a + e.area[i]))

    left = mc_estimate(lhs, spec, config)
    right = mc_estimate(rhs, spec, config.substream(RHS_STREAM))
    allowance = float(dt_allowance(lhs, spec, config)[0] + dt_allowance(rhs, spec, config)[0])
    return IdentityReport(left, right, allowance)


# ------------------------------------------------------------------- probe --


def conjecture_probe(
    t: float,
    config: MCConfig,
    sizes: Sequence[int] = (1_000, 10_000, 100_000, 1_000_000),
    spec: ProcessSpec | None = None,
) -> list[tuple[int, Estimate]]:
    """Running estimates of ``E[2 Z(t) / A(t)]``; exploratory, no verdict.

    The mean is conjectured to be infinite, so no sample size can confirm
    it; the table only shows whether the estimate stabilizes.
    """
    spec = spec or parse_process("1", 1)
    _require_deterministic(spec, "conjecture probe")
    grid = config.grid
    i = grid.index_of(t)
    x = eval_process(spec, grid.times[:i], np.zeros((1, spec.d)))
    if i == 0 or not (np.sum(x * x, axis=-1) > 0).any():
        raise ValueError("time integral vanishes identically; ratio 2Z/A undefined")

    def ratio(b: PathBundle):
        e = b.exponent
        j = b.grid.index_of(t)
        return 2.0 * e.z[j] / e.area[j]

    out = []
    for n in sorted(sizes):
        est = mc_estimate(ratio, spec, replace(config, n_paths=int(n)))
        out.append((int(n), est))
    return out
