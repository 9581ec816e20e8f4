import math

import numpy as np
import pytest

from superexp.estimators import (
    GNegativeError,
    GSpec,
    cdf_time_integral,
    conjecture_probe,
    curve_checks,
    gk_identity_check,
    identity_report,
    martingale_check,
    supermartingale_curve,
)
from superexp.expr import parse_process
from superexp.mc import (
    Estimate,
    ExclusionQuotaExceeded,
    IdentityReport,
    MCConfig,
    _Moments,
    mc_estimate,
    mc_estimates,
)

SMALL = MCConfig(n_steps=64, n_paths=5000, seed=1, chunk_size=512)
ONE = parse_process("1", 1)
ZERO = parse_process("0", 1)


def test_constant_functional():
    e = mc_estimate(lambda b: np.ones(b.driver.n_paths), ONE, SMALL)
    assert (e.mean, e.std_error, e.n_paths, e.n_excluded) == (1.0, 0.0, 5000, 0)


def test_zero_process_martingale_is_exact():
    e = mc_estimate(lambda b: np.exp(b.exponent.Y[-1] - 1.0), ZERO, SMALL)
    assert e.mean == 1.0 and e.std_error == 0.0


def test_chunked_moments_match_numpy():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((1000, 2)) * [1.0, 5.0] + [3.0, -1.0]
    keep = np.ones(1000, dtype=bool)
    parts = [_Moments.of(v[s : s + 97], keep[s : s + 97]) for s in range(0, 1000, 97)]
    acc = parts[0]
    for p in parts[1:]:
        acc = acc.merge(p)
    ests = acc.estimates()
    for j in range(2):
        assert ests[j].mean == pytest.approx(v[:, j].mean(), rel=1e-13)
        assert ests[j].std_error == pytest.approx(v[:, j].std(ddof=1) / math.sqrt(1000), rel=1e-12)


def test_worker_count_never_changes_results():
    f = lambda b: np.exp(b.exponent.Y[[16, 64]] - 1.0).T
    ref = mc_estimates(f, parse_process("cos(w1)", 1), SMALL)
    for workers in (2, 3, 8):
        cfg = MCConfig(n_steps=64, n_paths=5000, seed=1, chunk_size=512, workers=workers)
        assert mc_estimates(f, parse_process("cos(w1)", 1), cfg) == ref


def test_exclusion_quota():
    def some_nan(b):
        v = np.ones(b.driver.n_paths)
        v[b.driver.path_indices % 100 == 0] = np.nan
        return v

    with pytest.raises(ExclusionQuotaExceeded):
        mc_estimate(some_nan, ONE, SMALL)
    e = mc_estimate(some_nan, ONE, SMALL, check_quota=False)
    assert e.n_excluded == 50 and e.failed and e.mean == 1.0


def test_estimate_and_report_fields():
    e = Estimate(2.0, 0.5, 100)
    assert e.ci95 == (2.0 - 0.98, 2.0 + 0.98)
    r = IdentityReport(Estimate(1.0, 0.3, 10), Estimate(0.0, 0.4, 10))
    assert r.sigma == pytest.approx(0.5) and r.z == pytest.approx(2.0) and r.passed
    assert not IdentityReport(Estimate(1.0, 0.0, 1), Estimate.exact(0.0)).passed


def test_gspec_parsing():
    u = np.array([0.5, 2.0, 20.0])
    assert GSpec.parse("one")(u).tolist() == [1, 1, 1]
    assert GSpec.parse("identity")(u).tolist() == u.tolist()
    assert GSpec.parse("indicator:2")(u).tolist() == [1, 1, 0]
    assert GSpec.parse("capped:10")(u).tolist() == [0.5, 2, 10]
    assert GSpec.parse("expr:u^2")(u).tolist() == [0.25, 4, 400]
    for bad in ("two", "capped:x", "expr:", "one:1"):
        with pytest.raises(ValueError):
            GSpec.parse(bad)


@pytest.mark.parametrize("g", ["one", "identity", "capped:10", "expr:1+u"])
def test_identity_trivial_for_zero_process(g):
    r = identity_report(ZERO, GSpec.parse(g), 0.7, 1.0, SMALL)
    gy = float(GSpec.parse(g)(np.array(0.7)))
    assert r.lhs.mean == pytest.approx(gy, rel=1e-15) and r.rhs.mean == pytest.approx(gy, rel=1e-15)
    assert r.z == 0.0 and r.passed


def test_identity_guards():
    with pytest.raises(ValueError, match="deterministic"):
        identity_report(parse_process("cos(w1)", 1), GSpec.parse("one"), 1.0, 1.0, SMALL)
    with pytest.raises(GNegativeError):
        identity_report(ONE, GSpec.parse("expr:u-1"), 1.0, 1.0, SMALL)
    with pytest.raises(ValueError):
        identity_report(ONE, GSpec.parse("one"), 1.0, 1.5, SMALL)


def test_identity_small_scale():
    cfg = MCConfig(n_steps=128, n_paths=20_000, seed=5, pilot_paths=2000)
    for g in ("one", "capped:10", "indicator:1"):
        r = identity_report(ONE, GSpec.parse(g), 1.0, 0.5, cfg)
        assert r.passed, (g, r.z)


def test_curve_rejects_vanishing_process():
    with pytest.raises(ValueError, match="not strictly increasing"):
        supermartingale_curve(ZERO, 1.0, [0.5, 1.0], SMALL)
    with pytest.raises(ValueError, match="not strictly increasing"):
        supermartingale_curve(parse_process("1-2*t", 1), 1.0, [0.5, 1.0], SMALL)


def test_curve_small():
    curve = supermartingale_curve(parse_process("2", 1), 1.0, [0.25, 0.5, 1.0], SMALL)
    assert [p.t for p in curve] == [0.25, 0.5, 1.0]
    assert curve_checks(curve, 1.0) == {"bounded": True, "nonincreasing": True}


def test_cdf_zero_process():
    c = cdf_time_integral(ZERO, 1.0, [0.5, 1.0, 2.0], SMALL)
    assert [f.mean for f in c.cdf] == [1.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        cdf_time_integral(ONE, 1.0, [2.0, 1.0], SMALL)


def test_cdf_is_monotone():
    c = cdf_time_integral(ONE, 1.0, [0.5, 1.0, 2.0, 4.0, 8.0], SMALL)
    means = [f.mean for f in c.cdf]
    assert means == sorted(means)
    assert c.factor[0].mean == pytest.approx(math.exp(4.0) * means[0])


def test_gk_large_threshold():
    r = gk_identity_check(1.0, 1e3, SMALL)
    assert r.lhs.mean == 1.0
    assert abs(r.z) <= 3 and r.allowance == 0


def test_probe():
    table = conjecture_probe(1.0, SMALL, sizes=(100, 1000))
    assert [n for n, _ in table] == [100, 1000]
    with pytest.raises(ValueError):
        conjecture_probe(1.0, SMALL, sizes=(100,), spec=ZERO)


def test_martingale_check_zero_is_exact():
    r = martingale_check(ZERO, 1.0, 1.0, SMALL, barrier=2.0)
    assert r.lhs.mean == 1.0 and r.passed
