import math

import numpy as np
import pytest

from euler_blowup.cutoff import ActivityBump, Cutoff1D, smoothstep_derivs, unit_bump


@pytest.fixture(scope="module")
def phi():
    return Cutoff1D()


def test_plateau_and_support(phi):
    xs = np.linspace(-8 * math.pi, 8 * math.pi, 101)
    assert np.all(phi(xs) == 1.0)
    far = np.array([16 * math.pi, 20 * math.pi, -17 * math.pi, 1e3])
    assert np.all(phi(far) == 0.0)
    mid = np.linspace(8.5 * math.pi, 15.5 * math.pi, 101)
    v = phi(mid)
    assert np.all((v > 0.0) & (v < 1.0))


def test_evenness(phi):
    xs = np.linspace(0.1, 17 * math.pi, 301)
    assert np.array_equal(phi(xs), phi(-xs))
    _, d1p, d2p, d3p = phi.derivs(xs)
    _, d1m, d2m, d3m = phi.derivs(-xs)
    assert np.array_equal(d1p, -d1m)
    assert np.array_equal(d2p, d2m)
    assert np.array_equal(d3p, -d3m)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_match_finite_differences(phi, order):
    # central differences of the analytic order-(k-1) evaluator vs order k
    rng = np.random.default_rng(7)
    xs = np.sort(rng.uniform(8.2 * math.pi, 15.8 * math.pi, 40))
    errs = []
    for h in [1e-3, 5e-4, 2.5e-4]:
        d = phi.derivs(xs)
        dp = phi.derivs(xs + h)
        dm = phi.derivs(xs - h)
        fd = (dp[order - 1] - dm[order - 1]) / (2 * h)
        errs.append(np.max(np.abs(fd - d[order])))
    assert errs[2] < errs[0] / 10.0  # O(h^2) drop over two halvings


def test_smoothstep_endpoints():
    th, d1, d2, d3 = smoothstep_derivs(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    assert list(th) == [0.0, 0.0, 0.5, 1.0, 1.0]
    assert d1[0] == d1[1] == d1[3] == d1[4] == 0.0
    assert d1[2] > 0.0
    assert np.all(np.isfinite(d2)) and np.all(np.isfinite(d3))


def test_unit_bump_range_and_peak():
    s = np.linspace(-0.5, 1.5, 401)
    v = unit_bump(s)
    assert np.all((v >= 0.0) & (v <= 1.0))
    assert unit_bump(np.array([0.5]))[0] == 1.0
    assert np.all(unit_bump(np.array([0.0, 1.0, -3.0, 7.0])) == 0.0)


def test_activity_bump_support_and_deriv():
    b = ActivityBump(0.2, 0.6)
    assert np.all(b(np.array([0.0, 0.2, 0.6, 0.9])) == 0.0)
    assert b(np.array([0.4]))[0] == 1.0
    ts = np.linspace(0.25, 0.55, 20)
    h = 1e-6
    fd = (b(ts + h) - b(ts - h)) / (2 * h)
    assert np.max(np.abs(fd - b.deriv(ts))) < 1e-6


def test_small_plateau_cutoff_for_potentials():
    c = Cutoff1D(plateau=1.0, support=2.0)
    assert c(np.array([0.0, 1.0, -0.5]))[0] == 1.0
    assert np.all(c(np.array([2.0, 2.5])) == 0.0)
    sup1, int2 = c.deriv_bounds()
    assert 1.0 < sup1 < 3.0
    assert 2.0 < int2 < 8.0
