import math

import mpmath as mp
import pytest
from hypothesis import given, strategies as st

from euler_blowup.scales import (
    ALPHA_STAR,
    ConstructionParams,
    DegenerateScheduleError,
    LogScaled,
    ab_endpoint,
    desk_preset,
    growth_exponent,
    kbar_deviation_bound,
    kbar_n,
    kbar_tent,
    lambda_n,
    log_acosh_of_exp,
    m_n,
    pendulum_profile,
    schedule,
    schedule_only_preset,
    time_scale,
)


@pytest.fixture(scope="module")
def desk():
    return desk_preset()


def test_parameter_identities(desk):
    r1, r2 = desk.identity_residuals()
    assert abs(r1) < 1e-12
    assert abs(r2) < 1e-12
    assert abs(desk.Lambda - ALPHA_STAR * (1 + ALPHA_STAR)) == 0.0
    assert desk.k_max == ALPHA_STAR
    assert 0 < desk.alpha < ALPHA_STAR


def test_growth_exponent_values():
    assert growth_exponent(0, 0.6) == 1.0
    assert abs(growth_exponent(2, 0.6) - 6.25) < 1e-14
    assert growth_exponent(3, 0.5) == 8.0
    es = [growth_exponent(n, 0.7) for n in range(8)]
    assert all(b > a for a, b in zip(es, es[1:]))


def test_lambda_n_closed_form_and_monotonicity(desk):
    # high-precision closed-form oracle
    with mp.workdps(60):
        lam_ref = -mp.mpf(desk.Lambda) * mp.mpf(2.5) * mp.log(4)
    l1 = lambda_n(desk, 1)
    assert l1.sign == 1
    assert abs(l1.log_mag - float(lam_ref)) < 1e-13
    mags = [lambda_n(desk, n).log_mag for n in range(1, 7)]
    assert all(b < a for a, b in zip(mags, mags[1:]))
    assert all(m < 0 for m in mags)  # lambda_n <= 1
    # C -> infinity at fixed n drives lambda to 0
    big = ConstructionParams(C=1e9, gamma=0.6, delta=0.5, mu=0.02, alpha=0.1,
                             rho_bar=1.0, n_max=1)
    assert lambda_n(big, 2).log_mag < lambda_n(desk, 2).log_mag


def test_time_scale_normalization_and_monotonicity(desk):
    assert time_scale(desk, 1) == 0.0
    ts = schedule(desk)
    assert ts[0] == 0.0
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert ts[-1] < 1.0


def test_time_scale_dual_path_oracle(desk):
    # direct float evaluation vs the log-domain path, n = 2
    direct = 1.0 - (
        desk.C ** (-desk.delta * desk.e(1)) / desk.Y
    ) * math.acosh(desk.C ** (desk.k_max * desk.e(2)))
    assert abs(time_scale(desk, 2) - direct) < 1e-12


def test_degenerate_schedule_signalled():
    p = ConstructionParams(C=4.0, gamma=0.6, delta=0.05, mu=0.02, alpha=0.1,
                           rho_bar=1.0, n_max=3)
    with pytest.raises(DegenerateScheduleError):
        schedule(p)


def test_schedule_only_preset_monotone():
    from euler_blowup.scales import log_one_minus_time_scale

    p = schedule_only_preset()
    ts = schedule(p)  # raises if not monotone in the log domain
    assert ts[0] == 0.0
    lom = [log_one_minus_time_scale(p, n) for n in range(1, p.n_max + 2)]
    assert all(b < a for a, b in zip(lom, lom[1:]))
    # the same preset overflows any float path: quantities stay in log domain
    assert m_n(p, p.n_max).log_mag > 1e3
    with pytest.raises(OverflowError):
        m_n(p, p.n_max).to_float()


def test_arccosh_log_identity():
    for x in [1.5, 4.0, 1e3, 1e15]:
        assert abs(log_acosh_of_exp(math.log(x)) - math.acosh(x)) < 1e-12 * math.acosh(x)
    assert log_acosh_of_exp(0.0) == 0.0
    # arccosh(x) <= log(2x) for x >= 1
    for lx in [0.0, 0.3, 2.0, 50.0, 1e4]:
        assert log_acosh_of_exp(lx) <= lx + math.log(2.0) + 1e-15


def test_m_n_and_ab_endpoint(desk):
    for n in range(1, desk.n_max + 1):
        m = m_n(desk, n)
        assert abs(m.log_mag - (desk.log_Y + desk.delta * desk.e(n) * desk.log_C)) < 1e-13
        a, b = ab_endpoint(desk, n)
        assert a.log_mag == b.log_mag
        assert abs(a.log_mag - desk.e(n) * desk.log_C) < 1e-13
    # delta -> 0 sends M_n to Y
    small = ConstructionParams(C=40.0, gamma=0.6, delta=1e-12, mu=0.02, alpha=0.1,
                               rho_bar=1.0, n_max=1)
    assert abs(m_n(small, 3).log_mag - small.log_Y) < 1e-9
    mags = [m_n(desk, n).log_mag for n in range(1, 6)]
    assert all(b > a for a, b in zip(mags, mags[1:]))


def test_kbar_endpoints_and_peak(desk):
    for n in range(1, desk.n_max + 2):
        assert abs(kbar_n(desk, n, 0.0)) < 1e-10
        assert abs(kbar_n(desk, n, 1.0)) < 1e-10
        assert abs(kbar_n(desk, n, 0.5) - desk.k_max) < 1e-10
        # evenness about the midpoint
        for th in [0.1, 0.25, 0.4]:
            assert abs(kbar_n(desk, n, th) - kbar_n(desk, n, 1.0 - th)) < 1e-14


def test_kbar_monotone_in_n_and_bounds(desk):
    grid = [i / 1000.0 for i in range(1001)]
    for n in range(1, desk.n_max + 1):
        kn = [kbar_n(desk, n, th) for th in grid]
        knp = [kbar_n(desk, n + 1, th) for th in grid]
        assert all(0.0 <= v <= desk.k_max + 1e-15 for v in kn)
        assert all(b <= a + 1e-14 for a, b in zip(kn, knp))


def test_kbar_deviation_bound_pointwise(desk):
    grid = [i / 1000.0 for i in range(1001)]
    for n in range(1, desk.n_max + 2):
        for th in grid:
            dev = kbar_n(desk, n, th) - kbar_tent(desk, th)
            pw, uni = kbar_deviation_bound(desk, n, th)
            assert dev >= -1e-14  # monotone convergence from above
            assert dev <= pw + 1e-14
            assert dev <= uni + 1e-14
    # high-precision spot check of the n=2, that=0.25 case
    with mp.workdps(60):
        A = mp.acosh(mp.mpf(4) ** (mp.mpf(desk.k_max) * mp.mpf(6.25)))
        kb = desk.k_max + mp.log(1 / mp.cosh(A * mp.mpf(0.5))) / (mp.log(4) * mp.mpf(6.25))
        dev_ref = float(kb - desk.k_max * mp.mpf(0.5))
    pw, _ = kbar_deviation_bound(desk, 2, 0.25)
    assert dev_ref <= pw
    assert abs((kbar_n(desk, 2, 0.25) - kbar_tent(desk, 0.25)) - dev_ref) < 1e-14
    # uniform bound decreases in n
    unis = [kbar_deviation_bound(desk, n, 0.3)[1] for n in range(1, 6)]
    assert all(b < a for a, b in zip(unis, unis[1:]))


def test_pendulum_profile(desk):
    for n in [2, 3]:
        assert abs(pendulum_profile(desk, n, 0.5) - math.pi / 2) < 1e-12
        start = pendulum_profile(desk, n, 0.0)
        assert abs(start - math.asin(desk.C ** (-desk.k_max * desk.e(n)))) < 1e-12
        for th in [0.05, 0.2, 0.45]:
            assert abs(pendulum_profile(desk, n, th)
                       - pendulum_profile(desk, n, 1.0 - th)) < 1e-13
        vals = [pendulum_profile(desk, n, th) for th in [0.0, 0.1, 0.3, 0.5]]
        assert all(b > a for a, b in zip(vals, vals[1:]))


finite = st.floats(min_value=-1e6, max_value=1e6,
                   allow_nan=False, allow_infinity=False)
moderate = st.floats(min_value=1e-6, max_value=1e6,
                     allow_nan=False, allow_infinity=False).map(abs)


@given(moderate, moderate, st.sampled_from([-1, 1]), st.sampled_from([-1, 1]))
def test_logscaled_multiply_divide_roundtrip(ax, ay, sx, sy):
    # 1e-14 relative round-trip identity on the moderate range; for wild
    # log magnitudes (superexponential regime) the identity degrades only
    # like one ulp of the intermediate log, checked below.
    x, y = sx * ax, sy * ay
    lx, ly = LogScaled.from_float(x), LogScaled.from_float(y)
    back = (lx * ly) / ly
    assert back.sign == lx.sign
    assert abs(back.to_float() - x) <= 1e-14 * abs(x)


@given(st.floats(min_value=-1e5, max_value=1e5, allow_nan=False),
       st.floats(min_value=-1e5, max_value=1e5, allow_nan=False))
def test_logscaled_roundtrip_wild_logs(lx, ly):
    a, b = LogScaled.from_log(lx), LogScaled.from_log(ly)
    back = (a * b) / b
    assert abs(back.log_mag - lx) <= 4e-16 * max(1.0, abs(lx) + abs(ly))


@given(finite, finite)
def test_logscaled_add_sub_matches_float(x, y):
    lx, ly = LogScaled.from_float(x), LogScaled.from_float(y)
    s = (lx + ly).to_float()
    d = (lx - ly).to_float()
    assert abs(s - (x + y)) <= 1e-12 * max(1.0, abs(x), abs(y))
    assert abs(d - (x - y)) <= 1e-12 * max(1.0, abs(x), abs(y))


def test_logscaled_overflow_signalled():
    big = LogScaled.from_log(800.0)
    with pytest.raises(OverflowError):
        big.to_float()
    assert (big / big).to_float() == 1.0


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        ConstructionParams(C=4, gamma=1.5, delta=0.5, mu=0.02, alpha=0.1,
                           rho_bar=1.0, n_max=3)
    with pytest.raises(ValueError):
        ConstructionParams(C=4, gamma=0.6, delta=0.5, mu=0.02, alpha=0.2,
                           rho_bar=1.0, n_max=3)  # alpha > alpha_star
    with pytest.raises(ValueError):
        ConstructionParams(C=1.5, gamma=0.6, delta=0.5, mu=0.02, alpha=0.1,
                           rho_bar=1.0, n_max=3)
