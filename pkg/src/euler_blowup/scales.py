"""Scalar parameters, superexponential arithmetic and closed-form schedules.

Every quantity of the layered construction scales like C**(c * (1/(1-gamma))**n)
for various constants c.  For large C or gamma close to 1 these leave the
double range long before n does, so schedule-level quantities are available
both as plain floats (desk presets) and as :class:`LogScaled` values (any
preset).  arccosh and log-cosh are always evaluated through logarithmic
identities; the huge arguments are never exponentiated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

ALPHA_STAR = math.sqrt(4.0 / 3.0) - 1.0

_MAX_LOG = math.log(math.sqrt(1.7976931348623157e308))  # stay clear of overflow


class DegenerateScheduleError(ValueError):
    """The time schedule t_n is not strictly increasing for these parameters."""


@dataclass(frozen=True)
class LogScaled:
    """A real number stored as (sign, log of magnitude).

    Multiplication and division are exact in the log domain; addition and
    subtraction go through the stable log-sum-exp form.  ``to_float`` raises
    OverflowError instead of silently saturating.
    """

    sign: int
    log_mag: float

    @staticmethod
    def from_float(x: float) -> "LogScaled":
        if x == 0.0:
            return LogScaled(0, 0.0)
        return LogScaled(1 if x > 0 else -1, math.log(abs(x)))

    @staticmethod
    def from_log(log_mag: float, sign: int = 1) -> "LogScaled":
        if sign == 0:
            return LogScaled(0, 0.0)
        return LogScaled(1 if sign > 0 else -1, float(log_mag))

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_mag > _MAX_LOG * 2.0 - 10.0:
            raise OverflowError(
                f"log magnitude {self.log_mag:.3f} exceeds double range"
            )
        return self.sign * math.exp(self.log_mag)

    def __mul__(self, other: "LogScaled") -> "LogScaled":
        if self.sign == 0 or other.sign == 0:
            return LogScaled(0, 0.0)
        return LogScaled(self.sign * other.sign, self.log_mag + other.log_mag)

    def __truediv__(self, other: "LogScaled") -> "LogScaled":
        if other.sign == 0:
            raise ZeroDivisionError("LogScaled division by zero")
        if self.sign == 0:
            return LogScaled(0, 0.0)
        return LogScaled(self.sign * other.sign, self.log_mag - other.log_mag)

    def __add__(self, other: "LogScaled") -> "LogScaled":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log_mag >= other.log_mag else (other, self)
        d = lo.log_mag - hi.log_mag  # <= 0
        if self.sign == other.sign:
            return LogScaled(hi.sign, hi.log_mag + math.log1p(math.exp(d)))
        if d == 0.0:
            return LogScaled(0, 0.0)
        return LogScaled(hi.sign, hi.log_mag + math.log1p(-math.exp(d)))

    def __sub__(self, other: "LogScaled") -> "LogScaled":
        return self + LogScaled(-other.sign, other.log_mag)

    def __neg__(self) -> "LogScaled":
        return LogScaled(-self.sign, self.log_mag)

    def powi(self, k: int) -> "LogScaled":
        if self.sign == 0:
            return self if k > 0 else LogScaled(1, 0.0)
        sign = 1 if (self.sign == 1 or k % 2 == 0) else -1
        return LogScaled(sign, self.log_mag * k)


def log_acosh_of_exp(log_x: float) -> float:
    """arccosh(x) computed from log(x), stable for arbitrarily large x.

    Uses arccosh(x) = log(x) + log(1 + sqrt(1 - x**-2)); for log_x beyond the
    double range of x the second term is log(2) to full precision.
    """
    if log_x < 0.0:
        raise ValueError("arccosh needs x >= 1, i.e. log(x) >= 0")
    if log_x > 350.0:
        return log_x + math.log(2.0)
    r = math.sqrt(-math.expm1(-2.0 * log_x))
    return log_x + math.log1p(r)


def log_cosh(z: float) -> float:
    """log(cosh(z)) without exponentiating z: |z| + log1p(exp(-2|z|)) - log 2."""
    az = abs(z)
    return az + math.log1p(math.exp(-2.0 * az)) - math.log(2.0)


def growth_exponent(n: int, gamma: float) -> float:
    """e_n = (1/(1-gamma))**n, the depth exponent of layer n.

    The bare exponent is defined for any gamma in (0, 1); the stricter
    (1/2, 1) window is enforced where full parameter sets are built.
    """
    if n < 0:
        raise ValueError("layer index must be >= 0")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    return (1.0 / (1.0 - gamma)) ** n


@dataclass(frozen=True)
class ConstructionParams:
    """All scalar parameters of the construction plus derived constants.

    alpha_star, Lambda and k_max are fixed by the optimal-regularity choice;
    Y normalizes the time schedule so that t_1 = 0 exactly.
    """

    C: float
    gamma: float
    delta: float
    mu: float
    alpha: float
    rho_bar: float
    n_max: int
    alpha_star: float = field(default=ALPHA_STAR)
    Lambda: float = field(default=ALPHA_STAR * (1.0 + ALPHA_STAR))
    k_max: float = field(default=ALPHA_STAR)
    log_Y: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.C > 2.0:
            raise ValueError("C must be > 2")
        if not 0.5 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (1/2, 1)")
        if not self.delta > 0.0:
            raise ValueError("delta must be > 0")
        if not self.mu > 0.0:
            raise ValueError("mu must be > 0")
        if not 0.0 < self.alpha < self.alpha_star:
            raise ValueError("alpha must lie in (0, alpha_star)")
        if not self.rho_bar > 0.0:
            raise ValueError("rho_bar must be > 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if math.isnan(self.log_Y):
            object.__setattr__(self, "log_Y", self._normalize_Y())

    def _normalize_Y(self) -> float:
        # Y is fixed by demanding t_1 = 0 in the t_n formula.
        log_arg = self.k_max * self.e(1) * math.log(self.C)
        return -self.delta * self.e(0) * math.log(self.C) + math.log(
            log_acosh_of_exp(log_arg)
        )

    @property
    def Y(self) -> float:
        return math.exp(self.log_Y)

    @property
    def log_C(self) -> float:
        return math.log(self.C)

    def e(self, n: int) -> float:
        return growth_exponent(n, self.gamma)

    def identity_residuals(self) -> tuple[float, float]:
        """Residuals of 1 - Lambda - k_max = 2/3 and -1 + 2 Lambda + 3 k_max = -Lambda."""
        r1 = (1.0 - self.Lambda - self.k_max) - 2.0 / 3.0
        r2 = (-1.0 + 2.0 * self.Lambda + 3.0 * self.k_max) - (-self.Lambda)
        return r1, r2


def desk_preset(n_max: int = 3, rho_bar: float = 256.0) -> ConstructionParams:
    """Default desk-scale preset: every layer quantity fits in doubles.

    delta = 0.5 (not smaller) is what makes the time schedule strictly
    increasing at this small C and gamma; rho_bar defaults to a value above
    the contraction threshold found by the fixed-point search.
    """
    return ConstructionParams(
        C=4.0, gamma=0.6, delta=0.5, mu=0.02, alpha=0.1, rho_bar=rho_bar, n_max=n_max
    )


def schedule_only_preset(n_max: int = 6) -> ConstructionParams:
    """Proof-flavoured preset (large C, gamma near 1); log-domain only."""
    return ConstructionParams(
        C=1.0e6, gamma=0.95, delta=0.05, mu=0.01, alpha=0.1, rho_bar=8.0, n_max=n_max
    )


def lambda_n(p: ConstructionParams, n: int) -> LogScaled:
    """Spatial cutoff dilation lambda_n = C**(-Lambda e_n) <= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return LogScaled.from_log(-p.Lambda * p.e(n) * p.log_C)


def m_n(p: ConstructionParams, n: int) -> LogScaled:
    """Layer mass scale M_n = B_n(1) a_n(1) b_n(1) = Y C**(delta e_n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return LogScaled.from_log(p.log_Y + p.delta * p.e(n) * p.log_C)


def ab_endpoint(p: ConstructionParams, n: int) -> tuple[LogScaled, LogScaled]:
    """Terminal frame factors a_n(1) = b_n(1) = C**e_n (k_n(1) = 0)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = LogScaled.from_log(p.e(n) * p.log_C)
    return v, v


def _log_acosh_arg(p: ConstructionParams, n: int) -> float:
    """A_n = arccosh(C**(k_max e_n)), the half-swing angle budget of layer n."""
    return log_acosh_of_exp(p.k_max * p.e(n) * p.log_C)


def log_one_minus_time_scale(p: ConstructionParams, n: int) -> float:
    """log(1 - t_n); exact 0.0 for n = 1 by the normalization of Y.

    This is the representation that survives superexponential parameters,
    where t_n itself saturates to 1.0 in doubles.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    # same grouping as the Y normalization so that n = 1 gives exactly 0.0
    term = -p.delta * p.e(n - 1) * math.log(p.C) + math.log(_log_acosh_arg(p, n))
    return term - p.log_Y


def time_scale(p: ConstructionParams, n: int) -> float:
    """Epoch start t_n; t_1 = 0 exactly by the normalization of Y."""
    return 1.0 - math.exp(log_one_minus_time_scale(p, n))


def schedule(p: ConstructionParams, n_top: int | None = None) -> list[float]:
    """[t_1, ..., t_{n_top}] with monotonicity enforced.

    Monotonicity is checked on log(1 - t_n) (strictly decreasing), which is
    exact even when the float t_n saturate to 1.  Raises
    DegenerateScheduleError when t_{n+1} <= t_n, which happens for parameter
    choices whose inter-epoch contraction C**(-delta e_n (g-1)) loses to the
    arccosh growth (the degenerate desk-scale regime).
    """
    if n_top is None:
        n_top = p.n_max + 1
    lom = [log_one_minus_time_scale(p, n) for n in range(1, n_top + 1)]
    for i in range(1, len(lom)):
        if lom[i] >= lom[i - 1]:
            raise DegenerateScheduleError(
                f"t_{i + 1} <= t_{i} (log(1-t): {lom[i]:.6g} >= {lom[i - 1]:.6g}); "
                "schedule degenerate for these parameters"
            )
    return [1.0 - math.exp(v) for v in lom]


def kbar_n(p: ConstructionParams, n: int, that: float) -> float:
    """Ideal squeeze profile k_bar_n at rescaled epoch time that in [0, 1].

    k_bar_n(t_n + (1-t_n) that) = k_max + log(sech(A_n (1-2 that)))/(log(C) e_n)
    with A_n = arccosh(C**(k_max e_n)); log cosh is evaluated through the
    stable identity so the arccosh argument is never exponentiated.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    A = _log_acosh_arg(p, n)
    z = A * (1.0 - 2.0 * that)
    return p.k_max - log_cosh(z) / (p.log_C * p.e(n))


def kbar_tent(p: ConstructionParams, that: float) -> float:
    """Limiting tent profile k_max (1 - |1 - 2 that|)."""
    return p.k_max * (1.0 - abs(1.0 - 2.0 * that))


def kbar_deviation_bound(
    p: ConstructionParams, n: int, that: float
) -> tuple[float, float]:
    """(pointwise, uniform) upper bounds on k_bar_n - tent at rescaled time that.

    pointwise: [2 ln 2 min(that, 1-that) + C**(-2|1-2 that| k_max e_n)] / (ln C e_n)
    uniform:   (1 + ln 2)/ln C * (1-gamma)**n
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    en = p.e(n)
    tail_log = -2.0 * abs(1.0 - 2.0 * that) * p.k_max * en * p.log_C
    tail = math.exp(tail_log) if tail_log > -745.0 else 0.0
    pointwise = (2.0 * math.log(2.0) * min(that, 1.0 - that) + tail) / (p.log_C * en)
    uniform = (1.0 + math.log(2.0)) / p.log_C * (1.0 - p.gamma) ** n
    return pointwise, uniform


def pendulum_profile(p: ConstructionParams, n: int, that: float) -> float:
    """Ideal center swing angle a_{n-1}(1) Xi_0^(n) at rescaled time that.

    The closed-form inverted half-pendulum trajectory:
    sin(angle) = sech(A_n (1 - 2 that)), A_n = arccosh(C**(k_max e_n)),
    which starts at arcsin(C**(-k_max e_n)), peaks at pi/2 for that = 1/2 and
    is symmetric about the midpoint.  Returns the angle in (0, pi/2].
    """
    if n < 2:
        raise ValueError("the pendulum drive needs a previous layer (n >= 2)")
    A = _log_acosh_arg(p, n)
    z = A * (1.0 - 2.0 * that)
    log_sin = -log_cosh(z)
    return math.asin(math.exp(log_sin))
