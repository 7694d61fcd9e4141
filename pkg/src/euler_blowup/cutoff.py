"""Smooth compactly supported cutoffs and activity bumps.

The building blocks are the flat bump Psi(x) = exp(-1/x) (x > 0, else 0) and
the smoothstep Theta = Psi(x) / (Psi(x) + Psi(1-x)), which is 0 for x <= 0,
1 for x >= 1 and C-infinity everywhere.  Everything here is evaluated in
closed form, derivatives included; no tables or interpolation, so the
finite-difference refinement checks of the field modules converge at their
nominal order all the way down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LOG_TINY = 700.0


def _psi(x: np.ndarray) -> np.ndarray:
    """exp(-1/x) for x > 0, 0 otherwise (vectorized, overflow-safe)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 1.0 / _LOG_TINY
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _psi_derivs(x: np.ndarray) -> tuple[np.ndarray, ...]:
    """(Psi, Psi', Psi'', Psi''') of the flat bump exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    p = _psi(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), 0.0)
    i2 = inv * inv
    d1 = p * i2
    d2 = p * (i2 * i2 - 2.0 * i2 * inv)
    d3 = p * (i2 * i2 * i2 - 6.0 * i2 * i2 * inv + 6.0 * i2 * i2)
    # d3 = Psi * (x^-6 - 6 x^-5 + 6 x^-4)
    d3 = p * (inv**6 - 6.0 * inv**5 + 6.0 * inv**4)
    return p, d1, d2, d3


def smoothstep_derivs(y: np.ndarray) -> tuple[np.ndarray, ...]:
    """(Theta, Theta', Theta'', Theta''') of the C-infinity step on [0, 1]."""
    y = np.asarray(y, dtype=float)
    u, u1, u2, u3 = _psi_derivs(y)
    v, w1, w2, w3 = _psi_derivs(1.0 - y)
    v1, v2, v3 = -w1, w2, -w3  # chain rule through 1 - y
    s = u + v
    s1 = u1 + v1
    s2 = u2 + v2
    s3 = u3 + v3
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = (y > 0.0) & (y < 1.0)
        s_safe = np.where(inside, s, 1.0)
        th = np.where(y >= 1.0, 1.0, np.where(y <= 0.0, 0.0, u / s_safe))
        n = u1 * v - u * v1
        n1 = u2 * v - u * v2
        n2 = u3 * v + u2 * v1 - u1 * v2 - u * v3
        th1 = np.where(inside, n / s_safe**2, 0.0)
        th2 = np.where(inside, n1 / s_safe**2 - 2.0 * n * s1 / s_safe**3, 0.0)
        th3 = np.where(
            inside,
            n2 / s_safe**2
            - 4.0 * n1 * s1 / s_safe**3
            - 2.0 * n * s2 / s_safe**3
            + 6.0 * n * s1**2 / s_safe**4,
            0.0,
        )
    return th, th1, th2, th3


@dataclass(frozen=True)
class Cutoff1D:
    """Even C-infinity cutoff: 1 on [-plateau, plateau], 0 beyond support.

    Defaults match the construction's spatial cutoff (plateau 8 pi, support
    16 pi).  Derivative evaluators through order 3 are closed-form.
    """

    plateau: float = 8.0 * math.pi
    support: float = 16.0 * math.pi

    def __post_init__(self):
        if not 0.0 < self.plateau < self.support:
            raise ValueError("need 0 < plateau < support")

    @property
    def _w(self) -> float:
        return self.support - self.plateau

    def _arg(self, x: np.ndarray) -> np.ndarray:
        return (self.support - np.abs(x)) / self._w

    def __call__(self, x: np.ndarray) -> np.ndarray:
        th, _, _, _ = smoothstep_derivs(self._arg(x))
        return th

    def derivs(self, x: np.ndarray) -> tuple[np.ndarray, ...]:
        """(phi, phi', phi'', phi''') at x (array in, arrays out)."""
        x = np.asarray(x, dtype=float)
        th, th1, th2, th3 = smoothstep_derivs(self._arg(x))
        sgn = np.sign(x)
        c = -sgn / self._w
        return th, th1 * c, th2 * c * c, th3 * c * c * c

    def deriv_bounds(self, samples: int = 20001) -> tuple[float, float]:
        """(sup |phi'|, integral of |phi''| over one transition side)."""
        xs = np.linspace(self.plateau, self.support, samples)
        _, d1, d2, _ = self.derivs(xs)
        sup1 = float(np.max(np.abs(d1)))
        trapezoid = getattr(np, "trapezoid", np.trapz)
        int2 = float(trapezoid(np.abs(d2), xs))
        return sup1, int2


_BUMP_PEAK = math.exp(4.0)  # 1 / bump(1/2) before normalization


def unit_bump(s: np.ndarray) -> np.ndarray:
    """exp(-1/(s(1-s))) normalized to peak 1 at s = 1/2; zero outside (0, 1)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = np.exp(4.0 - 1.0 / (si * (1.0 - si)))
    return out


def unit_bump_deriv(s: np.ndarray) -> np.ndarray:
    """d/ds of unit_bump."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    g = si * (1.0 - si)
    out[inside] = np.exp(4.0 - 1.0 / g) * (1.0 - 2.0 * si) / (g * g)
    return out


@dataclass(frozen=True)
class ActivityBump:
    """Smooth [0, 1]-valued switch supported on one epoch (t_n, t_np1)."""

    t_n: float
    t_np1: float

    def __post_init__(self):
        if not self.t_n < self.t_np1:
            raise ValueError("need t_n < t_np1")

    def _s(self, t: np.ndarray) -> np.ndarray:
        return (np.asarray(t, dtype=float) - self.t_n) / (self.t_np1 - self.t_n)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return unit_bump(self._s(t))

    def deriv(self, t: np.ndarray) -> np.ndarray:
        return unit_bump_deriv(self._s(t)) / (self.t_np1 - self.t_n)
