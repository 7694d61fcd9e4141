"""Closed-form evaluation of the constructed fields and their derivatives.

Each layer's stream function in its moving frame is B(t) S(u, v) with
S(u, v) = [phi(lam u) sin u][phi(lam v) sin v] and (u, v) the moving
coordinates u = a(t)(x1 - c1(t)), v = b(t) x2.  Everything else is derived
from S analytically: velocity, vorticity, velocity gradient, density and its
gradient, and the exact time derivatives at fixed lab points (frame motion
included via the chain rule, trajectory derivatives from the ODE right-hand
sides, never from finite differences in t).

Sign conventions, fixed once and used everywhere:
    grad_perp f = (-df/dx2, +df/dx1),     curl v = d(v2)/dx1 - d(v1)/dx2.
The layer velocity is u = (+dpsi/dx2, -dpsi/dx1) = -grad_perp(psi), so the
vorticity curl u equals -Delta psi; this is the unique assignment under
which the displayed layer formulas are mutually consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cutoff import Cutoff1D
from .dynamics import LayerState, TrajPoint
from .scales import ConstructionParams


def _trig(kind: str, x: np.ndarray) -> tuple[np.ndarray, ...]:
    s, c = np.sin(x), np.cos(x)
    if kind == "sin":
        return s, c, -s, -c
    return c, -s, -c, s


class _Sep:
    """phi(lam x) * trig(x) and its first three derivatives."""

    __slots__ = ("f", "d1", "d2", "d3")

    def __init__(self, cut: Cutoff1D, lam: float, kind: str, x: np.ndarray):
        p0, p1, p2, p3 = cut.derivs(lam * x)
        t0, t1, t2, t3 = _trig(kind, x)
        l2, l3 = lam * lam, lam * lam * lam
        self.f = p0 * t0
        self.d1 = lam * p1 * t0 + p0 * t1
        self.d2 = l2 * p2 * t0 + 2.0 * lam * p1 * t1 + p0 * t2
        self.d3 = l3 * p3 * t0 + 3.0 * l2 * p2 * t1 + 3.0 * lam * p1 * t2 + p0 * t3


@dataclass
class LayerFields:
    """Analytic field evaluators of one layer in lab coordinates."""

    state: LayerState
    cutoff: Cutoff1D

    def point(self, t: float) -> TrajPoint:
        return self.state.at(t)

    def moving(self, s: TrajPoint, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return s.a * (x1 - s.c1), s.b * x2

    def _PQ(self, s: TrajPoint, x1, x2, rho: bool = False):
        u, v = self.moving(s, x1, x2)
        P = _Sep(self.cutoff, self.state.lam, "sin", u)
        Q = _Sep(self.cutoff, self.state.lam, "cos" if rho else "sin", v)
        return u, v, P, Q

    def _frame_velocity(self, s: TrajPoint, u, v):
        """d(moving coords)/dt at a fixed lab point, as functions of (u, v)."""
        xi1 = (s.da / s.a) * u - s.a * s.dc1
        xi2 = (s.db / s.b) * v
        return xi1, xi2

    # -- instantaneous fields -------------------------------------------------

    def stream(self, t: float, x1, x2) -> np.ndarray:
        s = self.point(t)
        if not s.active:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        _, _, P, Q = self._PQ(s, x1, x2)
        return s.B * P.f * Q.f

    def velocity(self, t: float, x1, x2) -> tuple[np.ndarray, np.ndarray]:
        s = self.point(t)
        if not s.active:
            z = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
            return z, z.copy()
        _, _, P, Q = self._PQ(s, x1, x2)
        return s.B * s.b * P.f * Q.d1, -s.B * s.a * P.d1 * Q.f

    def velocity_core_and_correction(self, t: float, x1, x2):
        """Split u = V + lam W: plateau core and the cutoff-derivative part."""
        s = self.point(t)
        u, v, P, Q = self._PQ(s, x1, x2)
        lam = self.state.lam
        p0u = self.cutoff(lam * u)
        p0v = self.cutoff(lam * v)
        su, cu = np.sin(u), np.cos(u)
        sv, cv = np.sin(v), np.cos(v)
        V = (s.B * s.b * p0u * p0v * su * cv, -s.B * s.a * p0u * p0v * cu * sv)
        full = (s.B * s.b * P.f * Q.d1, -s.B * s.a * P.d1 * Q.f)
        W = ((full[0] - V[0]) / lam, (full[1] - V[1]) / lam)
        return V, W

    def vorticity(self, t: float, x1, x2) -> np.ndarray:
        s = self.point(t)
        if not s.active:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        _, _, P, Q = self._PQ(s, x1, x2)
        return -s.B * (s.a**2 * P.d2 * Q.f + s.b**2 * P.f * Q.d2)

    def grad_velocity(self, t: float, x1, x2) -> np.ndarray:
        """(..., i, j) tensor with entry [i, j] = d(u_j)/d(x_i)."""
        s = self.point(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        out = np.zeros(shape + (2, 2))
        if not s.active:
            return out
        _, _, P, Q = self._PQ(s, x1, x2)
        out[..., 0, 0] = s.a * s.B * s.b * P.d1 * Q.d1
        out[..., 0, 1] = -s.a * s.B * s.a * P.d2 * Q.f
        out[..., 1, 0] = s.b * s.B * s.b * P.f * Q.d2
        out[..., 1, 1] = -s.b * s.B * s.a * P.d1 * Q.d1
        return out

    def grad_vorticity(self, t: float, x1, x2):
        s = self.point(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        if not s.active:
            return np.zeros(shape), np.zeros(shape)
        _, _, P, Q = self._PQ(s, x1, x2)
        a2, b2 = s.a**2, s.b**2
        g1 = -s.a * s.B * (a2 * P.d3 * Q.f + b2 * P.d1 * Q.d2)
        g2 = -s.b * s.B * (a2 * P.d2 * Q.d1 + b2 * P.f * Q.d3)
        return g1, g2

    def density(self, t: float, x1, x2) -> np.ndarray:
        s = self.point(t)
        R, _ = self.state.density_coeff(t)
        if not s.active or R == 0.0:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        _, _, P, Q = self._PQ(s, x1, x2, rho=True)
        return R * P.f * Q.f

    def grad_density(self, t: float, x1, x2):
        s = self.point(t)
        R, _ = self.state.density_coeff(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        if not s.active or R == 0.0:
            return np.zeros(shape), np.zeros(shape)
        _, _, P, Q = self._PQ(s, x1, x2, rho=True)
        return s.a * R * P.d1 * Q.f, s.b * R * P.f * Q.d1

    # -- exact time derivatives at fixed lab points ---------------------------

    def velocity_dt(self, t: float, x1, x2):
        s = self.point(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        if not s.active:
            return np.zeros(shape), np.zeros(shape)
        u, v, P, Q = self._PQ(s, x1, x2)
        xi1, xi2 = self._frame_velocity(s, u, v)
        dBb = s.dB * s.b + s.B * s.db
        dBa = s.dB * s.a + s.B * s.da
        d1 = dBb * P.f * Q.d1 + s.B * s.b * (P.d1 * Q.d1 * xi1 + P.f * Q.d2 * xi2)
        d2 = -dBa * P.d1 * Q.f - s.B * s.a * (P.d2 * Q.f * xi1 + P.d1 * Q.d1 * xi2)
        return d1, d2

    def velocity_dt_frame_fixed(self, t: float, x1, x2):
        """Time derivative at fixed moving coordinates (telescoped form)."""
        s = self.point(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        if not s.active:
            return np.zeros(shape), np.zeros(shape)
        _, _, P, Q = self._PQ(s, x1, x2)
        dBb = s.dB * s.b + s.B * s.db
        dBa = s.dB * s.a + s.B * s.da
        return dBb * P.f * Q.d1, -dBa * P.d1 * Q.f

    def vorticity_dt(self, t: float, x1, x2) -> np.ndarray:
        s = self.point(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        if not s.active:
            return np.zeros(shape)
        u, v, P, Q = self._PQ(s, x1, x2)
        xi1, xi2 = self._frame_velocity(s, u, v)
        dBa2 = s.dB * s.a**2 + 2.0 * s.B * s.a * s.da
        dBb2 = s.dB * s.b**2 + 2.0 * s.B * s.b * s.db
        core = -(dBa2 * P.d2 * Q.f + dBb2 * P.f * Q.d2)
        adv1 = -s.B * (s.a**2 * P.d3 * Q.f + s.b**2 * P.d1 * Q.d2)
        adv2 = -s.B * (s.a**2 * P.d2 * Q.d1 + s.b**2 * P.f * Q.d3)
        return core + adv1 * xi1 + adv2 * xi2

    def density_dt(self, t: float, x1, x2) -> np.ndarray:
        s = self.point(t)
        R, dR = self.state.density_coeff(t)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        if not s.active or (R == 0.0 and dR == 0.0):
            return np.zeros(shape)
        u, v, P, Q = self._PQ(s, x1, x2, rho=True)
        xi1, xi2 = self._frame_velocity(s, u, v)
        return dR * P.f * Q.f + R * (P.d1 * Q.f * xi1 + P.f * Q.d1 * xi2)

    def support_box(self, t: float):
        return self.state.support_box(t)


class FieldStack:
    """Sum of all layer fields plus the composite quantities.

    Immutable once built; every evaluation is a pure function of (t, x).
    """

    def __init__(self, p: ConstructionParams, states: list[LayerState],
                 cutoff: Cutoff1D | None = None):
        self.p = p
        self.cutoff = cutoff or Cutoff1D()
        self.layers = [LayerFields(s, self.cutoff) for s in states]

    def _sum2(self, method: str, t: float, x1, x2):
        o1 = o2 = None
        for lf in self.layers:
            a, b = getattr(lf, method)(t, x1, x2)
            o1 = a if o1 is None else o1 + a
            o2 = b if o2 is None else o2 + b
        return o1, o2

    def _sum1(self, method: str, t: float, x1, x2):
        out = None
        for lf in self.layers:
            a = getattr(lf, method)(t, x1, x2)
            out = a if out is None else out + a
        return out

    def stream(self, t, x1, x2):
        return self._sum1("stream", t, x1, x2)

    def velocity(self, t, x1, x2):
        return self._sum2("velocity", t, x1, x2)

    def vorticity(self, t, x1, x2):
        return self._sum1("vorticity", t, x1, x2)

    def density(self, t, x1, x2):
        return self._sum1("density", t, x1, x2)

    def grad_density(self, t, x1, x2):
        return self._sum2("grad_density", t, x1, x2)

    def density_dt(self, t, x1, x2):
        return self._sum1("density_dt", t, x1, x2)

    def vorticity_dt(self, t, x1, x2):
        return self._sum1("vorticity_dt", t, x1, x2)

    def grad_vorticity(self, t, x1, x2):
        return self._sum2("grad_vorticity", t, x1, x2)

    def grad_velocity(self, t, x1, x2):
        out = None
        for lf in self.layers:
            g = lf.grad_velocity(t, x1, x2)
            out = g if out is None else out + g
        return out

    def velocity_dt(self, t, x1, x2):
        return self._sum2("velocity_dt", t, x1, x2)

    def material_derivative(self, t, x1, x2):
        """U = du/dt + u . grad u, assembled from the closed forms."""
        du1, du2 = self.velocity_dt(t, x1, x2)
        u1, u2 = self.velocity(t, x1, x2)
        g = self.grad_velocity(t, x1, x2)
        a1 = du1 + u1 * g[..., 0, 0] + u2 * g[..., 1, 0]
        a2 = du2 + u1 * g[..., 0, 1] + u2 * g[..., 1, 1]
        return a1, a2

    def material_derivative_telescoped(self, t, x1, x2):
        """Same quantity through the per-layer telescoped decomposition.

        Increment of layer n: frame-fixed du/dt + (Taylor remainder of the
        prior layers' velocity about the center) . grad u_n
        + u_n . grad U_{n-1} + u_n . grad u_n.
        """
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        tot1 = np.zeros(np.broadcast(x1, x2).shape)
        tot2 = np.zeros_like(tot1)
        prev_u1 = np.zeros_like(tot1)
        prev_u2 = np.zeros_like(tot1)
        prev_g = np.zeros(tot1.shape + (2, 2))
        for lf in self.layers:
            s = lf.point(t)
            dt1, dt2 = lf.velocity_dt_frame_fixed(t, x1, x2)
            u1, u2 = lf.velocity(t, x1, x2)
            g = lf.grad_velocity(t, x1, x2)
            if s.active:
                # Taylor remainder of the prior layers' velocity at the center
                c = s.c1
                pu1_c, pu2_c = self._prior_velocity_at(lf, t, c, 0.0)
                pg_c = self._prior_grad_at(lf, t, c, 0.0)
                w1 = prev_u1 - pu1_c - (pg_c[0, 0] * (x1 - c) + pg_c[1, 0] * x2)
                w2 = prev_u2 - pu2_c - (pg_c[0, 1] * (x1 - c) + pg_c[1, 1] * x2)
                tot1 += dt1 + w1 * g[..., 0, 0] + w2 * g[..., 1, 0]
                tot2 += dt2 + w1 * g[..., 0, 1] + w2 * g[..., 1, 1]
                tot1 += u1 * (prev_g[..., 0, 0] + g[..., 0, 0]) + u2 * (
                    prev_g[..., 1, 0] + g[..., 1, 0])
                tot2 += u1 * (prev_g[..., 0, 1] + g[..., 0, 1]) + u2 * (
                    prev_g[..., 1, 1] + g[..., 1, 1])
            prev_u1 = prev_u1 + u1
            prev_u2 = prev_u2 + u2
            prev_g = prev_g + g
        return tot1, tot2

    def _prior_velocity_at(self, lf: LayerFields, t: float, x1: float, x2: float):
        u1 = u2 = 0.0
        for other in self.layers:
            if other.state.n >= lf.state.n:
                break
            a, b = other.velocity(t, np.array([x1]), np.array([x2]))
            u1 += float(a[0])
            u2 += float(b[0])
        return u1, u2

    def _prior_grad_at(self, lf: LayerFields, t: float, x1: float, x2: float):
        g = np.zeros((2, 2))
        for other in self.layers:
            if other.state.n >= lf.state.n:
                break
            g += other.grad_velocity(t, np.array([x1]), np.array([x2]))[0]
        return g

    # -- composite scalars ----------------------------------------------------

    def origin_values(self, t: float) -> dict:
        """U_1(t,0), U_2(t,0) (material derivative) and rho(t,0)."""
        z1 = np.array([0.0])
        a1, a2 = self.material_derivative(t, z1, z1)
        rho = self.density(t, z1, z1)
        return {"U1": float(a1[0]), "U2": float(a2[0]), "rho": float(rho[0])}

    def f_rho(self, t, x1, x2):
        """Mass source: residual d(rho)/dt + u . grad rho of the truncation."""
        drho = self.density_dt(t, x1, x2)
        u1, u2 = self.velocity(t, x1, x2)
        g1, g2 = self.grad_density(t, x1, x2)
        return drho + u1 * g1 + u2 * g2

    def f_omega(self, t, x1, x2):
        """Vorticity source: d(omega)/dt + u . grad omega - d(rho)/dx2."""
        dom = self.vorticity_dt(t, x1, x2)
        u1, u2 = self.velocity(t, x1, x2)
        w1, w2 = self.grad_vorticity(t, x1, x2)
        _, dr2 = self.grad_density(t, x1, x2)
        return dom + u1 * w1 + u2 * w2 - dr2

    def support_radius(self, t: float, threshold: float = 1e-14) -> float:
        """Measured support radius of rho(t, .) on the active layer's frame."""
        for lf in self.layers:
            s = lf.point(t)
            if s.active and s.h > 0.0:
                c, rx, ry = lf.support_box(t)
                xs = np.linspace(c - 1.05 * rx, c + 1.05 * rx, 257)
                ys = np.linspace(-1.05 * ry, 1.05 * ry, 257)
                X, Y = np.meshgrid(xs, ys)
                r = np.abs(self.density(t, X, Y))
                mask = r > threshold
                if not np.any(mask):
                    return 0.0
                return float(np.max(np.hypot(X[mask], Y[mask])))
        return 0.0


def parity_suite(stack: FieldStack, t: float, x1: np.ndarray,
                 x2: np.ndarray) -> dict:
    """Max |f(x1, x2) -/+ f(x1, -x2)| for the six parity-constrained fields.

    rho and u1 and U1 are even in x2; u2, omega and U2 are odd.
    """
    out = {}
    rho_p, rho_m = stack.density(t, x1, x2), stack.density(t, x1, -x2)
    out["rho_even"] = float(np.max(np.abs(rho_p - rho_m)))
    up1, up2 = stack.velocity(t, x1, x2)
    um1, um2 = stack.velocity(t, x1, -x2)
    out["u1_even"] = float(np.max(np.abs(up1 - um1)))
    out["u2_odd"] = float(np.max(np.abs(up2 + um2)))
    wp, wm = stack.vorticity(t, x1, x2), stack.vorticity(t, x1, -x2)
    out["omega_odd"] = float(np.max(np.abs(wp + wm)))
    ap1, ap2 = stack.material_derivative(t, x1, x2)
    am1, am2 = stack.material_derivative(t, x1, -x2)
    out["U1_even"] = float(np.max(np.abs(ap1 - am1)))
    out["U2_odd"] = float(np.max(np.abs(ap2 + am2)))
    return out
