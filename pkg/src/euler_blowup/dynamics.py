"""Layer trajectory integration.

Each layer n lives on [t_n, 1] and carries a moving frame (stretch a_n,
squeeze b_n, drifting center c1_n), an amplitude B_n fed by the activity bump
h^(n), and the conserved product a_n b_n = C**(2 e_n).

Integration layout: the time axis is split at the epoch boundaries
t_1 < t_2 < ... < t_{n_max+1} < 1 and every layer shares the same per-segment
uniform node grids (RK4 steps span two nodes, so stage midpoints are stored
nodes), letting deeper layers read exact node values of the layers driving
them.

Pinning: the centers have initial conditions at t_n (the arcsin seed of the
half-pendulum drift) and are integrated forward with classical RK4; ln b_n is
pinned at t = 1 through k_n(1) = 0 and recovered by backward quadrature of
its drive (which depends on the centers but never on b_n itself).  a_n
follows from the conserved product, k_n from inverting b = C**((1+k) e_n).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cutoff import ActivityBump
from .scales import ConstructionParams, schedule


class IntegrationError(RuntimeError):
    """Step-halving changed an endpoint by more than the tolerance."""


class TrajPoint(NamedTuple):
    """Layer state and its exact time derivatives at one instant."""

    t: float
    a: float
    b: float
    B: float
    k: float
    c1: float
    da: float
    db: float
    dB: float
    dc1: float
    h: float
    dh: float
    I: float
    I1: float
    active: bool


@dataclass
class LayerState:
    """Time-sampled trajectory of one layer plus closed-form coefficients."""

    n: int
    t_n: float
    t_np1: float
    e_n: float
    lam: float
    M: float
    const_ab: float
    bump: ActivityBump
    times: np.ndarray  # node grid on [t_n, 1]
    log_b: np.ndarray
    c1: np.ndarray
    dlog_b: np.ndarray  # drive L(t) = d ln b / dt at nodes
    dc1: np.ndarray
    I: np.ndarray  # running integral of h^(n) b_n
    log_C: float

    @property
    def I1(self) -> float:
        return float(self.I[-1])

    @property
    def b(self) -> np.ndarray:
        return np.exp(self.log_b)

    @property
    def a(self) -> np.ndarray:
        return self.const_ab / self.b

    @property
    def k(self) -> np.ndarray:
        return self.log_b / (self.e_n * self.log_C) - 1.0

    @property
    def B(self) -> np.ndarray:
        b = self.b
        a = self.const_ab / b
        return 2.0 * self.M * self.I / (self.I1 * (a * a + b * b))

    def node_index(self, t: float) -> int:
        """Index of the node equal to t (up to 1e-10 absolute)."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i, i + 1):
            if 0 <= j < len(self.times) and abs(self.times[j] - t) <= 1e-10:
                return j
        raise KeyError(f"t={t!r} is not a trajectory node of layer {self.n}")

    def _bracket(self, t: float) -> tuple[int, float, float]:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        dt = float(self.times[i + 1] - self.times[i])
        s = (t - float(self.times[i])) / dt
        return i, s, dt

    def _hermite(self, y: np.ndarray, dy: np.ndarray, t: float) -> float:
        i, s, dt = self._bracket(t)
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return float(
            h00 * y[i] + h10 * dt * dy[i] + h01 * y[i + 1] + h11 * dt * dy[i + 1]
        )

    def at(self, t: float) -> TrajPoint:
        """State and exact derivatives at time t.

        Node times are exact; between nodes, cubic Hermite on (ln b, c1) with
        the stored drives.  Before t_n the layer is inert (all fields carry a
        factor that vanishes there; the frame is frozen at its t_n value).
        """
        if t < self.t_n - 1e-12:
            b = math.exp(float(self.log_b[0]))
            return TrajPoint(t, self.const_ab / b, b, 0.0, float(self.k[0]),
                             float(self.c1[0]), 0.0, 0.0, 0.0, 0.0,
                             0.0, 0.0, 0.0, self.I1, False)
        try:
            i = self.node_index(t)
            log_b, c1 = float(self.log_b[i]), float(self.c1[i])
            L, dc1 = float(self.dlog_b[i]), float(self.dc1[i])
            I = float(self.I[i])
        except KeyError:
            log_b = self._hermite(self.log_b, self.dlog_b, t)
            c1 = self._hermite(self.c1, self.dc1, t)
            i, s, _ = self._bracket(t)
            L = float((1 - s) * self.dlog_b[i] + s * self.dlog_b[i + 1])
            dc1 = float((1 - s) * self.dc1[i] + s * self.dc1[i + 1])
            I = self._hermite(self.I, self.bump(self.times) * np.exp(self.log_b), t)
        b = math.exp(log_b)
        a = self.const_ab / b
        k = log_b / (self.e_n * self.log_C) - 1.0
        h = float(self.bump(np.array([t]))[0])
        dh = float(self.bump.deriv(np.array([t]))[0])
        S = a * a + b * b
        B = 2.0 * self.M * I / (self.I1 * S)
        db = b * L
        da = -a * L
        dS = 2.0 * (a * da + b * db)
        dB = 2.0 * self.M * ((h * b) * S - I * dS) / (self.I1 * S * S)
        return TrajPoint(t, a, b, B, k, c1, da, db, dB, dc1, h, dh, I, self.I1, True)

    def density_coeff(self, t: float) -> tuple[float, float]:
        """(R, dR/dt) with R(t) = -2 M h(t) / I1, the density amplitude."""
        h = float(self.bump(np.array([t]))[0])
        dh = float(self.bump.deriv(np.array([t]))[0])
        return -2.0 * self.M * h / self.I1, -2.0 * self.M * dh / self.I1

    def support_box(self, t: float) -> tuple[float, float, float]:
        """(center, x1 half-width, x2 half-height) of the layer's lab support."""
        s = self.at(t)
        r = 16.0 * math.pi / self.lam
        return s.c1, r / s.a, r / s.b


def _segment_nodes(ts: list[float], steps: int) -> list[np.ndarray]:
    bounds = list(ts) + [1.0]
    return [
        np.linspace(bounds[j], bounds[j + 1], 2 * steps + 1)
        for j in range(len(bounds) - 1)
    ]


def _concat_nodes(segs: list[np.ndarray]) -> np.ndarray:
    parts = [segs[0]] + [s[1:] for s in segs[1:]]
    return np.concatenate(parts)


def _cumulative_simpson(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative integral on a piecewise-uniform odd-length grid.

    Even nodes by composite Simpson over node pairs; odd (midpoint) nodes by
    the quadratic half-panel rule.  Grid spacing may change across segment
    boundaries, which always fall on even nodes.
    """
    n = len(y)
    out = np.zeros(n)
    for i in range(2, n, 2):
        dx = x[i] - x[i - 1]
        out[i] = out[i - 2] + dx / 3.0 * (y[i - 2] + 4.0 * y[i - 1] + y[i])
    for i in range(1, n, 2):
        dx = x[i] - x[i - 1]
        out[i] = out[i - 1] + dx / 12.0 * (5.0 * y[i - 1] + 8.0 * y[i] - y[i + 1])
    return out


def integrate_layers(
    p: ConstructionParams,
    steps_per_segment: int = 256,
    halving_tol: float = 1e-8,
    check_halving: bool = True,
    recenter: bool = True,
) -> list[LayerState]:
    """Integrate all layers; optionally recentre so the deepest layer's
    center sits at the origin at t = 1 (blow-up at the origin).

    Raises IntegrationError when halving the step moves the center at t=1,
    ln b at t_n or the bump quadrature by more than halving_tol relatively.
    """
    states = _integrate(p, steps_per_segment)
    if check_halving:
        fine = _integrate(p, 2 * steps_per_segment)
        for s, f in zip(states, fine):
            pairs = [(s.c1[-1], f.c1[-1]), (s.log_b[0], f.log_b[0]), (s.I1, f.I1)]
            for coarse_v, fine_v in pairs:
                scale = max(abs(coarse_v), abs(fine_v), 1e-30)
                if abs(coarse_v - fine_v) / scale > halving_tol:
                    raise IntegrationError(
                        f"layer {s.n}: endpoint moved by "
                        f"{abs(coarse_v - fine_v) / scale:.3e} under step halving"
                    )
    if recenter:
        shift = float(states[-1].c1[-1])
        for s in states:
            s.c1 = s.c1 - shift
    return states


def _integrate(p: ConstructionParams, steps: int) -> list[LayerState]:
    ts = schedule(p, p.n_max + 1)
    segs = _segment_nodes(ts, steps)
    states: list[LayerState] = []
    for n in range(1, p.n_max + 1):
        nodes = _concat_nodes(segs[n - 1 :])
        n_nodes = len(nodes)
        e_n = p.e(n)
        const_ab = math.exp(2.0 * e_n * p.log_C)
        lam = math.exp(-p.Lambda * e_n * p.log_C)
        M = math.exp(p.log_Y + p.delta * e_n * p.log_C)
        bump = ActivityBump(ts[n - 1], ts[n])
        offsets = [
            sum(len(segs[j]) - 1 for j in range(m, n - 1)) for m in range(n - 1)
        ]
        drivers = []
        for st, off in zip(states, offsets):
            sl = slice(off, off + n_nodes)
            b_m = st.b[sl]
            a_m = st.a[sl]
            B_m = st.B[sl]
            drivers.append((B_m * b_m, B_m * a_m * b_m, a_m, st.c1[sl]))

        def rhs_c1(i: int, c: float) -> float:
            tot = 0.0
            for Bb, _, a_m, c1_m in drivers:
                tot += Bb[i] * math.sin(a_m[i] * (c - c1_m[i]))
            return tot

        # center: forward RK4 from the arcsin seed
        c1 = np.zeros(n_nodes)
        theta0 = math.asin(math.exp(-p.k_max * e_n * p.log_C))
        a_prev_end = math.exp(p.e(n - 1) * p.log_C)  # a_{n-1}(1); a_0(1) = C
        c1[0] = (states[-1].c1[offsets[-1]] if states else 0.0) + theta0 / a_prev_end
        for i in range(0, n_nodes - 2, 2):
            h = float(nodes[i + 2] - nodes[i])
            y = c1[i]
            k1 = rhs_c1(i, y)
            k2 = rhs_c1(i + 1, y + 0.5 * h * k1)
            k3 = rhs_c1(i + 1, y + 0.5 * h * k2)
            k4 = rhs_c1(i + 2, y + h * k3)
            c1[i + 2] = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        # midpoint nodes: cubic Hermite between RK4 nodes (same global order)
        for i in range(1, n_nodes - 1, 2):
            h = float(nodes[i + 1] - nodes[i - 1])
            d0, d1 = rhs_c1(i - 1, c1[i - 1]), rhs_c1(i + 1, c1[i + 1])
            c1[i] = 0.5 * (c1[i - 1] + c1[i + 1]) + h / 8.0 * (d0 - d1)
        dc1 = np.array([rhs_c1(i, c1[i]) for i in range(n_nodes)])

        # squeeze: drive never involves b itself; backward quadrature from
        # the terminal pin ln b(1) = e_n ln C  (k_n(1) = 0)
        L = np.zeros(n_nodes)
        for Bb, Bab, a_m, c1_m in drivers:
            L += Bab * np.cos(a_m * (c1 - c1_m))
        J = _cumulative_simpson(L, nodes)
        log_b = e_n * p.log_C - (J[-1] - J)

        I = _cumulative_simpson(np.asarray(bump(nodes)) * np.exp(log_b), nodes)

        states.append(
            LayerState(
                n=n, t_n=ts[n - 1], t_np1=ts[n], e_n=e_n, lam=lam, M=M,
                const_ab=const_ab, bump=bump, times=nodes, log_b=log_b,
                c1=c1, dlog_b=L, dc1=dc1, I=I, log_C=p.log_C,
            )
        )
    return states


def default_t_end(p: ConstructionParams) -> float:
    """Last usable field time: just short of t_{n_max+1}.

    Fields are never evaluated at t = 1; the final sliver of the last epoch
    is excluded so the active density layer stays strictly inside its bump.
    """
    ts = schedule(p, p.n_max + 1)
    return ts[-1] - 1e-3 * (ts[-1] - ts[-2])


def layer_separation_check(states: list[LayerState], t_end: float,
                           samples: int = 200) -> dict:
    """Max of |c1_n - c1_m| a_m(t) / (8 pi) over layer pairs and times.

    The centers must never leave the zone where each other's cutoffs are
    identically one; ratio > 1 flags a violation.
    """
    report = {}
    worst = 0.0
    for sn in states:
        tgrid = np.linspace(sn.t_n, min(t_end, 1.0), samples)
        for sm in states[: sn.n]:
            r = 0.0
            for t in tgrid:
                if t < sn.t_n:
                    continue
                pn, pm = sn.at(t), sm.at(t)
                r = max(r, abs(pn.c1 - pm.c1) * pm.a / (8.0 * math.pi))
            key = (sn.n, sm.n)
            report[key] = r
            worst = max(worst, r)
    report["max_ratio"] = worst
    report["violation"] = worst > 1.0
    return report


def blowup_point(states: list[LayerState],
                 p: ConstructionParams) -> tuple[float, float]:
    """Deepest available estimate of the blow-up abscissa and its bound.

    Returns (c1_n(1), 8 pi C**(-e_n)) for the deepest layer n; successive
    estimates are Cauchy with rate 8 pi C**(-e_m).
    """
    deepest = states[-1]
    bound = 8.0 * math.pi * math.exp(-p.e(deepest.n) * p.log_C)
    return float(deepest.c1[-1]), bound


def export_layer_csvs(states: list[LayerState], out_dir, stride: int = 4) -> list:
    """One CSV per layer: t, a, b, B, k, center1 (node subsampling)."""
    from pathlib import Path

    out = []
    for s in states:
        path = Path(out_dir) / f"layer_{s.n}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "a", "b", "B", "k", "center1"])
            a, b, B, k = s.a, s.b, s.B, s.k
            for i in range(0, len(s.times), stride):
                w.writerow([format(v, ".17g") for v in
                            (s.times[i], a[i], b[i], B[i], k[i], s.c1[i])])
        out.append(path)
    return out
