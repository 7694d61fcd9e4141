"""Command-line orchestration: configuration, scenario runs, artifact output.

Subcommands map to the acceptance groups:

  layers        trajectories, schedule table, field dumps
  phi           standalone screening-potential construction report
  poisson-bench free-space solver benchmark (manufactured bump + scaling)
  fixedpoint    contraction search, Banach iteration, converged dumps
  verify        end-to-end residual/monitor suite over prior artifacts

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 I/O or
corruption.  Runs are deterministic: identical resolved configurations
produce byte-identical CSVs (timestamps never enter file contents), and
every output directory carries its resolved config, a version stamp and a
checksum manifest.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    IntegrationError,
    default_t_end,
    export_layer_csvs,
    integrate_layers,
)
from .elliptic import Grid2D, PoissonSolver, bump4, bump4_laplacian, estimate_bench
from .fields import FieldStack
from .fixedpoint import (
    NotContractive,
    ScreeningMap,
    FixedPointState,
    build_phi,
    contraction_search,
    iterate_to_fixed_point,
    make_background,
    measure_pair_ratios,
    sample_times,
    screened_diagnostics,
)
from .gridio import read_grid_dump, sha256_of, write_grid_dump
from .harness import (
    bad_term_annulus_report,
    blowup_monitor,
    euler_assembled_check,
    expanded_vorticity_check,
    f_omega_holder_trace,
    mass_equation_check,
    mass_equation_shift_identity,
    moving_grid,
    screening_necessity_trace,
    support_tracker,
    symmetry_gate,
)
from .scales import (
    ConstructionParams,
    DegenerateScheduleError,
    desk_preset,
    lambda_n,
    m_n,
    schedule,
    schedule_only_preset,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; parseable from key=value text."""

    preset: str = "desk"
    c: float = 4.0
    gamma: float = 0.6
    delta: float = 0.5
    mu: float = 0.02
    alpha: float = 0.1
    rho_bar: float = 256.0
    n_max: int = 3
    ode_steps_per_segment: int = 256
    ode_halving_tol: float = 1e-8
    time_samples_per_epoch: int = 8
    grid_n: int = 257
    grid_half_width: float = 4.0
    phi_epsilon: float = 0.5
    phi_measure_n: int = 1025
    banach_tol: float = 1e-8
    banach_max_iter: int = 200
    contraction_pairs: int = 20
    rho_ladder: str = "4,16,64,256,1024"
    residual_levels: int = 3
    residual_k: int = 129
    monitor_quad_nodes: int = 33
    monitor_k_grid: int = 49
    dump_times: str = ""
    seed: int = 1234
    threads: int = 1

    def params(self) -> ConstructionParams:
        if self.preset == "desk":
            base = desk_preset(n_max=self.n_max, rho_bar=self.rho_bar)
            if (self.c, self.gamma, self.delta) == (4.0, 0.6, 0.5):
                return base
        elif self.preset == "schedule-only":
            return schedule_only_preset(n_max=self.n_max)
        return ConstructionParams(
            C=self.c, gamma=self.gamma, delta=self.delta, mu=self.mu,
            alpha=self.alpha, rho_bar=self.rho_bar, n_max=self.n_max,
        )

    def ladder(self) -> list[float]:
        return [float(v) for v in self.rho_ladder.split(",") if v.strip()]

    def requested_dump_times(self) -> list[float]:
        return [float(v) for v in self.dump_times.split(",") if v.strip()]


_FIELD_TYPES = {f.name: f.type for f in dc_fields(RunConfig)}


def parse_config_file(path) -> RunConfig:
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind in ("int",):
                values[key] = int(raw)
            elif kind in ("float",):
                values[key] = float(raw)
            else:
                values[key] = raw
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return RunConfig(**values)


def write_resolved_config(cfg: RunConfig, out: Path) -> None:
    lines = []
    for f in dc_fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}={format(v, '.17g') if isinstance(v, float) else v}")
    (out / "resolved.cfg").write_text("\n".join(lines) + "\n")
    (out / "VERSION").write_text(__version__ + "\n")


def write_manifest(out: Path) -> None:
    rows = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.txt":
            rows.append(f"{sha256_of(p)}  {p.relative_to(out)}")
    (out / "manifest.txt").write_text("\n".join(rows) + "\n")


def check_manifest(out: Path) -> None:
    man = out / "manifest.txt"
    if not man.exists():
        raise IOError(f"no manifest in {out}")
    for line in man.read_text().splitlines():
        if not line.strip():
            continue
        digest, _, rel = line.partition("  ")
        p = out / rel
        if not p.exists():
            raise IOError(f"missing artifact {rel}")
        if sha256_of(p) != digest:
            raise IOError(f"checksum mismatch for {rel}")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v
                        for v in row])


def _build_stack(cfg: RunConfig):
    p = cfg.params()
    states = integrate_layers(p, steps_per_segment=cfg.ode_steps_per_segment,
                              halving_tol=cfg.ode_halving_tol)
    return p, states, FieldStack(p, states)


def cmd_layers(cfg: RunConfig, out: Path) -> int:
    p = cfg.params()
    rows = []
    for n in range(1, p.n_max + 2):
        ts = schedule(p, p.n_max + 1)
        rows.append((n, ts[n - 1], lambda_n(p, n).log_mag, m_n(p, n).log_mag))
    _write_csv(out / "schedule.csv", ["n", "t_n", "log_lambda_n", "log_M_n"], rows)
    if cfg.preset == "schedule-only":
        write_manifest(out)
        return EXIT_OK
    p, states, stack = _build_stack(cfg)
    export_layer_csvs(states, out)
    grid = Grid2D(cfg.grid_half_width, cfg.grid_n)
    X, Y = grid.mesh
    dump_ts = cfg.requested_dump_times()
    if not dump_ts:
        dump_ts = [0.5 * (s.t_n + s.t_np1) for s in states]
    for i, t in enumerate(dump_ts):
        for name, arr in (
            ("rho", stack.density(t, X, Y)),
            ("omega", stack.vorticity(t, X, Y)),
            ("psi", stack.stream(t, X, Y)),
        ):
            write_grid_dump(out / f"{name}_t{i}", arr,
                            x_min=-grid.half_width, x_max=grid.half_width,
                            y_min=-grid.half_width, y_max=grid.half_width,
                            t=t, field_name=name)
    write_manifest(out)
    return EXIT_OK


def cmd_phi(cfg: RunConfig, out: Path) -> int:
    phi = build_phi(cfg.phi_epsilon, measure_n=cfg.phi_measure_n)
    z = np.array([0.0])
    rows = [
        ("A", phi.A), ("mu_phi", phi.mu_phi),
        ("support_radius", phi.support_radius),
        ("certified_lip", phi.certified_lip),
        ("phi_at_origin", float(phi.value(z, z)[0])),
        ("epsilon", phi.epsilon),
    ]
    _write_csv(out / "phi_report.csv", ["quantity", "value"], rows)
    write_manifest(out)
    ok = (phi.certified_lip <= 0.75
          and abs(float(phi.value(z, z)[0]) - 1.0) < 1e-10)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_poisson_bench(cfg: RunConfig, out: Path) -> int:
    grid = Grid2D(2.0, 513)
    X, Y = grid.mesh
    u = PoissonSolver(grid, workers=cfg.threads).potential(
        bump4_laplacian(X, Y))
    err = float(np.max(np.abs(u - bump4(X, Y))))
    bench = estimate_bench(Grid2D(2.0, 257), workers=cfg.threads)
    rows = [("manufactured_sup_error_512", err),
            ("slope_potential", bench["slope_potential"]),
            ("slope_gradient", bench["slope_gradient"]),
            ("slope_gn_item4", bench["slope_gn_item4"]),
            ("expected_gn_item4", bench["expected_gn_item4"])]
    for i, row in enumerate(bench["rows"]):
        rows.append((f"diam_{i}", row["diam"]))
        rows.append((f"potential_quotient_{i}", row["q_u"]))
        rows.append((f"gradient_quotient_{i}", row["q_grad"]))
        rows.append((f"gn_item4_quotient_{i}", row["q_gn4"]))
        rows.append((f"hess_quotient_{i}", row["q_hess"]))
    _write_csv(out / "poisson_bench.csv", ["quantity", "value"], rows)
    write_manifest(out)
    ok = (err < 1e-4
          and abs(bench["slope_potential"] - 2.0) < 0.1
          and abs(bench["slope_gradient"] - 1.0) < 0.1
          and abs(bench["slope_gn_item4"] - bench["expected_gn_item4"]) < 0.1)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_fixedpoint(cfg: RunConfig, out: Path) -> int:
    p, states, stack = _build_stack(cfg)
    grid = Grid2D(cfg.grid_half_width, cfg.grid_n)
    times = sample_times(states, cfg.time_samples_per_epoch, default_t_end(p))
    bg = make_background(stack, grid, times)
    phi = build_phi(cfg.phi_epsilon, measure_n=cfg.phi_measure_n)

    search = contraction_search(grid, bg, phi, cfg.ladder(),
                                n_pairs=cfg.contraction_pairs, seed=cfg.seed,
                                workers=cfg.threads)
    _write_csv(out / "contraction.csv", ["rho_bar", "max_ratio"],
               sorted(search["table"].items()))
    if search["chosen"] is None:
        _write_csv(out / "iteration.csv",
                   ["iter", "distance", "ratio", "residual"], [])
        write_manifest(out)
        print("no ladder value was contractive", file=sys.stderr)
        return EXIT_CHECK_FAILED

    rho_bar = max(float(search["chosen"]), cfg.rho_bar)
    T = ScreeningMap(grid, bg, phi, rho_bar, workers=cfg.threads)
    state = iterate_to_fixed_point(T, tol=cfg.banach_tol,
                                   max_iter=cfg.banach_max_iter)
    pair_ratios = measure_pair_ratios(T, n_pairs=cfg.contraction_pairs,
                                      seed=cfg.seed + 1)

    hist_rows = []
    for i, d in enumerate(state.distances):
        r = state.ratios[i - 1] if i >= 1 else float("nan")
        hist_rows.append((i, d, r, state.residual))
    _write_csv(out / "iteration.csv", ["iter", "distance", "ratio", "residual"],
               hist_rows)
    _write_csv(out / "gtrace.csv", ["t", "g1", "g2"],
               [(float(t), float(g[0]), float(g[1]))
                for t, g in zip(state.times, state.g_trace)])
    _write_csv(out / "pair_ratios.csv", ["pair", "ratio"],
               list(enumerate(pair_ratios)))
    _write_csv(out / "fixedpoint_meta.csv", ["quantity", "value"],
               [("rho_bar", rho_bar), ("chosen_by_search", search["chosen"]),
                ("iterations", len(state.distances)),
                ("residual", state.residual),
                ("apriori_bound", state.apriori_bound),
                ("max_origin_bracket",
                 float(np.max(np.abs(state.origin_bracket)))),
                ("max_pair_ratio", max(pair_ratios))])
    L = grid.half_width
    for i, t in enumerate(state.times):
        for c, name in ((0, "a1"), (1, "a2")):
            write_grid_dump(out / f"{name}_s{i:03d}", state.a[i, c],
                            x_min=-L, x_max=L, y_min=-L, y_max=L,
                            t=float(t), field_name=name)
    diag = screened_diagnostics(stack, state, phi, grid, p,
                                wide_n=129, tol=1e-7, workers=cfg.threads)
    _write_csv(out / "screened_diagnostics.csv",
               ["t", "unscreened_condition_residual", "dpsi_dx2_origin",
                "sup_grad_perp_gradient", "iterations", "op_residual"],
               [(r["t"], r["unscreened_condition_residual"],
                 r["dpsi_dx2_origin"], r["sup_grad_perp_gradient"],
                 r["decomposition_iterations"], r["op_residual"])
                for r in diag["rows"]])
    write_manifest(out)
    ok = (max(state.ratios) <= 0.9 and max(pair_ratios) <= 0.9
          and float(np.max(np.abs(state.origin_bracket))) < 1e-8)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _load_fixed_point(out: Path, grid: Grid2D) -> FixedPointState:
    g_rows = list(csv.DictReader(open(out / "gtrace.csv")))
    times = np.array([float(r["t"]) for r in g_rows])
    g = np.array([[float(r["g1"]), float(r["g2"])] for r in g_rows])
    meta = {r["quantity"]: float(r["value"])
            for r in csv.DictReader(open(out / "fixedpoint_meta.csv"))}
    a = np.zeros((len(times), 2, grid.n, grid.n))
    for i in range(len(times)):
        for c, name in ((0, "a1"), (1, "a2")):
            arr, info = read_grid_dump(out / f"{name}_s{i:03d}")
            if arr.shape != (grid.n, grid.n):
                raise IOError(f"dump {name}_s{i:03d} has shape {arr.shape}")
            a[i, c] = arr
    return FixedPointState(times=times, a=a, g_trace=g,
                           residual=meta["residual"],
                           rho_bar=meta["rho_bar"],
                           origin_bracket=np.zeros(len(times)))


def cmd_verify(cfg: RunConfig, out: Path, ablate_g: bool = False) -> int:
    check_manifest(out)
    p, states, stack = _build_stack(cfg)
    grid = Grid2D(cfg.grid_half_width, cfg.grid_n)
    phi = build_phi(cfg.phi_epsilon, measure_n=cfg.phi_measure_n)
    state = _load_fixed_point(out, grid)

    rows = []
    failures = []

    sym = symmetry_gate(stack, state.times[:: max(1, len(state.times) // 6)],
                        half_width=cfg.grid_half_width)
    for key, v in sym.items():
        ok = v <= 1e-13
        rows.append((f"symmetry_{key}", float("nan"), float("nan"), v, float("nan"), ok))
        if not ok:
            failures.append(f"symmetry_{key}")

    ks = tuple((cfg.residual_k - 1) * 2**j + 1 for j in range(cfg.residual_levels))
    for s in states:
        t = float(s.times[s.times.searchsorted(
            s.t_n + 0.5 * (min(s.t_np1, default_t_end(p)) - s.t_n))])
        for patch in ("core", "edge"):
            for check, reps in (
                ("mass", mass_equation_check(stack, t, s.n, ks=ks, patch=patch)),
                ("vorticity_expanded",
                 expanded_vorticity_check(stack, t, s.n, ks=ks, patch=patch)),
            ):
                for j, r in enumerate(reps):
                    ok = True if j == 0 else r.ratio_vs_coarser > 3.5
                    cid = f"{check}_l{s.n}_{patch}"
                    rows.append((cid, r.t, r.h, r.sup, r.ratio_vs_coarser, ok))
                    if not ok:
                        failures.append(cid)
        shift = mass_equation_shift_identity(stack, t, s.n, state.rho_bar)
        _, _, h1, h2 = moving_grid(s, t, 129)
        bound = 10 * 2.3e-16 * state.rho_bar * (1.0 / h1 + 1.0 / h2)
        ok = shift <= bound
        rows.append((f"mass_shift_identity_l{s.n}", t, float("nan"), shift,
                     float("nan"), ok))
        if not ok:
            failures.append(f"mass_shift_identity_l{s.n}")

    # assembled Euler check at an epoch-1 sample (all scales resolvable)
    ep1 = [float(t) for t in state.times if t < states[0].t_np1]
    t1 = ep1[len(ep1) // 2]
    reps = euler_assembled_check(stack, phi, state, p, t1, grid,
                                 levels=cfg.residual_levels,
                                 ablate_g=ablate_g, workers=cfg.threads)
    for r in reps:
        rows.append((r.check_id, r.t, r.h, r.sup, r.ratio_vs_coarser, True))
    # second-order decay: asymptotic ratio reaches ~4 and the ladder
    # shrinks the residual by a near-quadratic overall factor
    decay = reps[0].sup / reps[-1].sup
    ok = (reps[-1].ratio_vs_coarser > 3.0
          and decay > 4.0 ** (len(reps) - 1) / 2.5)
    cid = reps[-1].check_id + "_order"
    rows.append((cid, t1, float("nan"), decay, reps[-1].ratio_vs_coarser, ok))
    if not ok:
        failures.append(cid)

    monitor = blowup_monitor(states, stack, quad_nodes=cfg.monitor_quad_nodes,
                             k_grid=cfg.monitor_k_grid)
    Is = [r["I"] for r in monitor]
    ok = all(b > a for a, b in zip(Is, Is[1:]))
    rows.append(("monitor_I_increasing", float("nan"), float("nan"),
                 float(Is[-1]), float("nan"), ok))
    if not ok:
        failures.append("monitor_I_increasing")
    for r in monitor:
        ok = r["I_plus_ref_reldiff"] < 1e-6
        rows.append((f"monitor_Iplus_match_n{r['n']}", r["t_lo"], float("nan"),
                     r["I_plus_ref_reldiff"], float("nan"), ok))
        if not ok:
            failures.append(f"monitor_Iplus_match_n{r['n']}")
        rows.append((f"monitor_Q_n{r['n']}", r["t_lo"], float("nan"),
                     r["Q"], float("nan"), True))

    for r in support_tracker(stack, states):
        ok = r["measured"] <= r["box"] * (1 + 1e-9)
        rows.append((f"support_n{r['n']}", r["t"], float("nan"),
                     r["measured"], r["box"], ok))
        if not ok:
            failures.append(f"support_n{r['n']}")

    # report-only diagnostics: annulus power law, vorticity-source norms,
    # growth of the bad term across epochs
    bad = bad_term_annulus_report(stack, states, p)
    rows.append(("bad_term_fitted_exponent", float("nan"), float("nan"),
                 bad["fitted_exponent"], bad["predicted_exponent"], True))
    for r in f_omega_holder_trace(stack, states, p.alpha):
        rows.append((f"f_omega_holder_n{r['n']}", r["t"], float("nan"),
                     r["seminorm"], r["sup"], True))
    grow = screening_necessity_trace(stack, states)
    ok = bool(grow["strictly_increasing"])
    rows.append(("bad_term_growth_across_epochs", float("nan"), float("nan"),
                 grow["final_over_first"], float("nan"), ok))
    if not ok:
        failures.append("bad_term_growth_across_epochs")

    _write_csv(out / "verify_report.csv",
               ["check", "t", "h", "value", "aux", "pass"],
               [(c, t, h, v, a, int(okv)) for c, t, h, v, a, okv in rows])
    if failures:
        print("failed checks: " + ", ".join(sorted(set(failures))),
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="euler-blowup",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["layers", "phi", "poisson-bench",
                                        "fixedpoint", "verify"])
    ap.add_argument("--config", type=Path, default=None)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--preset", choices=["desk", "schedule-only"], default=None)
    ap.add_argument("--ablate-g", action="store_true")
    args = ap.parse_args(argv)

    try:
        cfg = parse_config_file(args.config) if args.config else RunConfig()
        if args.preset:
            cfg.preset = args.preset
        if args.threads:
            cfg.threads = args.threads
        cfg.params()  # validate parameters now
    except (ConfigError, ValueError, DegenerateScheduleError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out)

    try:
        if args.command == "layers":
            return cmd_layers(cfg, out)
        if args.command == "phi":
            return cmd_phi(cfg, out)
        if args.command == "poisson-bench":
            return cmd_poisson_bench(cfg, out)
        if args.command == "fixedpoint":
            return cmd_fixedpoint(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out, ablate_g=args.ablate_g)
    except DegenerateScheduleError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, NotContractive) as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (IOError, OSError) as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_IO
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
