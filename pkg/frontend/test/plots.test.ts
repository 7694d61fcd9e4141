import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { readCsv, column, readGridDump } from "../src/data.js";
import {
  K_MAX,
  kProfileCurves,
  plotConvergence,
  plotField,
  plotKProfiles,
  tentProfile,
} from "../src/plots.js";
import { run } from "../src/cli.js";

const FIX = join(__dirname, "fixtures");
const layerCsvs = [join(FIX, "layer_1.csv"), join(FIX, "layer_2.csv")];

describe("data readers", () => {
  it("parses layer CSVs with the documented columns", () => {
    const t = readCsv(layerCsvs[0]);
    expect(t.columns).toEqual(["t", "a", "b", "B", "k", "center1"]);
    expect(t.rows.length).toBeGreaterThan(10);
    expect(column(t, "k").every((v) => Number.isFinite(v))).toBe(true);
  });

  it("rejects a missing column with a descriptive error", () => {
    const t = readCsv(layerCsvs[0]);
    expect(() => column(t, "no_such", "layer_1.csv")).toThrow(/missing column 'no_such'/);
  });

  it("reads grid dumps and validates their payload length", () => {
    const d = readGridDump(join(FIX, "rho_t0"));
    expect(d.nx).toBe(65);
    expect(d.ny).toBe(65);
    expect(d.fieldName).toBe("rho");
    expect(d.values.length).toBe(d.ny);
  });

  it("raises on a truncated binary payload", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    writeFileSync(join(dir, "bad.meta"), readFileSync(join(FIX, "rho_t0.meta")));
    writeFileSync(join(dir, "bad.f64"), Buffer.alloc(128));
    expect(() => readGridDump(join(dir, "bad"))).toThrow(/expected/);
  });
});

describe("k-profile figure", () => {
  it("renders and is deterministic across runs", () => {
    const a = plotKProfiles(layerCsvs);
    const b = plotKProfiles(layerCsvs);
    expect(a).toBe(b);
    expect(a).toContain("<svg");
    expect(a).toContain("ideal tent");
  });

  it("shows every measured curve at or below the tent profile", () => {
    for (const c of kProfileCurves(layerCsvs)) {
      c.that.forEach((th, j) => {
        expect(c.k[j]).toBeLessThanOrEqual(tentProfile(th) + 1e-12);
      });
    }
    expect(K_MAX).toBeCloseTo(Math.sqrt(4 / 3) - 1, 15);
  });

  it("renders a single curve from a single layer", () => {
    const svg = plotKProfiles([layerCsvs[0]]);
    expect(svg).toContain("layer_1");
    expect(svg).not.toContain("layer_2");
  });

  it("fails on empty input", () => {
    expect(() => plotKProfiles([])).toThrow(/no layer CSVs/);
  });
});

describe("convergence figure", () => {
  it("renders deterministically with the 0.9^k reference", () => {
    const p = join(FIX, "iteration.csv");
    const a = plotConvergence(p);
    expect(a).toBe(plotConvergence(p));
    expect(a).toContain("0.9^k reference");
    expect(a).not.toContain("warning");
  });

  it("annotates ratios above one", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const p = join(dir, "it.csv");
    writeFileSync(p, "iter,distance,ratio,residual\n0,1.0,nan,0\n1,1.5,1.5,0\n");
    expect(plotConvergence(p)).toContain("warning: ratio above 1");
  });

  it("renders a single-point history", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const p = join(dir, "it.csv");
    writeFileSync(p, "iter,distance,ratio,residual\n0,0.5,nan,0\n");
    expect(plotConvergence(p)).toContain("<circle");
  });
});

describe("field heatmaps", () => {
  it("uses a symmetric diverging scale for sign-changing fields", () => {
    const svg = plotField(join(FIX, "omega_t1"));
    expect(svg).toBe(plotField(join(FIX, "omega_t1")));
    expect(svg).toContain("omega");
    // antisymmetry of the odd field: mirrored rows carry mirrored colors
    const d = readGridDump(join(FIX, "omega_t1"));
    let checked = 0;
    for (let iy = 0; iy < Math.floor(d.ny / 2); iy += 7) {
      for (let ix = 0; ix < d.nx; ix += 9) {
        const v = d.values[iy][ix];
        const m = d.values[d.ny - 1 - iy][ix];
        if (Math.abs(v) > 1e-12) {
          expect(m).toBeCloseTo(-v, 8);
          checked++;
        }
      }
    }
    expect(checked).toBeGreaterThan(3);
  });

  it("renders the density dump", () => {
    const svg = plotField(join(FIX, "rho_t0"));
    expect(svg).toContain("rho");
    expect(svg.length).toBeGreaterThan(1000);
  });
});

describe("cli", () => {
  it("writes figures end to end and deterministically", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const out1 = join(dir, "k1.svg");
    const out2 = join(dir, "k2.svg");
    expect(run(["kprofiles", "--in", ...layerCsvs, "--out", out1])).toBe(0);
    expect(run(["kprofiles", "--in", ...layerCsvs, "--out", out2])).toBe(0);
    expect(readFileSync(out1, "utf-8")).toBe(readFileSync(out2, "utf-8"));
    expect(
      run(["convergence", "--in", join(FIX, "iteration.csv"), "--out", join(dir, "c.svg")])
    ).toBe(0);
    expect(run(["fields", "--in", join(FIX, "rho_t0"), "--out", join(dir, "f.svg")])).toBe(0);
  });

  it("returns 2 on usage errors and 1 on data errors", () => {
    expect(run(["kprofiles"])).toBe(2);
    expect(run(["mystery", "--in", "x", "--out", "y"])).toBe(2);
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    expect(run(["convergence", "--in", join(dir, "nope.csv"), "--out", join(dir, "o.svg")])).toBe(1);
  });
});
