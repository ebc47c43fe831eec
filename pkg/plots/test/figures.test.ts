import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";
import { readTable } from "../src/csv.js";
import {
  FigureSpec,
  compositionBars,
  nearestPairGap,
  render,
} from "../src/figures.js";

const tmp = () => mkdtempSync(join(tmpdir(), "plots-"));

describe("nearestPairGap", () => {
  it("pairs each simulation time with the nearest flow time", () => {
    const gap = nearestPairGap(
      [0, 0.5, 1],
      [1, 0.9, 0.7],
      [0, 0.5, 1],
      [1, 0.8, 0.75]
    );
    expect(gap).toBeCloseTo(0.1, 15);
  });

  it("resolves ties to the earlier flow row", () => {
    // 0.25 sits exactly between 0 and 0.5; the earlier row (phi=1) wins
    const gap = nearestPairGap([0.25], [0.95], [0, 0.5], [1, 0.8]);
    expect(gap).toBeCloseTo(0.05, 15);
  });
});

describe("overlay", () => {
  const spec = (output: string): FigureSpec => ({
    kind: "overlay",
    inputs: {
      trajectory: "reference/scalar/trajectory.csv",
      flow: "reference/scalar/flow.csv",
    },
    output,
    title: "Alive mass: simulation vs flow limit",
  });

  it("recomputes the sup gap the sweep reported, exactly", () => {
    const result = render(spec(join(tmp(), "overlay.svg")));
    const report = JSON.parse(
      readFileSync("reference/scalar/report.json", "utf8")
    );
    expect(result.supGap).toBeDefined();
    expect(Math.abs(result.supGap! - report.overlay_sup_gap)).toBeLessThanOrEqual(
      1e-12
    );
  });

  it("is deterministic and matches the committed figure", () => {
    const a = join(tmp(), "a.svg");
    const b = join(tmp(), "b.svg");
    render(spec(a));
    render(spec(b));
    const bytesA = readFileSync(a);
    expect(bytesA.equals(readFileSync(b))).toBe(true);
    expect(bytesA.equals(readFileSync("reference/figures/overlay.svg"))).toBe(
      true
    );
  });

  it("names a missing input", () => {
    expect(() =>
      render({
        kind: "overlay",
        inputs: { trajectory: "reference/scalar/trajectory.csv" },
        output: "unused.svg",
      })
    ).toThrow(/input named 'flow'/);
  });

  it("names a missing column", () => {
    const dir = tmp();
    const bad = join(dir, "flow.csv");
    writeFileSync(bad, "t,mass\n0,1\n");
    expect(() =>
      render({
        kind: "overlay",
        inputs: { trajectory: "reference/scalar/trajectory.csv", flow: bad },
        output: join(dir, "x.svg"),
      })
    ).toThrow(/missing column 'phi'/);
  });
});

describe("trace", () => {
  it("draws the criticality guide and matches the committed figure", () => {
    const out = join(tmp(), "trace.svg");
    render({
      kind: "trace",
      inputs: { flow: "reference/scalar/flow.csv" },
      output: out,
      title: "Criticality along the flow",
    });
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain('class="guide"');
    expect(
      readFileSync(out).equals(readFileSync("reference/figures/trace.svg"))
    ).toBe(true);
  });
});

describe("composition", () => {
  it("shows both types near one half for the exchangeable instance", () => {
    const table = readTable("reference/symmetric/composition.csv");
    const bars = compositionBars(table);
    expect(bars.length).toBeGreaterThan(0);
    for (const bar of bars) {
      expect(bar.comp).toHaveLength(2);
      for (const share of bar.comp) {
        expect(share).toBeGreaterThanOrEqual(0.45);
        expect(share).toBeLessThanOrEqual(0.55);
      }
    }
  });

  it("skips unpopulated windows", () => {
    const table = readTable("reference/symmetric/composition.csv");
    const bars = compositionBars(table);
    expect(bars.length).toBeLessThan(table.rows.length);
  });

  it("matches the committed figure", () => {
    const out = join(tmp(), "composition.svg");
    render({
      kind: "composition",
      inputs: { composition: "reference/symmetric/composition.csv" },
      output: out,
      title: "Frozen composition vs flow direction",
    });
    expect(
      readFileSync(out).equals(
        readFileSync("reference/figures/composition.svg")
      )
    ).toBe(true);
  });

  it("rejects a file with no populated windows", () => {
    const dir = tmp();
    const bad = join(dir, "composition.csv");
    writeFileSync(
      bad,
      "bin_lo,bin_mid,bin_hi,n_large,large_mass,small_mass,comp_1,mu_1,l1_dev\n" +
        "0,0.5,1,0,0,0,,1,\n"
    );
    expect(() =>
      render({
        kind: "composition",
        inputs: { composition: bad },
        output: join(dir, "x.svg"),
      })
    ).toThrow(/no populated windows/);
  });
});

describe("scatter", () => {
  it("matches the committed figure", () => {
    const out = join(tmp(), "scatter.svg");
    render({
      kind: "scatter",
      inputs: { convergence: "reference/scalar/convergence.csv" },
      output: out,
      title: "Convergence in N",
    });
    expect(
      readFileSync(out).equals(readFileSync("reference/figures/scatter.svg"))
    ).toBe(true);
  });

  it("skips replicas whose deviation is nan", () => {
    const dir = tmp();
    const csv = join(dir, "convergence.csv");
    writeFileSync(
      csv,
      "N,replica,sup_l1,max_rho_dev\n1000,0,0.2,nan\n1000,1,nan,nan\n2000,0,0.1,0.05\n"
    );
    const out = join(dir, "scatter.svg");
    render({ kind: "scatter", inputs: { convergence: csv }, output: out });
    const circles = readFileSync(out, "utf8").match(/<circle/g) ?? [];
    expect(circles).toHaveLength(2);
  });

  it("rejects a sweep with no finite deviations", () => {
    const dir = tmp();
    const csv = join(dir, "convergence.csv");
    writeFileSync(csv, "N,replica,sup_l1,max_rho_dev\n1000,0,nan,nan\n");
    expect(() =>
      render({
        kind: "scatter",
        inputs: { convergence: csv },
        output: join(dir, "x.svg"),
      })
    ).toThrow(/no finite sup_l1/);
  });
});

describe("render dispatch", () => {
  it("rejects an unknown figure kind", () => {
    expect(() =>
      render({ kind: "heatmap" as never, inputs: {}, output: "x.svg" })
    ).toThrow(/unknown figure kind 'heatmap'/);
  });
});
