import { writeFileSync } from "fs";
import {
  Table,
  numericColumn,
  prefixedColumns,
  rawColumn,
  readTable,
} from "./csv.js";
import * as svg from "./svg.js";

export type FigureKind = "overlay" | "trace" | "composition" | "scatter";

export interface FigureSpec {
  kind: FigureKind;
  /** Named input CSVs: overlay wants {trajectory, flow}; trace {flow};
      composition {composition}; scatter {convergence}. */
  inputs: Record<string, string>;
  output: string;
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

export interface RenderResult {
  output: string;
  /** Overlay only: sup |phi_sim - phi_flow| under nearest-time pairing. */
  supGap?: number;
}

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 56, right: 16, top: 30, bottom: 40 };

const SIM_COLOR = "#c0392b";
const FLOW_COLOR = "#2c3e50";
const TYPE_COLORS = ["#2980b9", "#27ae60", "#8e44ad", "#d35400"];

function frameFor(xs: number[], ys: number[]): svg.Frame {
  const finite = (v: number[]) => v.filter(Number.isFinite);
  const fx = finite(xs);
  const fy = finite(ys);
  const xLo = Math.min(...fx);
  const xHi = Math.max(...fx);
  const yLo = Math.min(0, ...fy);
  const yHi = Math.max(...fy) * 1.05 || 1;
  return {
    width: WIDTH,
    height: HEIGHT,
    ...MARGIN,
    xDomain: [xLo, xHi === xLo ? xLo + 1 : xHi],
    yDomain: [yLo, yHi],
  };
}

function requireInput(spec: FigureSpec, name: string): string {
  const path = spec.inputs[name];
  if (!path) {
    throw new Error(`figure kind '${spec.kind}' needs an input named '${name}'`);
  }
  return path;
}

/**
 * Sup |phi_sim - phi_flow| pairing each simulation row with the flow row of
 * nearest time, ties resolved to the earlier row.  This mirrors, bit for bit,
 * how the harness fills report.json's overlay_sup_gap from the same files:
 * both sides parse the same serialized decimals, so the doubles agree exactly.
 */
export function nearestPairGap(
  simT: number[],
  simPhi: number[],
  flowT: number[],
  flowPhi: number[]
): number {
  let worst = 0;
  for (let i = 0; i < simT.length; i++) {
    const t = simT[i]!;
    // lower bound: first index with flowT[idx] >= t
    let lo = 0;
    let hi = flowT.length;
    while (lo < hi) {
      const mid = (lo + hi) >> 1;
      if (flowT[mid]! < t) lo = mid + 1;
      else hi = mid;
    }
    const before = Math.max(lo - 1, 0);
    const after = Math.min(lo, flowT.length - 1);
    const pick =
      Math.abs(flowT[before]! - t) <= Math.abs(flowT[after]! - t) ? before : after;
    const gap = Math.abs(simPhi[i]! - flowPhi[pick]!);
    if (gap > worst) worst = gap;
  }
  return worst;
}

function legend(entries: [string, string][], x: number): string {
  return entries
    .map(
      ([label, color], i) =>
        `<line x1="${x}" y1="${38 + 14 * i}" x2="${x + 18}" y2="${38 + 14 * i}" stroke="${color}" stroke-width="2"/>` +
        svg.text(x + 23, 41 + 14 * i, label, 'font-size="10"')
    )
    .join("\n");
}

function renderOverlay(spec: FigureSpec): RenderResult {
  const sim = readTable(requireInput(spec, "trajectory"));
  const flow = readTable(requireInput(spec, "flow"));
  const simT = numericColumn(sim, "t");
  const simPhi = numericColumn(sim, "phi");
  const flowT = numericColumn(flow, "t");
  const flowPhi = numericColumn(flow, "phi");

  const frame = frameFor([...simT, ...flowT], [...simPhi, ...flowPhi]);
  const parts = [svg.axes(frame, spec.xLabel ?? "t", spec.yLabel ?? "alive mass")];
  const entries: [string, string][] = [
    ["simulation", SIM_COLOR],
    ["flow limit", FLOW_COLOR],
  ];

  const typeCols = prefixedColumns(sim, "pi_");
  if (typeCols.length > 1) {
    typeCols.forEach((name, i) => {
      const color = TYPE_COLORS[i % TYPE_COLORS.length]!;
      parts.push(
        svg.polyline(frame, simT, numericColumn(sim, name),
          `stroke="${color}" stroke-width="1" opacity="0.6"`),
        svg.polyline(frame, flowT, numericColumn(flow, name),
          `stroke="${color}" stroke-width="1" stroke-dasharray="4 3" opacity="0.6"`)
      );
      entries.push([name.replace("pi_", "type "), color]);
    });
  }
  parts.push(
    svg.polyline(frame, flowT, flowPhi, `stroke="${FLOW_COLOR}" stroke-width="2"`),
    svg.polyline(frame, simT, simPhi, `stroke="${SIM_COLOR}" stroke-width="1.5"`),
    legend(entries, WIDTH - 150)
  );

  const supGap = nearestPairGap(simT, simPhi, flowT, flowPhi);
  writeFileSync(
    spec.output,
    svg.document(WIDTH, HEIGHT, spec.title ?? "", parts.join("\n"))
  );
  return { output: spec.output, supGap };
}

function renderTrace(spec: FigureSpec): RenderResult {
  const flow = readTable(requireInput(spec, "flow"));
  const t = numericColumn(flow, "t");
  const rho = numericColumn(flow, "rho");
  const frame = frameFor(t, [...rho, 1.1]);
  const body = [
    svg.axes(frame, spec.xLabel ?? "t", spec.yLabel ?? "spectral radius"),
    svg.polyline(frame, [...frame.xDomain], [1, 1],
      'stroke="#999999" stroke-dasharray="5 4" class="guide"'),
    svg.polyline(frame, t, rho, `stroke="${FLOW_COLOR}" stroke-width="1.5"`),
  ].join("\n");
  writeFileSync(spec.output, svg.document(WIDTH, HEIGHT, spec.title ?? "", body));
  return { output: spec.output };
}

export interface CompositionBar {
  binMid: number;
  comp: number[];
  mu: number[];
}

/** Populated windows only (rows whose comp_* cells are non-empty). */
export function compositionBars(table: Table): CompositionBar[] {
  const compCols = prefixedColumns(table, "comp_");
  const muCols = prefixedColumns(table, "mu_");
  if (compCols.length === 0) {
    throw new Error(`no comp_* columns in ${table.path}`);
  }
  const mids = numericColumn(table, "bin_mid");
  const comps = compCols.map((c) => rawColumn(table, c));
  const mus = muCols.map((c) => numericColumn(table, c));
  const out: CompositionBar[] = [];
  for (let r = 0; r < mids.length; r++) {
    if (comps.some((col) => col[r] === "")) continue;
    out.push({
      binMid: mids[r]!,
      comp: comps.map((col) => Number(col[r])),
      mu: mus.map((col) => col[r]!),
    });
  }
  return out;
}

function renderComposition(spec: FigureSpec): RenderResult {
  const table = readTable(requireInput(spec, "composition"));
  const bars = compositionBars(table);
  if (bars.length === 0) {
    throw new Error(`${table.path} has no populated windows to draw`);
  }
  const k = bars[0]!.comp.length;
  const frame: svg.Frame = {
    width: WIDTH,
    height: HEIGHT,
    ...MARGIN,
    xDomain: [0, bars.length],
    yDomain: [0, 1],
  };
  const parts = [
    svg.axes(frame, spec.xLabel ?? "time window", spec.yLabel ?? "type share"),
  ];
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const group = plotW / bars.length;
  const bar = (group * 0.7) / k;
  bars.forEach((b, gi) => {
    for (let i = 0; i < k; i++) {
      const color = TYPE_COLORS[i % TYPE_COLORS.length]!;
      const x = MARGIN.left + gi * group + group * 0.15 + i * bar;
      const yTop = svg.scaleY(frame, b.comp[i]!);
      const yMu = svg.scaleY(frame, b.mu[i]!);
      const base = HEIGHT - MARGIN.bottom;
      parts.push(
        svg.rect(x, yTop, bar * 0.9, base - yTop, `fill="${color}" opacity="0.75"`),
        // flow's eigen-direction as a tick across each bar
        `<line x1="${x.toFixed(2)}" y1="${yMu.toFixed(2)}" x2="${(x + bar * 0.9).toFixed(2)}" y2="${yMu.toFixed(2)}" stroke="black" stroke-width="1.5"/>`
      );
    }
    parts.push(
      svg.text(
        MARGIN.left + gi * group + group / 2,
        HEIGHT - MARGIN.bottom + 16,
        `t=${svg.tickLabel(b.binMid)}`,
        'text-anchor="middle" font-size="9"'
      )
    );
  });
  writeFileSync(
    spec.output,
    svg.document(WIDTH, HEIGHT, spec.title ?? "", parts.join("\n"))
  );
  return { output: spec.output };
}

function renderScatter(spec: FigureSpec): RenderResult {
  const table = readTable(requireInput(spec, "convergence"));
  const n = numericColumn(table, "N");
  const sup = numericColumn(table, "sup_l1");
  const points: { logN: number; sup: number }[] = [];
  for (let i = 0; i < n.length; i++) {
    if (Number.isFinite(sup[i]!)) {
      points.push({ logN: Math.log10(n[i]!), sup: sup[i]! });
    }
  }
  if (points.length === 0) {
    throw new Error(`${table.path} has no finite sup_l1 values`);
  }
  const frame = frameFor(
    points.map((p) => p.logN),
    points.map((p) => p.sup)
  );
  frame.xDomain = [frame.xDomain[0] - 0.2, frame.xDomain[1] + 0.2];
  const parts = [
    svg.axes(frame, spec.xLabel ?? "log10 N", spec.yLabel ?? "sup l1 deviation"),
  ];
  for (const p of points) {
    parts.push(svg.circle(frame, p.logN, p.sup, 3.5, `fill="${SIM_COLOR}" opacity="0.7"`));
  }
  // medians per N, joined to show the trend
  const byN = new Map<number, number[]>();
  for (const p of points) {
    const arr = byN.get(p.logN) ?? [];
    arr.push(p.sup);
    byN.set(p.logN, arr);
  }
  const medianPts = [...byN.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([logN, vals]) => {
      const s = [...vals].sort((a, b) => a - b);
      const mid = s.length >> 1;
      const median = s.length % 2 ? s[mid]! : (s[mid - 1]! + s[mid]!) / 2;
      return { logN, median };
    });
  parts.push(
    svg.polyline(
      frame,
      medianPts.map((p) => p.logN),
      medianPts.map((p) => p.median),
      `stroke="${FLOW_COLOR}" stroke-width="1.5" stroke-dasharray="6 4"`
    )
  );
  writeFileSync(
    spec.output,
    svg.document(WIDTH, HEIGHT, spec.title ?? "", parts.join("\n"))
  );
  return { output: spec.output };
}

export function render(spec: FigureSpec): RenderResult {
  switch (spec.kind) {
    case "overlay":
      return renderOverlay(spec);
    case "trace":
      return renderTrace(spec);
    case "composition":
      return renderComposition(spec);
    case "scatter":
      return renderScatter(spec);
    default:
      throw new Error(`unknown figure kind '${(spec as FigureSpec).kind}'`);
  }
}
