// Small deterministic SVG builder: no DOM, no randomness, no timestamps, so
// identical inputs always produce byte-identical files.

export interface Frame {
  width: number;
  height: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
  xDomain: [number, number];
  yDomain: [number, number];
}

export function scaleX(frame: Frame, x: number): number {
  const [lo, hi] = frame.xDomain;
  const t = (x - lo) / (hi - lo);
  return frame.left + t * (frame.width - frame.left - frame.right);
}

export function scaleY(frame: Frame, y: number): number {
  const [lo, hi] = frame.yDomain;
  const t = (y - lo) / (hi - lo);
  return frame.height - frame.bottom - t * (frame.height - frame.top - frame.bottom);
}

const px = (v: number): string => v.toFixed(2);

/** Round-number ticks covering the domain: step 1/2/5 x 10^k, at most `count`. */
export function ticks(lo: number, hi: number, count: number): number[] {
  const span = hi - lo;
  if (!(span > 0) || !Number.isFinite(span)) return [lo];
  const rawStep = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= rawStep) {
      step = mag * m;
      break;
    }
  }
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(0).replace("+", "");
  return String(Number(v.toPrecision(6)));
}

export function polyline(
  frame: Frame,
  xs: number[],
  ys: number[],
  attrs: string
): string {
  const pts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const x = xs[i]!;
    const y = ys[i]!;
    if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
    pts.push(`${px(scaleX(frame, x))},${px(scaleY(frame, y))}`);
  }
  return `<polyline fill="none" ${attrs} points="${pts.join(" ")}"/>`;
}

export function circle(frame: Frame, x: number, y: number, r: number, attrs: string): string {
  return `<circle cx="${px(scaleX(frame, x))}" cy="${px(scaleY(frame, y))}" r="${r}" ${attrs}/>`;
}

export function rect(
  x: number,
  y: number,
  w: number,
  h: number,
  attrs: string
): string {
  return `<rect x="${px(x)}" y="${px(y)}" width="${px(w)}" height="${px(h)}" ${attrs}/>`;
}

export function text(x: number, y: number, s: string, attrs: string): string {
  return `<text x="${px(x)}" y="${px(y)}" ${attrs}>${escapeXml(s)}</text>`;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function axes(frame: Frame, xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  const x0 = frame.left;
  const x1 = frame.width - frame.right;
  const y0 = frame.height - frame.bottom;
  const y1 = frame.top;
  parts.push(
    `<line x1="${px(x0)}" y1="${px(y0)}" x2="${px(x1)}" y2="${px(y0)}" stroke="black"/>`,
    `<line x1="${px(x0)}" y1="${px(y0)}" x2="${px(x0)}" y2="${px(y1)}" stroke="black"/>`
  );
  for (const v of ticks(frame.xDomain[0], frame.xDomain[1], 8)) {
    const x = scaleX(frame, v);
    parts.push(
      `<line x1="${px(x)}" y1="${px(y0)}" x2="${px(x)}" y2="${px(y0 + 4)}" stroke="black"/>`,
      text(x, y0 + 16, tickLabel(v), 'text-anchor="middle" font-size="10"')
    );
  }
  for (const v of ticks(frame.yDomain[0], frame.yDomain[1], 6)) {
    const y = scaleY(frame, v);
    parts.push(
      `<line x1="${px(x0 - 4)}" y1="${px(y)}" x2="${px(x0)}" y2="${px(y)}" stroke="black"/>`,
      text(x0 - 7, y + 3, tickLabel(v), 'text-anchor="end" font-size="10"')
    );
  }
  parts.push(
    text((x0 + x1) / 2, frame.height - 6, xLabel, 'text-anchor="middle" font-size="11"'),
    `<text x="12" y="${px((y0 + y1) / 2)}" text-anchor="middle" font-size="11" transform="rotate(-90 12 ${px((y0 + y1) / 2)})">${escapeXml(yLabel)}</text>`
  );
  return parts.join("\n");
}

export function document(
  width: number,
  height: number,
  title: string,
  body: string
): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif">`;
  const caption = title
    ? text(width / 2, 16, title, 'text-anchor="middle" font-size="13"')
    : "";
  return [head, `<rect width="${width}" height="${height}" fill="white"/>`, caption, body, "</svg>", ""].join("\n");
}
