/**
 * Dependency-free SVG line charts. Everything is emitted deterministically
 * (fixed layout, fixed palette, fixed number formatting) so re-rendering the
 * same inputs reproduces the file byte for byte.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface Panel {
  title?: string;
  xLabel?: string;
  yLabel?: string;
  series: Series[];
}

const PANEL_W = 520;
const PANEL_H = 360;
const MARGIN = { left: 70, right: 18, top: 40, bottom: 52 };
const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#17becf', '#7f7f7f'];

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function fmt(value: number): string {
  if (value === 0) return '0';
  const magnitude = Math.abs(value);
  if (magnitude >= 1e4 || magnitude < 1e-3) return value.toExponential(2);
  return Number(value.toPrecision(6)).toString();
}

/** Tick positions at 1/2/5 steps covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, target = 6): number[] {
  if (!(hi > lo)) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.1 : 1;
    lo -= pad;
    hi += pad;
  }
  const rawStep = (hi - lo) / target;
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 5, 10].map((m) => m * power);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[3];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

interface Extent {
  lo: number;
  hi: number;
}

function extent(values: number[], padFraction: number): Extent {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.1 : 1;
    return { lo: lo - pad, hi: hi + pad };
  }
  const pad = (hi - lo) * padFraction;
  return { lo: lo - pad, hi: hi + pad };
}

function renderPanel(panel: Panel, originX: number, originY: number, index: number): string {
  const plotW = PANEL_W - MARGIN.left - MARGIN.right;
  const plotH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const allX = panel.series.flatMap((s) => s.x);
  const allY = panel.series.flatMap((s) => s.y);
  const xr = extent(allX, 0.02);
  const yr = extent(allY, 0.06);
  const sx = (v: number) => originX + MARGIN.left + ((v - xr.lo) / (xr.hi - xr.lo)) * plotW;
  const sy = (v: number) => originY + MARGIN.top + plotH - ((v - yr.lo) / (yr.hi - yr.lo)) * plotH;

  const parts: string[] = [];
  parts.push(`<g class="panel" data-panel="${index}">`);

  const axisColor = '#333333';
  const gridColor = '#dddddd';
  const left = originX + MARGIN.left;
  const bottom = originY + MARGIN.top + plotH;
  const right = left + plotW;
  const top = originY + MARGIN.top;

  for (const tick of niceTicks(xr.lo, xr.hi)) {
    const x = sx(tick);
    parts.push(`<line x1="${x.toFixed(2)}" y1="${top}" x2="${x.toFixed(2)}" y2="${bottom}" stroke="${gridColor}" stroke-width="0.5"/>`);
    parts.push(`<text x="${x.toFixed(2)}" y="${bottom + 18}" text-anchor="middle" font-size="11" fill="${axisColor}">${fmt(tick)}</text>`);
  }
  for (const tick of niceTicks(yr.lo, yr.hi)) {
    const y = sy(tick);
    parts.push(`<line x1="${left}" y1="${y.toFixed(2)}" x2="${right}" y2="${y.toFixed(2)}" stroke="${gridColor}" stroke-width="0.5"/>`);
    parts.push(`<text x="${left - 6}" y="${(y + 4).toFixed(2)}" text-anchor="end" font-size="11" fill="${axisColor}">${fmt(tick)}</text>`);
  }
  parts.push(`<line x1="${left}" y1="${bottom}" x2="${right}" y2="${bottom}" stroke="${axisColor}" stroke-width="1"/>`);
  parts.push(`<line x1="${left}" y1="${top}" x2="${left}" y2="${bottom}" stroke="${axisColor}" stroke-width="1"/>`);

  panel.series.forEach((series, k) => {
    const color = PALETTE[k % PALETTE.length];
    const points = series.x
      .map((xv, i) => `${sx(xv).toFixed(2)},${sy(series.y[i]).toFixed(2)}`)
      .join(' ');
    parts.push(
      `<polyline class="series" data-label="${escapeXml(series.label)}" points="${points}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
    for (let i = 0; i < series.x.length; i++) {
      parts.push(
        `<circle cx="${sx(series.x[i]).toFixed(2)}" cy="${sy(series.y[i]).toFixed(2)}" r="2.4" fill="${color}"/>`,
      );
    }
  });

  // Legend, one row per series, inside the top-right of the plot area.
  panel.series.forEach((series, k) => {
    const color = PALETTE[k % PALETTE.length];
    const ly = top + 14 + 16 * k;
    const lx = right - 150;
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${lx + 28}" y="${ly}" font-size="11" fill="${axisColor}" class="legend">${escapeXml(series.label)}</text>`);
  });

  if (panel.title) {
    parts.push(
      `<text x="${originX + PANEL_W / 2}" y="${originY + 20}" text-anchor="middle" font-size="13" font-weight="bold" fill="${axisColor}" class="panel-title">${escapeXml(panel.title)}</text>`,
    );
  }
  if (panel.xLabel) {
    parts.push(
      `<text x="${left + plotW / 2}" y="${bottom + 38}" text-anchor="middle" font-size="12" fill="${axisColor}" class="x-label">${escapeXml(panel.xLabel)}</text>`,
    );
  }
  if (panel.yLabel) {
    const cx = originX + 16;
    const cy = top + plotH / 2;
    parts.push(
      `<text x="${cx}" y="${cy}" text-anchor="middle" font-size="12" fill="${axisColor}" class="y-label" transform="rotate(-90 ${cx} ${cy})">${escapeXml(panel.yLabel)}</text>`,
    );
  }
  parts.push('</g>');
  return parts.join('\n');
}

/** Render panels in a grid (two per row) into one standalone SVG document. */
export function renderSvg(panels: Panel[], title?: string): string {
  const columns = Math.min(2, panels.length);
  const rows = Math.ceil(panels.length / columns);
  const titlePad = title ? 30 : 0;
  const width = columns * PANEL_W;
  const height = rows * PANEL_H + titlePad;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (title) {
    parts.push(
      `<text x="${width / 2}" y="22" text-anchor="middle" font-size="15" font-weight="bold" fill="#222222" class="figure-title">${escapeXml(title)}</text>`,
    );
  }
  panels.forEach((panel, i) => {
    const originX = (i % columns) * PANEL_W;
    const originY = titlePad + Math.floor(i / columns) * PANEL_H;
    parts.push(renderPanel(panel, originX, originY, i));
  });
  parts.push('</svg>');
  parts.push('');
  return parts.join('\n');
}
