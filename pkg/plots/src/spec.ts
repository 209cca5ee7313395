import { readFileSync } from 'fs';

export interface SeriesSpec {
  column: string;
  label: string;
}

export interface PanelSpec {
  input: string;
  x: string;
  series: SeriesSpec[];
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

export interface FigureSpec {
  output: string;
  title?: string;
  panels: PanelSpec[];
}

interface RawSeries {
  column?: unknown;
  label?: unknown;
}

interface RawPanel {
  input?: unknown;
  x?: unknown;
  series?: unknown;
  title?: unknown;
  x_label?: unknown;
  y_label?: unknown;
}

function asString(value: unknown, what: string): string {
  if (typeof value !== 'string' || value.length === 0) {
    throw new Error(`figure spec: ${what} must be a non-empty string`);
  }
  return value;
}

function parseSeries(raw: unknown, where: string): SeriesSpec[] {
  if (!Array.isArray(raw) || raw.length === 0) {
    throw new Error(`figure spec: ${where} needs a non-empty "series" array`);
  }
  return raw.map((entry: RawSeries, i) => {
    const column = asString(entry.column, `${where} series[${i}].column`);
    const label = entry.label === undefined ? column : asString(entry.label, `${where} series[${i}].label`);
    return { column, label };
  });
}

function parsePanel(raw: RawPanel, fallbackInput: string | undefined, where: string): PanelSpec {
  const input = raw.input === undefined ? fallbackInput : asString(raw.input, `${where}.input`);
  if (input === undefined) {
    throw new Error(`figure spec: ${where} has no "input" CSV (set it on the panel or at top level)`);
  }
  return {
    input,
    x: asString(raw.x, `${where}.x`),
    series: parseSeries(raw.series, where),
    title: raw.title === undefined ? undefined : asString(raw.title, `${where}.title`),
    xLabel: raw.x_label === undefined ? undefined : asString(raw.x_label, `${where}.x_label`),
    yLabel: raw.y_label === undefined ? undefined : asString(raw.y_label, `${where}.y_label`),
  };
}

/**
 * Load a figure spec. Either a flat single-panel form (x/series at top level)
 * or a multi-panel form with a "panels" array; panels inherit the top-level
 * "input" unless they override it.
 */
export function parseFigureSpec(json: string, source: string): FigureSpec {
  let raw: Record<string, unknown>;
  try {
    raw = JSON.parse(json);
  } catch (err) {
    throw new Error(`figure spec ${source} is not valid JSON: ${(err as Error).message}`);
  }
  const output = asString(raw.output, 'output');
  const title = raw.title === undefined ? undefined : asString(raw.title, 'title');
  const fallbackInput = raw.input === undefined ? undefined : asString(raw.input, 'input');

  let panels: PanelSpec[];
  if (raw.panels !== undefined) {
    if (!Array.isArray(raw.panels) || raw.panels.length === 0) {
      throw new Error('figure spec: "panels" must be a non-empty array');
    }
    panels = raw.panels.map((p: RawPanel, i) => parsePanel(p, fallbackInput, `panels[${i}]`));
  } else {
    panels = [parsePanel(raw as RawPanel, fallbackInput, 'top level')];
  }
  return { output, title, panels };
}

export function loadFigureSpec(path: string): FigureSpec {
  return parseFigureSpec(readFileSync(path, 'utf8'), path);
}
