import { mkdirSync, writeFileSync } from 'fs';
import { dirname, isAbsolute, resolve } from 'path';

import { numericColumn, readTable } from './csv.js';
import { FigureSpec, loadFigureSpec } from './spec.js';
import { Panel, renderSvg } from './svg.js';

/**
 * Render one figure spec to its SVG output file. Relative input/output paths
 * resolve against `baseDir` (defaults to the working directory). This layer
 * performs no numerics: every plotted value comes straight out of the CSV.
 */
export function renderFigure(spec: FigureSpec, baseDir: string = process.cwd()): string {
  const resolvePath = (p: string) => (isAbsolute(p) ? p : resolve(baseDir, p));

  const panels: Panel[] = spec.panels.map((panel) => {
    const table = readTable(resolvePath(panel.input));
    const x = numericColumn(table, panel.x);
    return {
      title: panel.title,
      xLabel: panel.xLabel ?? panel.x,
      yLabel: panel.yLabel,
      series: panel.series.map((s) => ({
        label: s.label,
        x,
        y: numericColumn(table, s.column),
      })),
    };
  });

  const svg = renderSvg(panels, spec.title);
  const outPath = resolvePath(spec.output);
  mkdirSync(dirname(outPath), { recursive: true });
  writeFileSync(outPath, svg);
  return outPath;
}

export function renderFigureFile(specPath: string): string {
  const spec = loadFigureSpec(specPath);
  // Inputs/outputs in a spec file are relative to the file itself, so spec
  // bundles can be invoked from any working directory.
  return renderFigure(spec, dirname(resolve(specPath)));
}
