import { readFileSync } from 'fs';

export interface Table {
  source: string;
  columns: string[];
  cells: string[][];
}

/**
 * Parse a solver CSV artifact. Leading `#` comment lines (the version header)
 * are skipped; the first remaining line is the column header.
 */
export function parseCsv(text: string, source: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.length > 0 && !line.startsWith('#'));
  if (lines.length === 0) {
    throw new Error(`empty CSV: ${source}`);
  }
  const columns = lines[0].split(',');
  const cells = lines.slice(1).map((line) => line.split(','));
  if (cells.length === 0) {
    throw new Error(`empty CSV (header only): ${source}`);
  }
  for (const [i, row] of cells.entries()) {
    if (row.length !== columns.length) {
      throw new Error(
        `ragged CSV row ${i + 1} in ${source}: ${row.length} cells for ${columns.length} columns`,
      );
    }
  }
  return { source, columns, cells };
}

export function readTable(path: string): Table {
  return parseCsv(readFileSync(path, 'utf8'), path);
}

/** Numeric values of one named column; errors name the column and file. */
export function numericColumn(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(
      `column "${name}" not found in ${table.source} (have: ${table.columns.join(', ')})`,
    );
  }
  return table.cells.map((row, i) => {
    const value = Number(row[idx]);
    if (!Number.isFinite(value)) {
      throw new Error(`non-numeric value "${row[idx]}" in column "${name}" row ${i + 1} of ${table.source}`);
    }
    return value;
  });
}
