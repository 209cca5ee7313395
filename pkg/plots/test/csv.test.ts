import { describe, expect, it } from 'vitest';

import { numericColumn, parseCsv } from '../src/csv.js';

describe('parseCsv', () => {
  it('skips version comment lines and reads the header', () => {
    const table = parseCsv('# contagion-hjb v0.1.0\na,b\n1,2\n3,4\n', 'x.csv');
    expect(table.columns).toEqual(['a', 'b']);
    expect(table.cells).toHaveLength(2);
  });

  it('rejects an empty file', () => {
    expect(() => parseCsv('', 'x.csv')).toThrow(/empty CSV/);
    expect(() => parseCsv('# only a comment\n', 'x.csv')).toThrow(/empty CSV/);
  });

  it('rejects a header-only file', () => {
    expect(() => parseCsv('a,b\n', 'x.csv')).toThrow(/header only/);
  });

  it('rejects ragged rows', () => {
    expect(() => parseCsv('a,b\n1,2,3\n', 'x.csv')).toThrow(/ragged/);
  });
});

describe('numericColumn', () => {
  const table = parseCsv('a,b\n1,2\n3,nope\n', 'y.csv');

  it('extracts numbers by name', () => {
    expect(numericColumn(table, 'a')).toEqual([1, 3]);
  });

  it('names a missing column and lists what exists', () => {
    expect(() => numericColumn(table, 'zz')).toThrow(/column "zz" not found in y.csv \(have: a, b\)/);
  });

  it('names a non-numeric cell', () => {
    expect(() => numericColumn(table, 'b')).toThrow(/non-numeric value "nope" in column "b" row 2/);
  });
});
