// Minimal reader for bscsim harness CSVs: '#' lines are metadata, the first
// remaining line is the header, fields never contain quotes or commas.

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
  meta: string[];
}

export function parseCsv(text: string): Table {
  const meta: string[] = [];
  const lines = text
    .split(/\r?\n/)
    .filter((line) => {
      if (line.startsWith('#')) {
        meta.push(line.slice(1).trim());
        return false;
      }
      return line.trim().length > 0;
    });
  if (lines.length === 0) {
    throw new Error('empty CSV: no header row');
  }
  const columns = lines[0].split(',').map((c) => c.trim());
  const rows = lines.slice(1).map((line, i) => {
    const parts = line.split(',');
    if (parts.length !== columns.length) {
      throw new Error(`row ${i + 1} has ${parts.length} fields, expected ${columns.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = parts[j].trim()));
    return row;
  });
  if (rows.length === 0) {
    throw new Error('empty CSV: no data rows');
  }
  return { columns, rows, meta };
}

export function numeric(table: Table, column: string): number[] {
  return table.rows.map((r) => Number(r[column]));
}
