import { readFileSync } from "fs";
import Papa from "papaparse";

export interface Table {
  path: string;
  columns: string[];
  rows: string[][];
}

/** Read a harness CSV. Fails loudly on an empty file or a file with no data rows. */
export function readTable(path: string): Table {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  const data = parsed.data;
  if (data.length === 0) {
    throw new Error(`${path} is empty`);
  }
  const columns = data[0]!;
  const rows = data.slice(1);
  if (rows.length === 0) {
    throw new Error(`${path} has no data rows (only a header)`);
  }
  return { path, columns, rows };
}

function columnIndex(table: Table, name: string): number {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(
      `missing column '${name}' in ${table.path} (columns: ${table.columns.join(", ")})`
    );
  }
  return idx;
}

/** One named column as numbers. Empty cells become NaN, like the harness writes them. */
export function numericColumn(table: Table, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row) => {
    const cell = row[idx];
    return cell === undefined || cell === "" ? NaN : Number(cell);
  });
}

export function rawColumn(table: Table, name: string): string[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row) => row[idx] ?? "");
}

/** Names like pi_1, pi_2, ... in index order, possibly none. */
export function prefixedColumns(table: Table, prefix: string): string[] {
  return table.columns
    .filter((c) => c.startsWith(prefix))
    .sort(
      (a, b) => Number(a.slice(prefix.length)) - Number(b.slice(prefix.length))
    );
}
