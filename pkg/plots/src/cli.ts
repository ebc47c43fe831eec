// Batch renderer: node dist/cli.js spec.json [more-specs.json ...]
// Each file holds one FigureSpec or an array of them. Paths inside a spec are
// resolved relative to the current working directory.

import { readFileSync } from "fs";
import { FigureSpec, render } from "./figures.js";

function loadSpecs(path: string): FigureSpec[] {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    throw new Error(`cannot read spec ${path}: ${(err as Error).message}`);
  }
  return Array.isArray(parsed) ? (parsed as FigureSpec[]) : [parsed as FigureSpec];
}

function main(argv: string[]): number {
  if (argv.length === 0) {
    console.error("usage: cli.js <figure-spec.json> [...]");
    return 2;
  }
  for (const path of argv) {
    for (const spec of loadSpecs(path)) {
      const result = render(spec);
      if (result.supGap !== undefined) {
        // full precision so the number can be checked against report.json
        console.log(`${spec.output}: sup gap ${result.supGap.toPrecision(17)}`);
      } else {
        console.log(result.output);
      }
    }
  }
  return 0;
}

try {
  process.exitCode = main(process.argv.slice(2));
} catch (err) {
  console.error(`error: ${(err as Error).message}`);
  process.exitCode = 1;
}
