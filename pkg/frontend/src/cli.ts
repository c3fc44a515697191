#!/usr/bin/env node
// bscsim-plot plot --kind <kind> --in <csv> --out <svg>

import { readFileSync, writeFileSync } from 'fs';
import { parseCsv } from './csv';
import { renderSvg } from './render';
import { FigureKind, KINDS } from './schema';

function parseArgs(argv: string[]): Record<string, string> {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith('--')) {
      const key = argv[i].slice(2);
      const value = argv[i + 1];
      if (value === undefined || value.startsWith('--')) {
        throw new Error(`flag --${key} needs a value`);
      }
      args[key] = value;
      i++;
    } else if (!args['command']) {
      args['command'] = argv[i];
    } else {
      throw new Error(`unexpected argument: ${argv[i]}`);
    }
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Record<string, string>;
  try {
    args = parseArgs(argv);
    if (args['command'] !== 'plot') {
      throw new Error(`usage: bscsim-plot plot --kind <${KINDS.join('|')}> --in <csv> --out <file>`);
    }
    for (const required of ['kind', 'in', 'out']) {
      if (!args[required]) throw new Error(`missing --${required}`);
    }
    if (!KINDS.includes(args['kind'] as FigureKind)) {
      throw new Error(`unknown figure kind: ${args['kind']}`);
    }
    const table = parseCsv(readFileSync(args['in'], 'utf8'));
    const svg = renderSvg(table, { kind: args['kind'] as FigureKind, title: args['title'] });
    writeFileSync(args['out'], svg);
  } catch (err) {
    console.error(`bscsim-plot: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
