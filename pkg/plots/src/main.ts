#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { renderFigureFile } from './render.js';

yargs(hideBin(process.argv))
  .command(
    'render',
    'Render a figure spec (JSON) to an SVG image',
    (y) =>
      y.option('spec', {
        type: 'string',
        demandOption: true,
        describe: 'Path to a figure spec JSON file',
      }),
    (argv) => {
      try {
        const out = renderFigureFile(argv.spec);
        console.log(`wrote ${out}`);
      } catch (err) {
        console.error((err as Error).message);
        process.exit(1);
      }
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parse();
