#!/usr/bin/env node
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { runExport } from './export'

export function main(argv: string[]): number {
  const args = yargs(argv)
    .command('export', 'encode images and prompts into tensor files plus a scene manifest')
    .demandCommand(1)
    .option('images', { type: 'string', array: true, demandOption: true, describe: 'input PNG files' })
    .option('prompts', { type: 'string', array: true, default: [] as string[], describe: 'positive prompt strings' })
    .option('negatives', { type: 'string', array: true, default: [] as string[], describe: 'negative prompt strings' })
    .option('out', { type: 'string', demandOption: true, describe: 'output directory' })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new Error(msg)
    })
    .parseSync()

  const result = runExport({
    images: args.images,
    prompts: args.prompts,
    negatives: args.negatives,
    outDir: args.out,
  })
  for (const file of result.files) console.log(`wrote ${file}`)
  console.log(`wrote ${result.manifestPath}`)
  return 0
}

if (require.main === module) {
  try {
    process.exitCode = main(hideBin(process.argv))
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    process.exitCode = 1
  }
}
