#!/usr/bin/env node
/**
 * extract --images <dir> --layer <spec> --out <npy> --ids <csv>
 *         [--weights <model.json>] [--random-init <seed>]
 *         [--tap pre-pool|post-pool] [--backend wasm|cpu]
 *
 * Exit codes: 0 success, 1 usage error, 2 data/image error, 3 pretrained
 * model unavailable. Diagnostics go to stderr.
 */

import * as path from 'node:path'
import { parseArgs } from 'node:util'

import * as tf from '@tensorflow/tfjs'

import { ImageDecodeError } from './images'
import { runExtraction } from './extract'
import {
  buildVgg16,
  loadVgg16,
  ModelUnavailableError,
  parseLayerSelector,
  type Tap,
} from './vgg16'

class UsageError extends Error {}

async function selectBackend(requested: string): Promise<void> {
  if (requested === 'wasm') {
    try {
      const wasm = await import('@tensorflow/tfjs-backend-wasm')
      wasm.setWasmPaths(
        path.join(path.dirname(require.resolve('@tensorflow/tfjs-backend-wasm')), '/'),
      )
      if (await tf.setBackend('wasm')) {
        await tf.ready()
        return
      }
    } catch (err) {
      console.error(`wasm backend unavailable (${String(err).slice(0, 120)}), using cpu`)
    }
  }
  await tf.setBackend('cpu')
  await tf.ready()
}

export async function main(argv: string[]): Promise<number> {
  let parsed
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        images: { type: 'string' },
        layer: { type: 'string' },
        out: { type: 'string' },
        ids: { type: 'string' },
        weights: { type: 'string' },
        'random-init': { type: 'string' },
        tap: { type: 'string', default: 'pre-pool' },
        backend: { type: 'string', default: 'wasm' },
      },
      allowPositionals: true,
    })
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`)
    return 1
  }
  const opts = parsed.values

  try {
    if (parsed.positionals.length > 1 || (parsed.positionals[0] ?? 'extract') !== 'extract') {
      throw new UsageError(`unknown command ${parsed.positionals.join(' ')}`)
    }
    for (const flag of ['images', 'layer', 'out', 'ids'] as const) {
      if (!opts[flag]) throw new UsageError(`--${flag} is required`)
    }
    if (opts.tap !== 'pre-pool' && opts.tap !== 'post-pool') {
      throw new UsageError(`--tap must be pre-pool or post-pool, got ${opts.tap}`)
    }
    if (opts.weights && opts['random-init'] !== undefined) {
      throw new UsageError('--weights and --random-init are mutually exclusive')
    }

    let layer
    try {
      layer = parseLayerSelector(opts.layer!)
    } catch (err) {
      throw new UsageError((err as Error).message)
    }
    if (opts.tap === 'post-pool' && !layer.pool) {
      throw new UsageError(`layer ${layer.ordinal} (${layer.name}) has no pool stage`)
    }

    await selectBackend(opts.backend!)

    let model: tf.LayersModel
    if (opts['random-init'] !== undefined) {
      const seed = Number.parseInt(opts['random-init'], 10)
      if (!Number.isFinite(seed)) throw new UsageError('--random-init needs an integer seed')
      console.error(
        'random-init: running with seeded random parameters; ' +
          'outputs have correct shapes but no learned semantics',
      )
      model = buildVgg16({ seed })
    } else {
      model = await loadVgg16(opts.weights ?? 'vgg16/model.json')
    }

    const result = await runExtraction(model, {
      imagesDir: opts.images!,
      layer,
      tap: opts.tap as Tap,
      outputPath: opts.out!,
      idsPath: opts.ids!,
    })
    console.error(
      `extracted ${result.imageIds.length} image(s) -> ${opts.out} shape (${result.shape.join(', ')})`,
    )
    return 0
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`)
      return 1
    }
    if (err instanceof ModelUnavailableError) {
      console.error(`model unavailable: ${err.message}`)
      return 3
    }
    if (err instanceof ImageDecodeError) {
      console.error(`image error: ${err.message}`)
      return 2
    }
    console.error(`error: ${(err as Error).message}`)
    return 2
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
