/**
 * VGG16 (configuration D) architecture, weight-layer addressing, and taps.
 *
 * Layers are addressed by weight-layer ordinal 1..16 (13 convolutions, then
 * 3 fully connected layers), the counting scheme commonly used when talking
 * about "layer 10 of 16". Activations are taken after the nonlinearity; at
 * the five pooling boundaries both the pre-pool and post-pool tap are
 * available since downstream spatial analysis may want either resolution.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

import * as tf from '@tensorflow/tfjs'

import { INPUT_SIZE } from './images'

export class ModelUnavailableError extends Error {}

export type Tap = 'pre-pool' | 'post-pool'

export interface WeightLayer {
  ordinal: number
  name: string
  kind: 'conv' | 'fc'
  filters: number
  /** Name of the pooling layer that immediately follows, if any. */
  pool?: string
}

/** Weight-layer ordinals of configuration D: 2+2+3+3+3 convolutions, 3 FC. */
export const LAYER_TABLE: readonly WeightLayer[] = [
  { ordinal: 1, name: 'block1_conv1', kind: 'conv', filters: 64 },
  { ordinal: 2, name: 'block1_conv2', kind: 'conv', filters: 64, pool: 'block1_pool' },
  { ordinal: 3, name: 'block2_conv1', kind: 'conv', filters: 128 },
  { ordinal: 4, name: 'block2_conv2', kind: 'conv', filters: 128, pool: 'block2_pool' },
  { ordinal: 5, name: 'block3_conv1', kind: 'conv', filters: 256 },
  { ordinal: 6, name: 'block3_conv2', kind: 'conv', filters: 256 },
  { ordinal: 7, name: 'block3_conv3', kind: 'conv', filters: 256, pool: 'block3_pool' },
  { ordinal: 8, name: 'block4_conv1', kind: 'conv', filters: 512 },
  { ordinal: 9, name: 'block4_conv2', kind: 'conv', filters: 512 },
  { ordinal: 10, name: 'block4_conv3', kind: 'conv', filters: 512, pool: 'block4_pool' },
  { ordinal: 11, name: 'block5_conv1', kind: 'conv', filters: 512 },
  { ordinal: 12, name: 'block5_conv2', kind: 'conv', filters: 512 },
  { ordinal: 13, name: 'block5_conv3', kind: 'conv', filters: 512, pool: 'block5_pool' },
  { ordinal: 14, name: 'fc1', kind: 'fc', filters: 4096 },
  { ordinal: 15, name: 'fc2', kind: 'fc', filters: 4096 },
  { ordinal: 16, name: 'predictions', kind: 'fc', filters: 1000 },
]

export function layerByOrdinal(ordinal: number): WeightLayer {
  const entry = LAYER_TABLE.find((l) => l.ordinal === ordinal)
  if (!entry) {
    throw new RangeError(`layer ordinal must be 1..16, got ${ordinal}`)
  }
  return entry
}

/** Parse "10", "conv10", or "fc14" into a validated ordinal. */
export function parseLayerSelector(text: string): WeightLayer {
  const match = /^(conv|fc)?(\d+)$/.exec(text.trim())
  if (!match) {
    throw new RangeError(`bad layer selector '${text}': expected e.g. 10, conv10, or fc14`)
  }
  const entry = layerByOrdinal(Number.parseInt(match[2], 10))
  if (match[1] && match[1] !== entry.kind) {
    throw new RangeError(`layer ${entry.ordinal} is a ${entry.kind} layer, not ${match[1]}`)
  }
  return entry
}

/**
 * Build the architecture with seeded random parameters. Used for shape and
 * pipeline testing when pretrained weights are not on disk; outputs are
 * deterministic for a fixed seed but carry no learned semantics.
 */
export function buildVgg16(options: { seed?: number } = {}): tf.LayersModel {
  const seed = options.seed ?? 0
  let next = seed
  const init = () => tf.initializers.glorotUniform({ seed: next++ })

  const model = tf.sequential({ name: 'vgg16' })
  let first = true
  for (const entry of LAYER_TABLE) {
    if (entry.kind === 'conv') {
      model.add(
        tf.layers.conv2d({
          name: entry.name,
          filters: entry.filters,
          kernelSize: 3,
          padding: 'same',
          activation: 'relu',
          kernelInitializer: init(),
          ...(first ? { inputShape: [INPUT_SIZE, INPUT_SIZE, 3] } : {}),
        }),
      )
      first = false
      if (entry.pool) {
        model.add(tf.layers.maxPooling2d({ name: entry.pool, poolSize: 2, strides: 2 }))
      }
    } else {
      if (entry.name === 'fc1') {
        model.add(tf.layers.flatten({ name: 'flatten' }))
      }
      model.add(
        tf.layers.dense({
          name: entry.name,
          units: entry.filters,
          activation: entry.name === 'predictions' ? 'softmax' : 'relu',
          kernelInitializer: init(),
        }),
      )
    }
  }
  return model
}

/** IO handler that reads/writes tfjs-layers artifacts on the local disk. */
export function fileIoHandler(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const dir = path.dirname(modelJsonPath)
      const manifest = JSON.parse(fs.readFileSync(modelJsonPath, 'utf8'))
      const specs: tf.io.WeightsManifestEntry[] = []
      const chunks: Buffer[] = []
      for (const group of manifest.weightsManifest ?? []) {
        specs.push(...group.weights)
        for (const rel of group.paths) {
          chunks.push(fs.readFileSync(path.join(dir, rel)))
        }
      }
      const joined = Buffer.concat(chunks)
      return {
        modelTopology: manifest.modelTopology,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
        convertedBy: manifest.convertedBy,
        weightSpecs: specs,
        weightData: joined.buffer.slice(joined.byteOffset, joined.byteOffset + joined.byteLength),
      }
    },
    save: async (artifacts: tf.io.ModelArtifacts) => {
      const dir = path.dirname(modelJsonPath)
      fs.mkdirSync(dir, { recursive: true })
      const weightsName = 'weights.bin'
      const data = artifacts.weightData as ArrayBuffer
      fs.writeFileSync(path.join(dir, weightsName), Buffer.from(data))
      const manifest = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy,
        weightsManifest: [{ paths: [weightsName], weights: artifacts.weightSpecs }],
      }
      fs.writeFileSync(modelJsonPath, JSON.stringify(manifest))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON' as const,
        },
      }
    },
  }
}

/** Load pretrained weights from a tfjs-layers artifact on disk. */
export async function loadVgg16(modelJsonPath: string): Promise<tf.LayersModel> {
  if (!fs.existsSync(modelJsonPath)) {
    throw new ModelUnavailableError(
      `pretrained weights not found at ${modelJsonPath}; ` +
        'pass --weights <model.json> or use --random-init for shape-only runs',
    )
  }
  let model: tf.LayersModel
  try {
    model = await tf.loadLayersModel(fileIoHandler(modelJsonPath))
  } catch (err) {
    throw new ModelUnavailableError(`${modelJsonPath}: ${String(err)}`)
  }
  for (const entry of LAYER_TABLE) {
    try {
      model.getLayer(entry.name)
    } catch {
      throw new ModelUnavailableError(
        `${modelJsonPath}: artifact has no layer ${entry.name}; not a configuration-D model`,
      )
    }
  }
  return model
}

/** Sub-model ending at the requested tap point. */
export function tapModel(model: tf.LayersModel, entry: WeightLayer, tap: Tap): tf.LayersModel {
  let outputLayer = entry.name
  if (tap === 'post-pool') {
    if (!entry.pool) {
      throw new RangeError(`layer ${entry.ordinal} (${entry.name}) has no following pool stage`)
    }
    outputLayer = entry.pool
  }
  const output = model.getLayer(outputLayer).output as tf.SymbolicTensor
  return tf.model({ inputs: model.inputs, outputs: output })
}
