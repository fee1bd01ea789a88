/**
 * Extraction pipeline: images -> chosen-layer activations -> NPY + ids CSV.
 *
 * Convolutional taps are written as rank-4 (n, c, h, w) tensors, fully
 * connected taps as rank-2 (n, d); both in the NPY subset the clustering
 * package reads. Row order follows the lexicographically sorted image
 * listing, and the sidecar CSV records one image id per tensor row plus the
 * preprocessing constants in a leading comment.
 */

import * as fs from 'node:fs'

import * as tf from '@tensorflow/tfjs'

import { imageId, INPUT_SIZE, listImagesSorted, MEAN_BGR, toInputTensor } from './images'
import { writeNpy } from './npy'
import { tapModel, type Tap, type WeightLayer } from './vgg16'

export interface ExtractionRequest {
  imagesDir: string
  layer: WeightLayer
  tap: Tap
  outputPath: string
  idsPath: string
}

export interface ExtractionResult {
  shape: number[]
  imageIds: string[]
}

export async function runExtraction(
  model: tf.LayersModel,
  req: ExtractionRequest,
): Promise<ExtractionResult> {
  const files = listImagesSorted(req.imagesDir)
  if (files.length === 0) {
    throw new Error(`no .png/.jpg images found in ${req.imagesDir}`)
  }
  const sub = tapModel(model, req.layer, req.tap)

  const rows: Float32Array[] = []
  let rowShape: number[] | null = null
  for (const file of files) {
    const input = toInputTensor(tf, file)
    const out = tf.tidy(() => {
      const activation = sub.predict(input) as tf.Tensor
      // network tensors are NHWC; the interchange layout is NCHW
      return activation.rank === 4 ? tf.transpose(activation, [0, 3, 1, 2]) : activation
    })
    input.dispose()
    const shape = out.shape.slice(1)
    if (rowShape === null) {
      rowShape = shape
    }
    rows.push((await out.data()) as Float32Array)
    out.dispose()
  }

  const perRow = rowShape!.reduce((a, b) => a * b, 1)
  const all = new Float32Array(files.length * perRow)
  rows.forEach((row, i) => all.set(row, i * perRow))
  const shape = [files.length, ...rowShape!]
  writeNpy(req.outputPath, all, shape)

  const ids = files.map(imageId)
  const header =
    `# preprocessing: resize=${INPUT_SIZE}x${INPUT_SIZE} bilinear rgb; order=bgr; ` +
    `mean_bgr=${MEAN_BGR.join(',')}; layer=${req.layer.ordinal} (${req.layer.name}); ` +
    `tap=post-relu${req.tap === 'post-pool' ? '+pool' : ''}\n`
  fs.writeFileSync(req.idsPath, header + 'image_id\n' + ids.map((s) => s + '\n').join(''))
  return { shape, imageIds: ids }
}
