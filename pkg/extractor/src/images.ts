/**
 * Image loading and preprocessing for the pretrained network.
 *
 * Images are decoded (PNG or JPEG, sniffed by magic bytes), resized to
 * 224x224 RGB with bilinear interpolation, converted to BGR, and mean-
 * centered with the channel means the network was trained with. The exact
 * constants are exported so the sidecar CSV can record them.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

import type * as tf from '@tensorflow/tfjs'
import * as jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export const INPUT_SIZE = 224
/** Channel means subtracted after RGB->BGR reordering. */
export const MEAN_BGR: readonly [number, number, number] = [103.939, 116.779, 123.68]

export class ImageDecodeError extends Error {}

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

/** Deterministic input order: lexicographically sorted file listing. */
export function listImagesSorted(dir: string): string[] {
  const entries = fs
    .readdirSync(dir)
    .filter((name) => IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase()))
    .sort()
  return entries.map((name) => path.join(dir, name))
}

export function imageId(file: string): string {
  return path.basename(file, path.extname(file))
}

export interface Rgb {
  width: number
  height: number
  /** Interleaved RGB, 3 bytes per pixel, row-major. */
  pixels: Uint8Array
}

export function decodeImage(file: string): Rgb {
  const buf = fs.readFileSync(file)
  if (buf.length >= 8 && buf[0] === 0x89 && buf[1] === 0x50) {
    let png: PNG
    try {
      png = PNG.sync.read(buf)
    } catch (err) {
      throw new ImageDecodeError(`${file}: ${String(err)}`)
    }
    return { width: png.width, height: png.height, pixels: dropAlpha(png.data, 4) }
  }
  if (buf.length >= 3 && buf[0] === 0xff && buf[1] === 0xd8) {
    let decoded: { width: number; height: number; data: Uint8Array }
    try {
      decoded = jpeg.decode(buf, { useTArray: true, formatAsRGBA: true })
    } catch (err) {
      throw new ImageDecodeError(`${file}: ${String(err)}`)
    }
    return { width: decoded.width, height: decoded.height, pixels: dropAlpha(decoded.data, 4) }
  }
  throw new ImageDecodeError(`${file}: not a PNG or JPEG file`)
}

function dropAlpha(data: Uint8Array | Buffer, stride: number): Uint8Array {
  const pixels = data.length / stride
  const out = new Uint8Array(pixels * 3)
  for (let p = 0; p < pixels; p++) {
    out[p * 3] = data[p * stride]
    out[p * 3 + 1] = data[p * stride + 1]
    out[p * 3 + 2] = data[p * stride + 2]
  }
  return out
}

/**
 * Decode and preprocess one image into a [1, 224, 224, 3] float tensor
 * (BGR, mean-subtracted), ready for the network.
 */
export function toInputTensor(tfr: typeof tf, file: string): tf.Tensor4D {
  const img = decodeImage(file)
  return tfr.tidy(() => {
    const raw = tfr.tensor3d(img.pixels, [img.height, img.width, 3], 'float32')
    const resized =
      img.height === INPUT_SIZE && img.width === INPUT_SIZE
        ? raw
        : tfr.image.resizeBilinear(raw as tf.Tensor3D, [INPUT_SIZE, INPUT_SIZE], true)
    const bgr = tfr.reverse(resized, -1)
    const centered = tfr.sub(bgr, tfr.tensor1d(MEAN_BGR as unknown as number[]))
    return tfr.expandDims(centered, 0) as tf.Tensor4D
  })
}
