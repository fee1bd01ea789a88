/**
 * Minimal NPY v1.0 writer for float32 activation tensors.
 *
 * Layout: magic 0x93 "NUMPY", version 1.0, little-endian u16 header length,
 * then the header dict text padded with spaces so the whole block is a
 * multiple of 64 bytes and ends with a newline, then raw little-endian
 * float32 scalars in C order. This is the exact subset the downstream
 * clustering package accepts.
 */

import * as fs from 'node:fs'

const MAGIC = Buffer.from([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]) // \x93NUMPY
const HEADER_ALIGN = 64

export function npyHeader(shape: readonly number[]): Buffer {
  const shapeText = `(${shape.join(', ')}${shape.length === 1 ? ',' : ''})`
  const dict = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeText}, }`
  const unpadded = MAGIC.length + 2 + 2 + dict.length + 1
  const pad = (HEADER_ALIGN - (unpadded % HEADER_ALIGN)) % HEADER_ALIGN
  const text = dict + ' '.repeat(pad) + '\n'

  const head = Buffer.alloc(MAGIC.length + 4)
  MAGIC.copy(head, 0)
  head[6] = 1
  head[7] = 0
  head.writeUInt16LE(text.length, 8)
  return Buffer.concat([head, Buffer.from(text, 'latin1')])
}

export function encodeNpy(data: Float32Array, shape: readonly number[]): Buffer {
  const count = shape.reduce((a, b) => a * b, 1)
  if (shape.length === 0 || shape.some((s) => !Number.isInteger(s) || s <= 0)) {
    throw new Error(`invalid shape [${shape.join(', ')}]: extents must be positive integers`)
  }
  if (count !== data.length) {
    throw new Error(`shape [${shape.join(', ')}] wants ${count} values, got ${data.length}`)
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new Error(`non-finite value at flat index ${i}`)
    }
  }
  // Float32Array is native-endian; every supported Node target is little-endian,
  // but write through a DataView so the file is correct regardless.
  const payload = Buffer.alloc(data.length * 4)
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength)
  for (let i = 0; i < data.length; i++) {
    view.setFloat32(i * 4, data[i], true)
  }
  return Buffer.concat([npyHeader(shape), payload])
}

export function writeNpy(path: string, data: Float32Array, shape: readonly number[]): void {
  fs.writeFileSync(path, encodeNpy(data, shape))
}

/** Parse just the header of an NPY buffer (used by the test suite). */
export function parseNpyHeader(buf: Buffer): {
  descr: string
  fortranOrder: boolean
  shape: number[]
  dataOffset: number
} {
  if (!buf.subarray(0, 6).equals(MAGIC)) throw new Error('magic mismatch')
  const major = buf[6]
  const headerLen = major === 1 ? buf.readUInt16LE(8) : buf.readUInt32LE(8)
  const start = major === 1 ? 10 : 12
  const text = buf.subarray(start, start + headerLen).toString('latin1')
  const descr = /'descr':\s*'([^']+)'/.exec(text)?.[1]
  const fortran = /'fortran_order':\s*(True|False)/.exec(text)?.[1]
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(text)?.[1]
  if (!descr || !fortran || shapeText === undefined) throw new Error(`unparsable header: ${text}`)
  const shape = shapeText
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => Number.parseInt(s, 10))
  return { descr, fortranOrder: fortran === 'True', shape, dataOffset: start + headerLen }
}
