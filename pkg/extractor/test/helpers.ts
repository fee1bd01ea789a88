import { execFileSync } from 'node:child_process'
import * as fs from 'node:fs'
import * as os from 'node:os'
import * as path from 'node:path'

import * as jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix))
}

/** Deterministic gradient test image; `tone` separates the images visually. */
export function writePng(file: string, size: number, tone: number): void {
  const png = new PNG({ width: size, height: size })
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const i = (size * y + x) << 2
      png.data[i] = Math.floor((x * 255) / size)
      png.data[i + 1] = Math.floor((y * 255) / size)
      png.data[i + 2] = tone & 0xff
      png.data[i + 3] = 255
    }
  }
  fs.writeFileSync(file, PNG.sync.write(png))
}

export function writeJpeg(file: string, size: number, tone: number): void {
  const data = Buffer.alloc(size * size * 4)
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const i = (size * y + x) << 2
      data[i] = (x + tone) & 0xff
      data[i + 1] = (y + tone) & 0xff
      data[i + 2] = tone & 0xff
      data[i + 3] = 255
    }
  }
  fs.writeFileSync(file, jpeg.encode({ data, width: size, height: size }, 90).data)
}

/** Run a snippet of Python against the installed clustering package. */
export function python(code: string): string {
  return execFileSync('python3', ['-c', code], { encoding: 'utf8' })
}

/** Invoke the clustering package's CLI; returns its exit code. */
export function convclust(...args: string[]): number {
  try {
    execFileSync('python3', ['-m', 'convclust.cli', ...args], { stdio: 'pipe' })
    return 0
  } catch (err) {
    return (err as { status?: number }).status ?? -1
  }
}
