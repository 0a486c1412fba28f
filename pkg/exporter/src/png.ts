import { readFileSync } from 'fs'
import { PNG } from 'pngjs'

export interface Rgb {
  width: number
  height: number
  /** height * width * 3, row-major */
  pixels: Uint8Array
}

export function readImage(path: string): Rgb {
  let png: PNG
  try {
    png = PNG.sync.read(readFileSync(path))
  } catch (err) {
    throw new Error(`cannot decode ${path}: ${(err as Error).message}`)
  }
  const { width, height, data } = png // RGBA
  const pixels = new Uint8Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    pixels[3 * i] = data[4 * i]
    pixels[3 * i + 1] = data[4 * i + 1]
    pixels[3 * i + 2] = data[4 * i + 2]
  }
  return { width, height, pixels }
}
