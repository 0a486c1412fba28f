import { mkdtempSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { PNG } from 'pngjs'

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix))
}

/** Quadrant test card with a diagonal gradient; variant shifts the colors. */
export function writeTestCard(path: string, width = 224, height = 224, variant = 0): void {
  const png = new PNG({ width, height })
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4
      png.data[i] = (x < width / 2 ? 200 : 30) ^ variant
      png.data[i + 1] = (y < height / 2 ? 180 : 60) ^ variant
      png.data[i + 2] = (x + y + variant) % 256
      png.data[i + 3] = 255
    }
  }
  writeFileSync(path, PNG.sync.write(png))
}

export function writeFlatImage(path: string, width: number, height: number, rgb: [number, number, number]): void {
  const png = new PNG({ width, height })
  for (let i = 0; i < width * height; i++) {
    png.data[4 * i] = rgb[0]
    png.data[4 * i + 1] = rgb[1]
    png.data[4 * i + 2] = rgb[2]
    png.data[4 * i + 3] = 255
  }
  writeFileSync(path, PNG.sync.write(png))
}
