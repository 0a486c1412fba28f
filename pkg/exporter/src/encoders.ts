// Deterministic stand-in feature towers with the interface of the real
// thing: fixed patch arithmetic, fixed channel counts, content-derived
// patch features, and a text tower with unit-normalized vectors. Swapping
// in neural encoders means replacing these three functions and nothing else;
// all alignment math lives downstream in the pipeline that consumes the
// exported files.

import { Tensor } from './otf'
import { Rgb } from './png'
import { gaussian, rngFromString } from './rng'

export const VISION_PATCH = 14
export const VISION_CHANNELS = 384
export const VL_PATCH = 16
export const VL_CHANNELS = 512

const STATS = 12 // 3 means, 3 stds, 3 x-gradients, 3 y-gradients

interface Tower {
  weights: Float64Array // channels x STATS
  bias: Float64Array
}

const towers = new Map<string, Tower>()

function tower(name: string, channels: number): Tower {
  let cached = towers.get(name)
  if (cached) return cached
  const draw = gaussian(rngFromString(name))
  const weights = new Float64Array(channels * STATS)
  for (let i = 0; i < weights.length; i++) weights[i] = draw() / Math.sqrt(STATS)
  const bias = new Float64Array(channels)
  for (let i = 0; i < channels; i++) bias[i] = 0.1 * draw()
  cached = { weights, bias }
  towers.set(name, cached)
  return cached
}

/** Per-channel mean, spread and mean gradients over one patch, in [0,1] units. */
function patchStats(image: Rgb, top: number, left: number, patch: number): Float64Array {
  const stats = new Float64Array(STATS)
  const { width, pixels } = image
  const n = patch * patch
  for (let c = 0; c < 3; c++) {
    let sum = 0
    let sumSq = 0
    let gx = 0
    let gy = 0
    for (let y = top; y < top + patch; y++) {
      for (let x = left; x < left + patch; x++) {
        const v = pixels[3 * (y * width + x) + c] / 255
        sum += v
        sumSq += v * v
        if (x + 1 < left + patch) gx += pixels[3 * (y * width + x + 1) + c] / 255 - v
        if (y + 1 < top + patch) gy += pixels[3 * ((y + 1) * width + x) + c] / 255 - v
      }
    }
    const mean = sum / n
    stats[c] = mean
    stats[3 + c] = Math.sqrt(Math.max(sumSq / n - mean * mean, 0))
    stats[6 + c] = gx / (patch * (patch - 1))
    stats[9 + c] = gy / (patch * (patch - 1))
  }
  return stats
}

function patchTokens(image: Rgb, patch: number, channels: number, towerName: string): Tensor {
  const rows = Math.floor(image.height / patch)
  const cols = Math.floor(image.width / patch)
  if (rows < 1 || cols < 1) {
    throw new Error(`image ${image.width}x${image.height} is smaller than one ${patch}px patch`)
  }
  const { weights, bias } = tower(towerName, channels)
  const data = new Float32Array(rows * cols * channels)
  for (let r = 0; r < rows; r++) {
    for (let q = 0; q < cols; q++) {
      const stats = patchStats(image, r * patch, q * patch, patch)
      const base = (r * cols + q) * channels
      for (let c = 0; c < channels; c++) {
        let acc = bias[c]
        for (let s = 0; s < STATS; s++) acc += weights[c * STATS + s] * stats[s]
        data[base + c] = Math.tanh(acc)
      }
    }
  }
  return { shape: [rows, cols, channels], data }
}

/** Patch-token grid of the vision tower; class/register tokens never appear. */
export function visionTokens(image: Rgb): Tensor {
  return patchTokens(image, VISION_PATCH, VISION_CHANNELS, 'vision-tower-v1')
}

/** Dense patch tokens of the vision-language tower. */
export function vlTokens(image: Rgb): Tensor {
  return patchTokens(image, VL_PATCH, VL_CHANNELS, 'vl-tower-v1')
}

/** Unit-norm embedding of one prompt string. */
export function textEmbedding(prompt: string): Tensor {
  if (prompt.trim().length === 0) throw new Error('empty prompt')
  const draw = gaussian(rngFromString(`text-tower-v1:${prompt}`))
  const data = new Float32Array(VL_CHANNELS)
  for (let i = 0; i < VL_CHANNELS; i++) data[i] = draw()
  let norm = 0
  for (const v of data) norm += v * v
  norm = Math.sqrt(norm)
  for (let i = 0; i < VL_CHANNELS; i++) data[i] = data[i] / norm
  return { shape: [VL_CHANNELS], data }
}
