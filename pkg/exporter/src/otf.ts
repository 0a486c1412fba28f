// Minimal binary tensor container: magic "OTF1", one dtype byte (0 =
// float32), one rank byte, the shape as little-endian uint32, then the
// row-major float32 payload.

import { readFileSync, writeFileSync } from 'fs'

const MAGIC = Buffer.from('OTF1', 'ascii')
const DTYPE_FLOAT32 = 0

export interface Tensor {
  shape: number[]
  data: Float32Array
}

export function encodeOtf(tensor: Tensor): Buffer {
  const { shape, data } = tensor
  if (shape.length > 255) throw new Error(`rank ${shape.length} exceeds 255`)
  const count = shape.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new Error(`shape [${shape}] holds ${count} values, got ${data.length}`)
  }
  const header = Buffer.alloc(6 + 4 * shape.length)
  MAGIC.copy(header, 0)
  header.writeUInt8(DTYPE_FLOAT32, 4)
  header.writeUInt8(shape.length, 5)
  shape.forEach((dim, i) => {
    if (!Number.isInteger(dim) || dim < 0) throw new Error(`bad dimension ${dim}`)
    header.writeUInt32LE(dim, 6 + 4 * i)
  })
  const payload = Buffer.alloc(4 * data.length)
  for (let i = 0; i < data.length; i++) payload.writeFloatLE(data[i], 4 * i)
  return Buffer.concat([header, payload])
}

export function writeOtf(path: string, tensor: Tensor): void {
  writeFileSync(path, encodeOtf(tensor))
}

/** Strict read-back, used to cross-check what was written. */
export function readOtf(path: string): Tensor {
  const buf = readFileSync(path)
  if (buf.length < 6) throw new Error(`${path}: truncated header (${buf.length} bytes)`)
  if (!buf.subarray(0, 4).equals(MAGIC)) throw new Error(`${path}: bad magic at offset 0`)
  if (buf.readUInt8(4) !== DTYPE_FLOAT32) throw new Error(`${path}: unknown dtype at offset 4`)
  const rank = buf.readUInt8(5)
  const payloadStart = 6 + 4 * rank
  if (buf.length < payloadStart) throw new Error(`${path}: truncated shape`)
  const shape: number[] = []
  for (let i = 0; i < rank; i++) shape.push(buf.readUInt32LE(6 + 4 * i))
  const count = shape.reduce((a, b) => a * b, 1)
  if (buf.length !== payloadStart + 4 * count) {
    throw new Error(`${path}: expected ${4 * count} payload bytes at offset ${payloadStart}`)
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(payloadStart + 4 * i)
  return { shape, data }
}
