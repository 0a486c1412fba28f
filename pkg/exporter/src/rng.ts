// Deterministic randomness shared by the feature towers. Everything is
// seeded from strings so the same input always produces the same bytes.

/** FNV-1a over UTF-8, used to turn strings into 32-bit seeds. */
export function hashString(text: string): number {
  const bytes = Buffer.from(text, 'utf8')
  let h = 0x811c9dc5
  for (const b of bytes) {
    h ^= b
    h = Math.imul(h, 0x01000193) >>> 0
  }
  return h >>> 0
}

/** sfc32: small fast counter PRNG, plenty for feature synthesis. */
export function sfc32(a: number, b: number, c: number, d: number): () => number {
  return () => {
    a >>>= 0; b >>>= 0; c >>>= 0; d >>>= 0
    let t = (a + b) | 0
    a = b ^ (b >>> 9)
    b = (c + (c << 3)) | 0
    c = (c << 21) | (c >>> 11)
    d = (d + 1) | 0
    t = (t + d) | 0
    c = (c + t) | 0
    return (t >>> 0) / 4294967296
  }
}

export function rngFromString(seed: string): () => number {
  const h = hashString(seed)
  const rng = sfc32(h, h ^ 0x9e3779b9, h ^ 0x85ebca6b, h ^ 0xc2b2ae35)
  for (let i = 0; i < 12; i++) rng() // scramble past the correlated start
  return rng
}

/** Standard normal draws via Box-Muller. */
export function gaussian(rng: () => number): () => number {
  let spare: number | null = null
  return () => {
    if (spare !== null) {
      const v = spare
      spare = null
      return v
    }
    let u = 0
    while (u === 0) u = rng()
    const r = Math.sqrt(-2 * Math.log(u))
    const theta = 2 * Math.PI * rng()
    spare = r * Math.sin(theta)
    return r * Math.cos(theta)
  }
}
