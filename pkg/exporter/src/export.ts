import { mkdirSync } from 'fs'
import { basename, extname, join } from 'path'

import { textEmbedding, visionTokens, vlTokens, VISION_CHANNELS, VL_CHANNELS } from './encoders'
import { FrameEntry, PromptEntry, SceneManifest, slugify, writeManifest } from './manifest'
import { writeOtf } from './otf'
import { readImage } from './png'

export interface ExportJob {
  images: string[]
  prompts: string[]
  negatives: string[]
  outDir: string
}

export interface ExportResult {
  manifestPath: string
  files: string[]
}

function uniqueName(taken: Set<string>, base: string): string {
  let name = base
  let n = 2
  while (taken.has(name)) name = `${base}_${n++}`
  taken.add(name)
  return name
}

export function runExport(job: ExportJob): ExportResult {
  if (job.images.length === 0) throw new Error('no images given')
  mkdirSync(job.outDir, { recursive: true })

  const files: string[] = []
  const frames: FrameEntry[] = []
  const stems = new Set<string>()
  for (const imagePath of job.images) {
    const image = readImage(imagePath)
    const stem = uniqueName(stems, slugify(basename(imagePath, extname(imagePath))))
    const visionFile = `${stem}_vision.otf`
    const vlFile = `${stem}_vl.otf`
    writeOtf(join(job.outDir, visionFile), visionTokens(image))
    writeOtf(join(job.outDir, vlFile), vlTokens(image))
    files.push(visionFile, vlFile)
    frames.push({ image: imagePath, vision_tokens: visionFile, vl_tokens: vlFile })
  }

  const prompts: PromptEntry[] = []
  const names = new Set<string>()
  const addPrompts = (texts: string[], role: 'positive' | 'negative') => {
    for (const text of texts) {
      const name = uniqueName(names, slugify(text))
      const file = `${name}.otf`
      writeOtf(join(job.outDir, file), textEmbedding(text))
      files.push(file)
      prompts.push({ name, embedding: file, role })
    }
  }
  addPrompts(job.prompts, 'positive')
  addPrompts(job.negatives, 'negative')

  const manifest: SceneManifest = {
    frames,
    prompts,
    channels: { vision: VISION_CHANNELS, vl: VL_CHANNELS },
  }
  return { manifestPath: writeManifest(job.outDir, manifest), files }
}
