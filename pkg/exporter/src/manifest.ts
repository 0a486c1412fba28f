// Scene manifest writer. File references are basenames: the consumer
// resolves them against the manifest's own directory, so an export
// directory can be moved around freely.

import { writeFileSync } from 'fs'
import { join } from 'path'

export interface FrameEntry {
  image: string
  vision_tokens: string
  vl_tokens: string
}

export interface PromptEntry {
  name: string
  embedding: string
  role: 'positive' | 'negative'
}

export interface SceneManifest {
  frames: FrameEntry[]
  prompts: PromptEntry[]
  channels: { vision: number; vl: number }
}

export function writeManifest(outDir: string, manifest: SceneManifest): string {
  const path = join(outDir, 'scene.json')
  writeFileSync(path, JSON.stringify(manifest, null, 2) + '\n')
  return path
}

/** File-system-safe name for a prompt string. */
export function slugify(prompt: string): string {
  const slug = prompt
    .toLowerCase()
    .replace(/[^a-z0-9]+/g, '_')
    .replace(/^_+|_+$/g, '')
  return slug.length > 0 ? slug : 'prompt'
}
