export { encodeOtf, readOtf, writeOtf, Tensor } from './otf'
export { readImage, Rgb } from './png'
export {
  textEmbedding,
  visionTokens,
  vlTokens,
  VISION_CHANNELS,
  VISION_PATCH,
  VL_CHANNELS,
  VL_PATCH,
} from './encoders'
export { FrameEntry, PromptEntry, SceneManifest, slugify, writeManifest } from './manifest'
export { ExportJob, ExportResult, runExport } from './export'
