/**
 * Model interfaces behind which real perception backends plug in.
 *
 * The default implementations shipped here are deterministic pixel-statistics
 * models chosen to run anywhere with no weights to download: a palette blob
 * detector, a color-histogram embedder, and a ground-plane depth proxy.
 * They honor the same contracts a detector/embedder/depth network would, and
 * every emitted scene records which models produced it.
 */

import { CenterBox, RasterImage } from './image';

export interface Detection {
  box: CenterBox;
  score: number; // [0, 1]
}

export interface Detector {
  readonly id: string;
  /** Proposals for a free-text label; empty array = confidently nothing. */
  detect(image: RasterImage, label: string): Detection[];
}

export interface Embedder {
  readonly id: string;
  embedImage(image: RasterImage): Float64Array;
  embedText(text: string): Float64Array;
}

export interface DepthEstimator {
  readonly id: string;
  /** Mean relative depth inside the box, larger = closer to the camera. */
  boxDepth(image: RasterImage, box: CenterBox): number;
}

export function cosine(a: Float64Array, b: Float64Array): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na === 0 || nb === 0) return 0;
  const value = dot / (Math.sqrt(na) * Math.sqrt(nb));
  return Math.max(-1, Math.min(1, value)); // the scene schema requires [-1, 1]
}
