/**
 * Color-histogram embedder: crops embed as an L2-normalized 4x4x4 RGB
 * histogram; text embeds as the (smoothed) histogram a solid patch of its
 * color word would have.  Text without a known color word maps to the
 * uniform vector, so unrelated bank categories land at a low, stable
 * similarity with any concentrated crop.
 */

import { RasterImage } from './image';
import { Embedder } from './models';
import { PALETTE, colorWordOf } from './palette';

const BINS = 4;
const DIM = BINS * BINS * BINS;
const SMOOTH = 0.01;

function binIndex(r: number, g: number, b: number): number {
  const q = (v: number) => Math.min(BINS - 1, (v * BINS) >> 8);
  return q(r) * BINS * BINS + q(g) * BINS + q(b);
}

function normalize(v: Float64Array): Float64Array {
  let norm = 0;
  for (const x of v) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm > 0) for (let i = 0; i < v.length; i++) v[i] /= norm;
  return v;
}

export class ColorHistogramEmbedder implements Embedder {
  readonly id = 'color-histogram/1';

  embedImage(image: RasterImage): Float64Array {
    const hist = new Float64Array(DIM).fill(SMOOTH);
    const { data } = image;
    for (let i = 0; i < image.width * image.height; i++) {
      hist[binIndex(data[i * 3], data[i * 3 + 1], data[i * 3 + 2])] += 1;
    }
    return normalize(hist);
  }

  embedText(text: string): Float64Array {
    const word = colorWordOf(text);
    const hist = new Float64Array(DIM).fill(SMOOTH);
    if (word !== undefined) {
      const [r, g, b] = PALETTE[word];
      hist[binIndex(r, g, b)] += 1;
    } else {
      hist.fill(1);
    }
    return normalize(hist);
  }
}
