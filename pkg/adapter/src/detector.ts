/**
 * Palette blob detector: proposals are connected components of pixels whose
 * color sits within a tolerance ball of the label's palette prototype.
 * A label carrying no known color word yields zero proposals (an honest
 * "nothing detected" answer, which the engine treats as a no-target signal).
 */

import { RasterImage } from './image';
import { Detection, Detector } from './models';
import { PALETTE, Rgb, colorWordOf } from './palette';

export interface BlobDetectorOptions {
  /** Max Euclidean RGB distance from the prototype for a pixel to match. */
  tolerance?: number;
  /** Components smaller than this many pixels are noise. */
  minArea?: number;
}

export class PaletteBlobDetector implements Detector {
  readonly id = 'palette-blob/1';
  private readonly tolerance: number;
  private readonly minArea: number;

  constructor(options: BlobDetectorOptions = {}) {
    this.tolerance = options.tolerance ?? 90;
    this.minArea = options.minArea ?? 9;
  }

  detect(image: RasterImage, label: string): Detection[] {
    const word = colorWordOf(label);
    if (word === undefined) return [];
    return this.detectColor(image, PALETTE[word]);
  }

  private detectColor(image: RasterImage, rgb: Rgb): Detection[] {
    const { width, height, data } = image;
    const tol2 = this.tolerance * this.tolerance;
    const match = new Uint8Array(width * height);
    for (let i = 0; i < width * height; i++) {
      const dr = data[i * 3] - rgb[0];
      const dg = data[i * 3 + 1] - rgb[1];
      const db = data[i * 3 + 2] - rgb[2];
      if (dr * dr + dg * dg + db * db <= tol2) match[i] = 1;
    }

    const seen = new Uint8Array(width * height);
    const detections: Detection[] = [];
    const stack: number[] = [];
    for (let start = 0; start < width * height; start++) {
      if (!match[start] || seen[start]) continue;
      let minX = width;
      let maxX = -1;
      let minY = height;
      let maxY = -1;
      let area = 0;
      stack.push(start);
      seen[start] = 1;
      while (stack.length) {
        const i = stack.pop()!;
        const x = i % width;
        const y = (i / width) | 0;
        area++;
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
        const neighbors = [i - 1, i + 1, i - width, i + width];
        if (x === 0) neighbors[0] = -1;
        if (x === width - 1) neighbors[1] = -1;
        for (const n of neighbors) {
          if (n >= 0 && n < width * height && match[n] && !seen[n]) {
            seen[n] = 1;
            stack.push(n);
          }
        }
      }
      if (area < this.minArea) continue;
      const w = maxX - minX + 1;
      const h = maxY - minY + 1;
      detections.push({
        box: { x: minX + w / 2, y: minY + h / 2, w, h },
        score: Math.min(1, area / (w * h)), // fill density of the bounding box
      });
    }
    detections.sort((a, b) => b.score - a.score || b.box.w * b.box.h - a.box.w * a.box.h);
    return detections;
  }
}
