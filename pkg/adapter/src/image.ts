/**
 * Raster images: PNG decode/encode plus crop, in plain RGB byte planes.
 */

import * as fs from 'node:fs';
import { PNG } from 'pngjs';

export interface RasterImage {
  width: number;
  height: number;
  /** RGB, 3 bytes per pixel, row-major. */
  data: Uint8Array;
}

export function readPng(path: string): RasterImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const data = new Uint8Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    data[i * 3] = png.data[i * 4];
    data[i * 3 + 1] = png.data[i * 4 + 1];
    data[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data };
}

export function writePng(image: RasterImage, path: string): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.data[i * 3];
    png.data[i * 4 + 1] = image.data[i * 3 + 1];
    png.data[i * 4 + 2] = image.data[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

export function solidImage(width: number, height: number, rgb: [number, number, number]): RasterImage {
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    data[i * 3] = rgb[0];
    data[i * 3 + 1] = rgb[1];
    data[i * 3 + 2] = rgb[2];
  }
  return { width, height, data };
}

export function fillRect(
  image: RasterImage,
  x0: number,
  y0: number,
  w: number,
  h: number,
  rgb: [number, number, number],
): void {
  for (let y = y0; y < Math.min(y0 + h, image.height); y++) {
    for (let x = x0; x < Math.min(x0 + w, image.width); x++) {
      const i = (y * image.width + x) * 3;
      image.data[i] = rgb[0];
      image.data[i + 1] = rgb[1];
      image.data[i + 2] = rgb[2];
    }
  }
}

/** Center-convention box, matching the engine's scene format. */
export interface CenterBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Crop the (clamped) pixel rectangle covered by a center-convention box. */
export function crop(image: RasterImage, box: CenterBox): RasterImage {
  const x0 = Math.max(0, Math.round(box.x - box.w / 2));
  const y0 = Math.max(0, Math.round(box.y - box.h / 2));
  const x1 = Math.min(image.width, Math.round(box.x + box.w / 2));
  const y1 = Math.min(image.height, Math.round(box.y + box.h / 2));
  const w = Math.max(1, x1 - x0);
  const h = Math.max(1, y1 - y0);
  const data = new Uint8Array(w * h * 3);
  for (let y = 0; y < h; y++) {
    const src = ((y0 + y) * image.width + x0) * 3;
    data.set(image.data.subarray(src, src + w * 3), y * w * 3);
  }
  return { width: w, height: h, data };
}
