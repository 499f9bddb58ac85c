/**
 * Ground-plane depth proxy: depth grows toward the bottom of the frame
 * (things lower in the image are usually nearer the camera), normalized so
 * larger = closer, which is the engine's scene convention.
 */

import { CenterBox, RasterImage } from './image';
import { DepthEstimator } from './models';

export class GroundPlaneDepth implements DepthEstimator {
  readonly id = 'ground-plane/1';

  boxDepth(image: RasterImage, box: CenterBox): number {
    const y0 = Math.max(0, box.y - box.h / 2);
    const y1 = Math.min(image.height, box.y + box.h / 2);
    const mid = (y0 + y1) / 2;
    return image.height > 1 ? mid / image.height : 0.5;
  }
}
