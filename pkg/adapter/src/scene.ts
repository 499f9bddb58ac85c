/**
 * Scene building: run the detector for every requested label, embed each
 * proposal's crop against every requested text, estimate per-proposal depth,
 * and emit a `vro-scene/1` JSON document the engine's loader accepts with
 * zero consistency errors.
 */

import { crop, RasterImage } from './image';
import { DepthEstimator, Detector, Embedder, cosine } from './models';

export interface SceneJob {
  image: RasterImage;
  imageId: string;
  /** Labels to detect (harvested FIND labels). */
  labels: string[];
  /** Every text each proposal must carry a similarity for
   *  (labels + attributes + bank categories). */
  texts: string[];
  detector: Detector;
  embedder: Embedder;
  depth: DepthEstimator;
}

export interface SceneDocument {
  schema: 'vro-scene/1';
  image_id: string;
  width: number;
  height: number;
  detections: Record<string, { id: string; box: [number, number, number, number]; score: number }[]>;
  similarity: { id: string; text: string; sim: number }[];
  depth: { id: string; value: number }[];
  provenance: { models: Record<string, string> };
}

export function buildScene(job: SceneJob): SceneDocument {
  if (job.labels.length === 0) throw new Error('scene job has an empty label request list');
  const detections: SceneDocument['detections'] = {};
  const similarity: SceneDocument['similarity'] = [];
  const depth: SceneDocument['depth'] = [];
  const texts = [...new Set(job.texts)].sort();
  const textEmbeddings = new Map(texts.map((t) => [t, job.embedder.embedText(t)]));

  let counter = 0;
  for (const label of [...new Set(job.labels)].sort()) {
    const proposals = job.detector.detect(job.image, label);
    detections[label] = proposals.map((d) => {
      const id = `p${counter++}`;
      const cropEmbedding = job.embedder.embedImage(crop(job.image, d.box));
      for (const text of texts) {
        similarity.push({ id, text, sim: cosine(cropEmbedding, textEmbeddings.get(text)!) });
      }
      depth.push({ id, value: job.depth.boxDepth(job.image, d.box) });
      return { id, box: [d.box.x, d.box.y, d.box.w, d.box.h], score: d.score };
    });
  }

  return {
    schema: 'vro-scene/1',
    image_id: job.imageId,
    width: job.image.width,
    height: job.image.height,
    detections,
    similarity,
    depth,
    provenance: {
      models: { detector: job.detector.id, embedder: job.embedder.id, depth: job.depth.id },
    },
  };
}
