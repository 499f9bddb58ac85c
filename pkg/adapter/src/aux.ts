/**
 * Auxiliary calibration scores: for each class folder of images, crop the
 * best detected instance of the class and score it against the category
 * bank.  The output table `{label: [score, ...]}` feeds the engine's
 * calibrate command.  Classes where nothing survives detection are omitted
 * and reported in a warning manifest rather than silently skipped.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { crop, readPng } from './image';
import { DepthEstimator, Detector, Embedder, cosine } from './models';
import { bankWithout, pairwiseSoftmaxScore } from './uv';

export interface AuxJob {
  /** Folder of class subfolders, each holding images of that class. */
  rootDir: string;
  bank: string[];
  detector: Detector;
  embedder: Embedder;
  temperature: number;
  perClassLimit: number;
}

export interface AuxResult {
  scores: Record<string, number[]>;
  warnings: string[];
}

export function buildAuxScores(job: AuxJob): AuxResult {
  const scores: Record<string, number[]> = {};
  const warnings: string[] = [];
  const classes = fs
    .readdirSync(job.rootDir, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (classes.length === 0) throw new Error(`no class folders under ${job.rootDir}`);

  for (const label of classes) {
    const dir = path.join(job.rootDir, label);
    const images = fs
      .readdirSync(dir)
      .filter((f) => f.toLowerCase().endsWith('.png'))
      .sort()
      .slice(0, job.perClassLimit);
    if (images.length === 0) {
      warnings.push(`class ${label}: empty folder, skipped`);
      continue;
    }
    const bank = bankWithout(job.bank, label);
    if (bank.length === 0) {
      warnings.push(`class ${label}: bank contains only the class itself, skipped`);
      continue;
    }
    const labelEmbedding = job.embedder.embedText(label);
    const bankEmbeddings = bank.map((c) => job.embedder.embedText(c));
    const classScores: number[] = [];
    for (const file of images) {
      const image = readPng(path.join(dir, file));
      const detections = job.detector.detect(image, label);
      if (detections.length === 0) continue; // background-only image
      const best = crop(image, detections[0].box);
      const cropEmbedding = job.embedder.embedImage(best);
      const targetSim = cosine(cropEmbedding, labelEmbedding);
      const bankSims = bankEmbeddings.map((e) => cosine(cropEmbedding, e));
      classScores.push(pairwiseSoftmaxScore(targetSim, bankSims, job.temperature));
    }
    if (classScores.length === 0) {
      warnings.push(`class ${label}: no crops survived detection, omitted`);
    } else {
      scores[label] = classScores;
    }
  }
  return { scores, warnings };
}
