#!/usr/bin/env node
/**
 * scene-adapter: produce engine-ready perception files from images.
 *
 *   scene-adapter build-scene --image img.png --id img0 \
 *       --program prog.vro [--program more.vro] [--labels a,b] \
 *       [--bank bank.txt] [--config engine.conf] --out scene.json
 *
 *   scene-adapter build-aux --root classes/ --bank bank.txt \
 *       [--limit 5] [--config engine.conf] --out aux.json
 */

import * as fs from 'node:fs';

import { buildAuxScores } from './aux';
import { loadConfig } from './config';
import { GroundPlaneDepth } from './depth';
import { PaletteBlobDetector } from './detector';
import { ColorHistogramEmbedder } from './embedder';
import { harvestPrograms } from './harvest';
import { readPng } from './image';
import { buildScene } from './scene';

interface Flags {
  [key: string]: string[];
}

function parseArgs(argv: string[]): { command: string; flags: Flags } {
  const [command, ...rest] = argv;
  const flags: Flags = {};
  for (let i = 0; i < rest.length; i++) {
    if (!rest[i].startsWith('--')) throw new Error(`unexpected argument ${rest[i]}`);
    const key = rest[i].slice(2);
    const value = rest[i + 1];
    if (value === undefined || value.startsWith('--')) throw new Error(`--${key} needs a value`);
    (flags[key] ??= []).push(value);
    i++;
  }
  return { command: command ?? '', flags };
}

function one(flags: Flags, key: string): string | undefined {
  return flags[key]?.[flags[key].length - 1];
}

function required(flags: Flags, key: string): string {
  const value = one(flags, key);
  if (value === undefined) throw new Error(`missing required --${key}`);
  return value;
}

function readBank(path?: string): string[] {
  if (!path) return [];
  return fs
    .readFileSync(path, 'utf-8')
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l && !l.startsWith('#'));
}

function cmdBuildScene(flags: Flags): number {
  const config = loadConfig(one(flags, 'config'));
  const image = readPng(required(flags, 'image'));
  const programs = (flags['program'] ?? []).map((p) => fs.readFileSync(p, 'utf-8'));
  const harvested = harvestPrograms(programs);
  const extraLabels = (one(flags, 'labels') ?? '').split(',').map((s) => s.trim()).filter(Boolean);
  const labels = [...new Set([...harvested.labels, ...extraLabels])];
  if (labels.length === 0) throw new Error('no labels: pass --program and/or --labels');
  const bank = readBank(one(flags, 'bank'));
  const scene = buildScene({
    image,
    imageId: one(flags, 'id') ?? 'image',
    labels,
    texts: [...labels, ...harvested.attributes, ...bank],
    detector: new PaletteBlobDetector({ tolerance: config.tolerance, minArea: config.min_area }),
    embedder: new ColorHistogramEmbedder(),
    depth: new GroundPlaneDepth(),
  });
  const payload = JSON.stringify(scene, null, 2) + '\n';
  const out = one(flags, 'out');
  if (out) fs.writeFileSync(out, payload);
  else process.stdout.write(payload);
  return 0;
}

function cmdBuildAux(flags: Flags): number {
  const config = loadConfig(one(flags, 'config'));
  const limit = one(flags, 'limit');
  const result = buildAuxScores({
    rootDir: required(flags, 'root'),
    bank: readBank(one(flags, 'bank')),
    detector: new PaletteBlobDetector({ tolerance: config.tolerance, minArea: config.min_area }),
    embedder: new ColorHistogramEmbedder(),
    temperature: config.temperature,
    perClassLimit: limit !== undefined ? Number(limit) : config.per_class_limit,
  });
  for (const warning of result.warnings) process.stderr.write(`warning: ${warning}\n`);
  const payload = JSON.stringify(result.scores, null, 2) + '\n';
  const out = one(flags, 'out');
  if (out) fs.writeFileSync(out, payload);
  else process.stdout.write(payload);
  return 0;
}

export function main(argv: string[]): number {
  try {
    const { command, flags } = parseArgs(argv);
    if (command === 'build-scene') return cmdBuildScene(flags);
    if (command === 'build-aux') return cmdBuildAux(flags);
    process.stderr.write('usage: scene-adapter <build-scene|build-aux> [flags]\n');
    return 2;
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
