/** Flat KEY=VALUE config, the same file format the engine CLI reads. */

import * as fs from 'node:fs';

export interface AdapterConfig {
  temperature: number;
  tolerance: number;
  min_area: number;
  per_class_limit: number;
}

export const DEFAULTS: AdapterConfig = {
  temperature: 0.05,
  tolerance: 90,
  min_area: 9,
  per_class_limit: 5,
};

export function parseConfig(text: string): Partial<AdapterConfig> {
  const out: Record<string, number> = {};
  text.split(/\r?\n/).forEach((raw, index) => {
    const line = raw.trim();
    if (!line || line.startsWith('#')) return;
    const eq = line.indexOf('=');
    if (eq < 0) throw new Error(`config line ${index + 1}: expected KEY=VALUE`);
    const key = line.slice(0, eq).trim().toLowerCase();
    if (!(key in DEFAULTS)) return; // engine-side keys are allowed and ignored here
    const value = Number(line.slice(eq + 1).trim());
    if (!Number.isFinite(value)) throw new Error(`config line ${index + 1}: ${key} must be a number`);
    out[key] = value;
  });
  return out as Partial<AdapterConfig>;
}

export function loadConfig(path?: string): AdapterConfig {
  if (!path) return { ...DEFAULTS };
  return { ...DEFAULTS, ...parseConfig(fs.readFileSync(path, 'utf-8')) };
}
