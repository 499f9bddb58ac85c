/** Shared color vocabulary for the default pixel-statistics models. */

export type Rgb = [number, number, number];

export const PALETTE: Record<string, Rgb> = {
  red: [220, 40, 40],
  green: [40, 180, 60],
  blue: [40, 80, 220],
  yellow: [230, 210, 50],
  orange: [240, 140, 30],
  purple: [140, 60, 180],
  cyan: [50, 200, 210],
  magenta: [210, 60, 180],
  brown: [130, 90, 50],
  black: [20, 20, 20],
  white: [240, 240, 240],
  gray: [128, 128, 128],
  grey: [128, 128, 128],
};

/** The first palette word appearing in a free-text phrase, if any. */
export function colorWordOf(text: string): string | undefined {
  const words = text.toLowerCase().split(/[^a-z]+/);
  return words.find((w) => w in PALETTE);
}
