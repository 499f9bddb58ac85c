/**
 * Verification scoring used for auxiliary calibration tables: the average
 * two-way softmax probability of the target label against each bank
 * category, computed in the overflow-free logistic form.  Must stay
 * numerically compatible with the engine's scorer, whose calibrate command
 * consumes these values.
 */

function sigmoid(z: number): number {
  if (z >= 0) return 1 / (1 + Math.exp(-z));
  const ez = Math.exp(z);
  return ez / (1 + ez);
}

export function pairwiseSoftmaxScore(targetSim: number, bankSims: number[], temperature: number): number {
  if (bankSims.length === 0) throw new Error('empty similarity bank');
  if (!(temperature > 0)) throw new Error('temperature must be > 0');
  let total = 0;
  for (const s of bankSims) total += sigmoid((targetSim - s) / temperature);
  return total / bankSims.length;
}

/** Bank with the target label removed, case-insensitively, as the engine does. */
export function bankWithout(bank: string[], label: string): string[] {
  const needle = label.toLowerCase();
  return bank.filter((c) => c.toLowerCase() !== needle);
}
