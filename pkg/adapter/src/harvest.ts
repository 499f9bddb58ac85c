/**
 * Dry-run a program's text to collect every text the engine will look up:
 * FIND labels and PROPERTY attributes.  Combined with the category bank,
 * this is the full request list a scene file must cover.
 */

const STATEMENT = /^\s*[A-Za-z_]\w*\s*=\s*([A-Za-z_]\w*)\((.*)\)\s*$/;
const STRING_ARG = (name: string) => new RegExp(`${name}\\s*=\\s*(?:'((?:\\\\.|[^'])*)'|"((?:\\\\.|[^"])*)")`);

function unescape(raw: string): string {
  return raw.replace(/\\(['"\\])/g, '$1');
}

export interface HarvestResult {
  labels: string[];
  attributes: string[];
}

export function harvestProgram(text: string): HarvestResult {
  const labels = new Set<string>();
  const attributes = new Set<string>();
  for (const line of text.split(/\r?\n/)) {
    const m = STATEMENT.exec(line);
    if (!m) continue;
    const [, op, args] = m;
    if (op === 'FIND') {
      const v = STRING_ARG('object_name').exec(args);
      if (v) labels.add(unescape(v[1] ?? v[2]));
    } else if (op === 'PROPERTY') {
      const v = STRING_ARG('attribute').exec(args);
      if (v) attributes.add(unescape(v[1] ?? v[2]));
    }
  }
  return { labels: [...labels].sort(), attributes: [...attributes].sort() };
}

export function harvestPrograms(texts: string[]): HarvestResult {
  const labels = new Set<string>();
  const attributes = new Set<string>();
  for (const text of texts) {
    const one = harvestProgram(text);
    one.labels.forEach((l) => labels.add(l));
    one.attributes.forEach((a) => attributes.add(a));
  }
  return { labels: [...labels].sort(), attributes: [...attributes].sort() };
}
