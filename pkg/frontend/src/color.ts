/** Color helpers: bucket hex colors and confidence-scaled borders. */

const HEX = /^#?([0-9a-f]{6})$/i;

export interface Hsl {
  h: number;
  s: number;
  l: number;
}

export function hexToHsl(hex: string): Hsl {
  const match = HEX.exec(hex);
  if (!match) return { h: 0, s: 0, l: 50 };
  const value = parseInt(match[1], 16);
  const r = ((value >> 16) & 0xff) / 255;
  const g = ((value >> 8) & 0xff) / 255;
  const b = (value & 0xff) / 255;
  const max = Math.max(r, g, b);
  const min = Math.min(r, g, b);
  const l = (max + min) / 2;
  if (max === min) return { h: 0, s: 0, l: l * 100 };
  const d = max - min;
  const s = l > 0.5 ? d / (2 - max - min) : d / (max + min);
  let h: number;
  if (max === r) h = ((g - b) / d + (g < b ? 6 : 0)) / 6;
  else if (max === g) h = ((b - r) / d + 2) / 6;
  else h = ((r - g) / d + 4) / 6;
  return { h: h * 360, s: s * 100, l: l * 100 };
}

/**
 * Border color for a suggested or member image: the bucket hue with
 * lightness interpolated between 30% (confidence 0) and 100% (confidence 1).
 * Unknown confidence renders at the dim end.
 */
export function confidenceBorder(bucketColor: string, confidence: number | null): string {
  const { h, s } = hexToHsl(bucketColor);
  const c = confidence === null ? 0 : Math.min(1, Math.max(0, confidence));
  const l = 30 + 70 * c;
  return `hsl(${h.toFixed(1)}, ${s.toFixed(1)}%, ${l.toFixed(1)}%)`;
}

/** Deterministic placeholder fill for collections without real thumbnails. */
export function placeholderFill(imageId: number): string {
  const hue = (imageId * 137.508) % 360;
  return `hsl(${hue.toFixed(1)}, 55%, 70%)`;
}
