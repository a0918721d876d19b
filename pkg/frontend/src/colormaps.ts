/**
 * Fixed set of named colormaps. Readings map to color, so the set
 * includes sequential maps for one-sided data and a diverging map for
 * data read against a midpoint.
 */

export type Rgb = [number, number, number];

const STOPS: Record<string, Rgb[]> = {
  // sampled from the matplotlib tables at 9 even positions
  viridis: [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
  ],
  plasma: [
    [13, 8, 135],
    [84, 2, 163],
    [139, 10, 165],
    [185, 50, 137],
    [219, 92, 104],
    [244, 136, 73],
    [254, 188, 43],
    [240, 249, 33],
    [240, 249, 33],
  ],
  coolwarm: [
    [59, 76, 192],
    [98, 130, 234],
    [141, 176, 254],
    [184, 208, 249],
    [221, 221, 221],
    [245, 196, 173],
    [244, 154, 123],
    [222, 96, 77],
    [180, 4, 38],
  ],
};

export const COLORMAP_NAMES = Object.keys(STOPS);

export function isDiverging(name: string): boolean {
  return name === "coolwarm";
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/** Color for a value in [lo, hi]; values outside clamp to the ends. */
export function colorFor(name: string, value: number, lo: number, hi: number): string {
  const stops = STOPS[name] ?? STOPS.viridis;
  let t = hi > lo ? (value - lo) / (hi - lo) : 0.5;
  t = Math.min(1, Math.max(0, t));
  const pos = t * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(pos));
  const f = pos - i;
  const [r1, g1, b1] = stops[i];
  const [r2, g2, b2] = stops[i + 1];
  return `rgb(${Math.round(lerp(r1, r2, f))},${Math.round(lerp(g1, g2, f))},${Math.round(lerp(b1, b2, f))})`;
}
