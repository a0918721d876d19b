/**
 * Spiral layout with stream-graph stacking.
 *
 * One device's window is wound into an archimedean spiral, one turn
 * per period. The analyzed data is always the innermost strand; each
 * selected instance stacks outward from it, band on band, so the
 * thickness of the analyzed data and the added instances accumulates.
 * Rating drives per-point thickness, reading drives color (applied by
 * the renderer). Per-strand thickness is capped, and the cap shrinks
 * automatically when the stack would not fit between two twists.
 */

export interface SpiralPoint {
  /** absolute sample index in the analyzed series */
  index: number;
  /** radians from the strand start, grows monotonically */
  angle: number;
  rInner: number;
  rOuter: number;
  /** reading at this sample, for the color mapping */
  value: number;
}

export interface SpiralStrand {
  kind: "analyzed" | "instance";
  id: string;
  /** 0 is the innermost strand, which is always the analyzed data */
  stack: number;
  points: SpiralPoint[];
}

export interface SpiralLayout {
  strands: SpiralStrand[];
  /** effective per-strand thickness cap after auto-reduction */
  clamp: number;
  /** radial distance between consecutive twists of the centerline */
  pitch: number;
  turns: number;
  periodSamples: number;
  start: number;
  samples: number;
}

export interface StrandData {
  id: string;
  readings: number[];
  ratings: number[];
  /** absolute sample index where the strand begins */
  offset: number;
}

export interface SpiralOptions {
  /** samples per full turn, must be >= 2 */
  periodSamples: number;
  /** centerline radius at the first analyzed sample */
  innerRadius: number;
  /** outer edge the whole spiral must stay inside */
  outerRadius: number;
  /** requested per-strand thickness cap in pixels */
  maxThickness: number;
  /** share of the pitch kept clear between twists, default 0.15 */
  gapFraction?: number;
}

// a strand never collapses to zero width, even at rating 0
const MIN_FRACTION = 0.15;

export function layoutSpiral(
  analyzed: { readings: number[]; ratings: number[]; start: number },
  instances: StrandData[],
  opts: SpiralOptions,
): SpiralLayout {
  const period = Math.max(2, Math.floor(opts.periodSamples));
  const n = analyzed.readings.length;
  const start = analyzed.start;
  const turns = Math.max(1, Math.ceil(n / period));
  const room = Math.max(1, opts.outerRadius - opts.innerRadius);
  const pitch = room / (turns + 1);
  const gap = opts.gapFraction ?? 0.15;
  const strandCount = 1 + instances.length;
  const clamp = Math.min(opts.maxThickness, (pitch * (1 - gap)) / strandCount);

  const layout: SpiralLayout = {
    strands: [],
    clamp,
    pitch,
    turns,
    periodSamples: period,
    start,
    samples: n,
  };
  if (n === 0) return layout;

  const centerline = (i: number) => opts.innerRadius + (pitch * (i - start)) / period;
  const thickness = (rating: number) => {
    const r = Math.min(1, Math.max(0, rating));
    return clamp * (MIN_FRACTION + r * (1 - MIN_FRACTION));
  };

  // outer edge accumulated so far at each analyzed index
  const stackTop = new Float64Array(n);
  for (let i = 0; i < n; i++) stackTop[i] = centerline(start + i);

  const strandInputs: (StrandData & { kind: "analyzed" | "instance" })[] = [
    { kind: "analyzed", id: "analyzed", readings: analyzed.readings, ratings: analyzed.ratings, offset: start },
    ...instances.map((inst) => ({ kind: "instance" as const, ...inst })),
  ];

  strandInputs.forEach((strand, stack) => {
    const points: SpiralPoint[] = [];
    for (let j = 0; j < strand.readings.length; j++) {
      const abs = strand.offset + j;
      const local = abs - start;
      if (local < 0 || local >= n) continue; // clipped to the analyzed window
      const rInner = stackTop[local];
      const th = thickness(strand.ratings[j] ?? 0);
      stackTop[local] = rInner + th;
      points.push({
        index: abs,
        angle: (2 * Math.PI * local) / period,
        rInner,
        rOuter: rInner + th,
        value: strand.readings[j],
      });
    }
    layout.strands.push({ kind: strand.kind, id: strand.id, stack, points });
  });

  return layout;
}

/** Polar point of the layout in canvas coordinates. */
export function spiralXY(cx: number, cy: number, angle: number, radius: number): [number, number] {
  // angle 0 points up, winding clockwise
  return [cx + radius * Math.sin(angle), cy - radius * Math.cos(angle)];
}
