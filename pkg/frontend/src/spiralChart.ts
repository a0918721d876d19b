import { layoutSpiral, spiralXY, type SpiralLayout } from "./spiral.js";
import type { WindowData } from "./seriesData.js";
import type { SelectedInstance, ViewEvent, ViewState } from "./state.js";
import { effectivePeriod } from "./state.js";
import type { Highlight } from "./guidance.js";
import type { InstanceDocument } from "./types.js";
import { colorFor } from "./colormaps.js";

/**
 * One spiral tile per selected device. Readings color the strand
 * bands, ratings set their thickness, selected instances wrap around
 * the analyzed strand at the shared period. Hovering a point marks
 * the contemporaneous sample on every other spiral; the square handle
 * at an instance's first band drags its offset.
 */

const TILE = 260;
const MAX_THICKNESS = 9;

interface Tile {
  device: string;
  canvas: HTMLCanvasElement;
  layout: SpiralLayout | null;
  xy: Map<number, [number, number]>; // analyzed index -> centerline point
}

export interface SpiralExtras {
  highlights: Highlight[];
  instanceData: ReadonlyMap<string, InstanceDocument>;
}

export function createSpiralChart(
  container: HTMLElement,
  dispatch: (ev: ViewEvent) => void,
) {
  let tiles: Tile[] = [];
  let drag: { device: string; id: string } | null = null;

  function instanceStrands(
    device: string,
    selected: SelectedInstance[],
    instanceData: ReadonlyMap<string, InstanceDocument>,
  ) {
    const strands = [];
    for (const sel of selected) {
      const doc = instanceData.get(sel.id);
      const seg = doc?.segments[device];
      if (!seg) continue; // instance does not involve this device
      strands.push({
        id: sel.id,
        readings: seg.readings,
        ratings: seg.ratings,
        offset: sel.offset,
      });
    }
    return strands;
  }

  function drawTile(tile: Tile, data: WindowData, state: ViewState, extras: SpiralExtras): void {
    const g = tile.canvas.getContext?.("2d");
    if (!g) return;
    g.clearRect(0, 0, TILE, TILE);
    g.fillStyle = "#16181d";
    g.fillRect(0, 0, TILE, TILE);
    g.fillStyle = "#c8cdd4";
    g.font = "12px sans-serif";
    g.fillText(tile.device, 8, 16);

    const readings = data.readings[tile.device];
    const ratings = data.ratings[tile.device];
    if (!readings || !readings.length) {
      g.fillStyle = "#8a8f98";
      g.fillText("no data in window", 8, TILE / 2);
      tile.layout = null;
      return;
    }

    const periodSamples = Math.max(2, Math.round(effectivePeriod(state) / data.dt));
    const layout = layoutSpiral(
      { readings, ratings, start: data.from },
      instanceStrands(tile.device, state.selected, extras.instanceData),
      {
        periodSamples,
        innerRadius: 18,
        outerRadius: TILE / 2 - 8,
        maxThickness: MAX_THICKNESS,
      },
    );
    tile.layout = layout;
    tile.xy.clear();

    let lo = Infinity;
    let hi = -Infinity;
    for (const v of readings) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    const ref = state.colormapReference ?? (lo < hi ? ([lo, hi] as [number, number]) : ([0, 1] as [number, number]));

    const cx = TILE / 2;
    const cy = TILE / 2 + 6;
    const highlight = extras.highlights.filter((h) => h.device === tile.device);

    for (const strand of layout.strands) {
      for (const p of strand.points) {
        const mid = (p.rInner + p.rOuter) / 2;
        const [x, y] = spiralXY(cx, cy, p.angle, mid);
        if (strand.kind === "analyzed") tile.xy.set(p.index, [x, y]);
        g.strokeStyle = colorFor(state.colormap, p.value, ref[0], ref[1]);
        g.lineWidth = Math.max(0.8, p.rOuter - p.rInner);
        const [x2, y2] = spiralXY(cx, cy, p.angle + (2 * Math.PI) / layout.periodSamples, mid);
        g.beginPath();
        g.moveTo(x, y);
        g.lineTo(x2, y2);
        g.stroke();
        if (strand.kind === "analyzed" && highlight.some((h) => p.index >= h.start && p.index < h.end)) {
          g.strokeStyle = "rgba(120,220,255,0.8)";
          g.lineWidth = 1;
          g.beginPath();
          g.arc(x, y, Math.max(2, p.rOuter - p.rInner), 0, 2 * Math.PI);
          g.stroke();
        }
      }
      if (strand.kind === "instance" && strand.points.length) {
        // drag handle at the instance start
        const p0 = strand.points[0];
        const [hx, hy] = spiralXY(cx, cy, p0.angle, (p0.rInner + p0.rOuter) / 2);
        g.fillStyle = "#e7e9ee";
        g.fillRect(hx - 3, hy - 3, 6, 6);
      }
    }

    // contemporaneous marker for the hovered sample
    const hovered = state.hovered;
    if (hovered?.kind === "sample" && hovered.index !== undefined) {
      const xy = tile.xy.get(hovered.index);
      if (xy) {
        g.strokeStyle = "#ffffff";
        g.lineWidth = 1.5;
        g.beginPath();
        g.arc(xy[0], xy[1], 5, 0, 2 * Math.PI);
        g.stroke();
      }
    }
  }

  function nearestIndex(tile: Tile, x: number, y: number): number | null {
    let best: number | null = null;
    let bestD = 12 * 12;
    for (const [index, [px, py]] of tile.xy) {
      const d = (px - x) * (px - x) + (py - y) * (py - y);
      if (d < bestD) {
        bestD = d;
        best = index;
      }
    }
    return best;
  }

  function wire(tile: Tile): void {
    tile.canvas.addEventListener("mousedown", (ev) => {
      if (!tile.layout) return;
      const rect = tile.canvas.getBoundingClientRect();
      const x = ev.clientX - rect.left;
      const y = ev.clientY - rect.top;
      for (const strand of tile.layout.strands) {
        if (strand.kind !== "instance" || !strand.points.length) continue;
        const p0 = strand.points[0];
        const [hx, hy] = spiralXY(TILE / 2, TILE / 2 + 6, p0.angle, (p0.rInner + p0.rOuter) / 2);
        if (Math.abs(hx - x) < 8 && Math.abs(hy - y) < 8) {
          drag = { device: tile.device, id: strand.id };
          return;
        }
      }
    });
    tile.canvas.addEventListener("mousemove", (ev) => {
      const rect = tile.canvas.getBoundingClientRect();
      const x = ev.clientX - rect.left;
      const y = ev.clientY - rect.top;
      const index = nearestIndex(tile, x, y);
      if (drag && drag.device === tile.device) {
        if (index !== null) dispatch({ type: "instance-drag", id: drag.id, offset: index });
        return;
      }
      if (index !== null) {
        dispatch({ type: "hover", target: { kind: "sample", id: tile.device, index } });
      }
    });
    tile.canvas.addEventListener("mouseup", () => {
      drag = null;
    });
    tile.canvas.addEventListener("mouseleave", () => {
      if (drag?.device === tile.device) drag = null;
    });
  }

  function render(data: WindowData | null, state: ViewState, extras: SpiralExtras): void {
    const wanted = state.devices;
    if (tiles.map((t) => t.device).join(",") !== wanted.join(",")) {
      container.textContent = "";
      tiles = wanted.map((device) => {
        const canvas = document.createElement("canvas");
        canvas.width = TILE;
        canvas.height = TILE;
        canvas.className = "spiral-tile";
        canvas.dataset.device = device;
        container.appendChild(canvas);
        const tile: Tile = { device, canvas, layout: null, xy: new Map() };
        wire(tile);
        return tile;
      });
    }
    if (!data) {
      for (const tile of tiles) {
        const g = tile.canvas.getContext?.("2d");
        if (!g) continue;
        g.clearRect(0, 0, TILE, TILE);
        g.fillStyle = "#8a8f98";
        g.font = "12px sans-serif";
        g.fillText(`${tile.device}: select a window`, 8, TILE / 2);
      }
      return;
    }
    for (const tile of tiles) drawTile(tile, data, state, extras);
  }

  return { render };
}
