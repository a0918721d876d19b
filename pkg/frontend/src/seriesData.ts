import type { Region, SeriesPayload } from "./types.js";

/**
 * The service answers series requests as per-device region lists:
 * full resolution inside the selected window, downsampled flanks
 * outside it. This module flattens a payload into absolute sample
 * indices so the views never deal with region bookkeeping.
 */

export interface OverviewPoint {
  index: number;
  reading: number;
  rating: number;
}

export interface DeviceView {
  /** every delivered point, both flanks and window, in index order */
  overview: OverviewPoint[];
  /** the full-resolution window region, if the window is non-empty */
  window: { from: number; readings: number[]; ratings: number[] } | null;
}

export interface SeriesView {
  t0: number;
  dt: number;
  samples: number;
  window: [number, number];
  devices: Record<string, DeviceView>;
}

function regionIndices(region: Region, t0: number, dt: number): number[] {
  if (region.times) {
    return region.times.map((t) => Math.round((t - t0) / dt));
  }
  const start = Math.round(((region.t0 ?? t0) - t0) / dt);
  return region.readings.map((_, i) => start + i);
}

export function viewOf(payload: SeriesPayload): SeriesView {
  const devices: Record<string, DeviceView> = {};
  for (const [name, regions] of Object.entries(payload.devices)) {
    const overview: OverviewPoint[] = [];
    let windowRegion: DeviceView["window"] = null;
    for (const region of regions) {
      const indices = regionIndices(region, payload.t0, payload.dt);
      for (let i = 0; i < indices.length; i++) {
        overview.push({
          index: indices[i],
          reading: region.readings[i],
          rating: region.ratings[i],
        });
      }
      if (region.kind === "full" && payload.window[0] < payload.window[1]) {
        windowRegion = {
          from: indices[0] ?? payload.window[0],
          readings: region.readings,
          ratings: region.ratings,
        };
      }
    }
    overview.sort((a, b) => a.index - b.index);
    devices[name] = { overview, window: windowRegion };
  }
  return {
    t0: payload.t0,
    dt: payload.dt,
    samples: payload.samples,
    window: payload.window,
    devices,
  };
}

/** Full-resolution window slice shared by the spiral and storing mode. */
export interface WindowData {
  t0: number;
  dt: number;
  from: number;
  readings: Record<string, number[]>;
  ratings: Record<string, number[]>;
}

export function windowData(view: SeriesView): WindowData | null {
  const readings: Record<string, number[]> = {};
  const ratings: Record<string, number[]> = {};
  let from: number | null = null;
  for (const [name, dev] of Object.entries(view.devices)) {
    if (!dev.window) continue;
    readings[name] = dev.window.readings;
    ratings[name] = dev.window.ratings;
    from = dev.window.from;
  }
  if (from === null) return null;
  return { t0: view.t0, dt: view.dt, from, readings, ratings };
}
