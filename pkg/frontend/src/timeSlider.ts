import type {
  InstanceDocument,
  SeverityMark,
  SuggestionRow,
} from "./types.js";
import type { SeriesView } from "./seriesData.js";
import type { SelectedInstance, ViewEvent, ViewState } from "./state.js";
import type { Highlight } from "./guidance.js";
import { colorFor } from "./colormaps.js";

/**
 * Overview time slider. Analyzed devices are stacked line strands in
 * cluster order with warning and alert intervals tinted behind them;
 * suggested instances are strands below, drawn with the same encoding
 * at their offset, draggable relative to the analyzed data. The
 * selection frame can be drawn, moved, and resized with its handles;
 * releasing it commits the new window and triggers the high
 * resolution fetch.
 */

const LEFT = 70;
const RIGHT = 12;
const TOP = 6;
const ROW_H = 34;
const ROW_GAP = 4;
const SUG_ROW_H = 22;

export function sliderX(index: number, samples: number, left: number, width: number): number {
  if (samples <= 1) return left;
  return left + (index / (samples - 1)) * width;
}

export function sliderIndex(x: number, samples: number, left: number, width: number): number {
  if (width <= 0 || samples <= 1) return 0;
  const i = Math.round(((x - left) / width) * (samples - 1));
  return Math.min(samples - 1, Math.max(0, i));
}

export interface SliderExtras {
  marks: Record<string, SeverityMark[]>;
  suggestions: SuggestionRow[];
  highlights: Highlight[];
  order: string[];
  instanceData: ReadonlyMap<string, InstanceDocument>;
  annotations: ReadonlyMap<string, string>;
}

export interface SliderContext {
  dispatch: (ev: ViewEvent) => void;
  commitWindow: (from: number, to: number) => void;
}

type DragMode =
  | { kind: "none" }
  | { kind: "draw"; anchor: number }
  | { kind: "move"; grabOffset: number; width: number }
  | { kind: "resize"; edge: "left" | "right" }
  | { kind: "instance"; id: string; grab: number };

export function createTimeSlider(canvas: HTMLCanvasElement, ctx: SliderContext) {
  let drag: DragMode = { kind: "none" };
  let lastView: SeriesView | null = null;
  let lastState: ViewState | null = null;
  let lastExtras: SliderExtras | null = null;
  let tooltip: HTMLDivElement | null = null;

  const plotWidth = () => canvas.width - LEFT - RIGHT;
  const xOf = (i: number) => sliderX(i, lastView?.samples ?? 0, LEFT, plotWidth());
  const iOf = (x: number) => sliderIndex(x, lastView?.samples ?? 0, LEFT, plotWidth());

  function rowY(idx: number): number {
    return TOP + idx * (ROW_H + ROW_GAP);
  }

  function suggestionTop(): number {
    const n = lastExtras?.order.length ?? 0;
    return rowY(n) + 8;
  }

  function render(view: SeriesView | null, state: ViewState, extras: SliderExtras): void {
    lastView = view;
    lastState = state;
    lastExtras = extras;
    const g = canvas.getContext?.("2d");
    if (!g) return;

    canvas.height = suggestionTop() + extras.suggestions.length * (SUG_ROW_H + ROW_GAP) + 10;
    g.clearRect(0, 0, canvas.width, canvas.height);
    g.fillStyle = "#16181d";
    g.fillRect(0, 0, canvas.width, canvas.height);
    if (!view) {
      g.fillStyle = "#8a8f98";
      g.font = "13px sans-serif";
      g.fillText("no data loaded", LEFT, 24);
      return;
    }

    const hoverInstance =
      state.hovered?.kind === "instance" ? extras.instanceData.get(state.hovered.id) : undefined;

    extras.order.forEach((device, idx) => {
      const dev = view.devices[device];
      const y = rowY(idx);
      // severity tint behind the line
      for (const mark of extras.marks[device] ?? []) {
        g.fillStyle = mark.level === "alert" ? "rgba(229,72,62,0.35)" : "rgba(235,175,49,0.25)";
        g.fillRect(xOf(mark.start), y, Math.max(1, xOf(mark.end) - xOf(mark.start)), ROW_H);
      }
      // guidance highlight over the excursion
      for (const h of extras.highlights) {
        if (h.device !== device) continue;
        g.fillStyle = "rgba(120,220,255,0.22)";
        g.fillRect(xOf(h.start), y, Math.max(1, xOf(h.end) - xOf(h.start)), ROW_H);
      }
      if (hoverInstance && hoverInstance.segments[device]) {
        g.strokeStyle = "#78dcff";
        g.strokeRect(LEFT - 2, y - 1, plotWidth() + 4, ROW_H + 2);
      }
      if (!dev || !dev.overview.length) {
        g.fillStyle = "#8a8f98";
        g.font = "11px sans-serif";
        g.fillText(`${device} (no data)`, LEFT, y + ROW_H / 2);
        return;
      }
      let lo = Infinity;
      let hi = -Infinity;
      for (const p of dev.overview) {
        if (p.reading < lo) lo = p.reading;
        if (p.reading > hi) hi = p.reading;
      }
      if (!(lo < hi)) {
        lo -= 1;
        hi += 1;
      }
      g.strokeStyle = "#9ecbff";
      g.lineWidth = 1;
      g.beginPath();
      dev.overview.forEach((p, k) => {
        const px = xOf(p.index);
        const py = y + ROW_H - ((p.reading - lo) / (hi - lo)) * ROW_H;
        if (k === 0) g.moveTo(px, py);
        else g.lineTo(px, py);
      });
      g.stroke();
      g.fillStyle = "#c8cdd4";
      g.font = "11px sans-serif";
      g.fillText(device, 6, y + ROW_H / 2 + 4);
    });

    // suggestion strands below, same encoding, at their offsets
    extras.suggestions.forEach((s, k) => {
      const y = suggestionTop() + k * (SUG_ROW_H + ROW_GAP);
      const sel = state.selected.find((it) => it.id === s.instance);
      const offset = sel ? sel.offset : s.initial_offset;
      const doc = extras.instanceData.get(s.instance);
      const len = doc ? Math.max(...Object.values(doc.segments).map((seg) => seg.readings.length)) : 120;
      const x0 = xOf(offset);
      const x1 = xOf(Math.min(view.samples - 1, offset + len));
      g.fillStyle = sel ? "rgba(134,196,109,0.45)" : "rgba(134,196,109,0.18)";
      g.fillRect(x0, y, Math.max(2, x1 - x0), SUG_ROW_H);
      if (doc) {
        const ref = doc.vis_settings.colormap_reference;
        for (const seg of Object.values(doc.segments)) {
          const step = Math.max(1, Math.floor(seg.readings.length / Math.max(1, x1 - x0)));
          for (let i = 0; i < seg.readings.length; i += step) {
            const px = xOf(Math.min(view.samples - 1, offset + i));
            g.fillStyle = colorFor(doc.vis_settings.colormap, seg.readings[i], ref[0], ref[1]);
            g.fillRect(px, y + SUG_ROW_H - 6, 2, 5);
          }
        }
      }
      g.fillStyle = state.hovered?.kind === "instance" && state.hovered.id === s.instance ? "#78dcff" : "#c8cdd4";
      g.font = "11px sans-serif";
      g.fillText(s.name, 6, y + SUG_ROW_H / 2 + 4);
    });

    // selection frame with resize handles
    const { from, to } = state.window;
    if (to > from) {
      const x0 = xOf(from);
      const x1 = xOf(to - 1);
      g.strokeStyle = "#e7e9ee";
      g.lineWidth = 1.5;
      g.strokeRect(x0, TOP, Math.max(2, x1 - x0), suggestionTop() - TOP - 6);
      g.fillStyle = "#e7e9ee";
      g.fillRect(x0 - 3, TOP, 3, suggestionTop() - TOP - 6);
      g.fillRect(x1, TOP, 3, suggestionTop() - TOP - 6);
    }
  }

  function suggestionAt(y: number): SuggestionRow | null {
    if (!lastExtras) return null;
    const rel = y - suggestionTop();
    if (rel < 0) return null;
    const k = Math.floor(rel / (SUG_ROW_H + ROW_GAP));
    return lastExtras.suggestions[k] ?? null;
  }

  function deviceAt(y: number): string | null {
    if (!lastExtras) return null;
    const k = Math.floor((y - TOP) / (ROW_H + ROW_GAP));
    return k >= 0 ? (lastExtras.order[k] ?? null) : null;
  }

  function showTooltip(x: number, y: number, text: string): void {
    if (!tooltip) {
      tooltip = document.createElement("div");
      tooltip.className = "slider-tooltip";
      canvas.parentElement?.appendChild(tooltip);
    }
    tooltip.textContent = text;
    tooltip.style.left = `${x + 14}px`;
    tooltip.style.top = `${y + 14}px`;
    tooltip.style.display = "block";
  }

  function hideTooltip(): void {
    if (tooltip) tooltip.style.display = "none";
  }

  canvas.addEventListener("mousedown", (ev) => {
    if (!lastView || !lastState) return;
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    const sug = suggestionAt(y);
    if (sug) {
      const sel = lastState.selected.find((it) => it.id === sug.instance);
      const offset = sel ? sel.offset : sug.initial_offset;
      drag = { kind: "instance", id: sug.instance, grab: iOf(x) - offset };
      return;
    }
    const { from, to } = lastState.window;
    if (to > from) {
      const x0 = xOf(from);
      const x1 = xOf(to - 1);
      if (Math.abs(x - x0) < 6) {
        drag = { kind: "resize", edge: "left" };
        return;
      }
      if (Math.abs(x - x1) < 6) {
        drag = { kind: "resize", edge: "right" };
        return;
      }
      if (x > x0 && x < x1) {
        drag = { kind: "move", grabOffset: iOf(x) - from, width: to - from };
        return;
      }
    }
    drag = { kind: "draw", anchor: iOf(x) };
  });

  canvas.addEventListener("mousemove", (ev) => {
    if (!lastView || !lastState || !lastExtras) return;
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    if (drag.kind === "none") {
      const sug = suggestionAt(y);
      if (sug) {
        ctx.dispatch({ type: "hover", target: { kind: "instance", id: sug.instance } });
        const note = lastExtras.annotations.get(sug.instance);
        if (note) showTooltip(x, y, note);
        else hideTooltip();
      } else {
        hideTooltip();
        const dev = deviceAt(y);
        if (dev) {
          ctx.dispatch({ type: "hover", target: { kind: "sample", id: dev, index: iOf(x) } });
        } else if (lastState.hovered) {
          ctx.dispatch({ type: "unhover" });
        }
      }
      return;
    }
    const i = iOf(x);
    if (drag.kind === "instance") {
      ctx.dispatch({ type: "instance-drag", id: drag.id, offset: i - drag.grab });
    } else if (drag.kind === "draw") {
      ctx.dispatch({ type: "window", from: Math.min(drag.anchor, i), to: Math.max(drag.anchor, i) + 1 });
    } else if (drag.kind === "move") {
      const from = Math.max(0, Math.min(i - drag.grabOffset, lastView.samples - drag.width));
      ctx.dispatch({ type: "window", from, to: from + drag.width });
    } else {
      const { from, to } = lastState.window;
      if (drag.edge === "left") ctx.dispatch({ type: "window", from: Math.min(i, to - 1), to });
      else ctx.dispatch({ type: "window", from, to: Math.max(i + 1, from + 1) });
    }
  });

  canvas.addEventListener("mouseup", () => {
    if (!lastState) return;
    const wasWindowDrag = drag.kind === "draw" || drag.kind === "move" || drag.kind === "resize";
    drag = { kind: "none" };
    if (wasWindowDrag) {
      ctx.commitWindow(lastState.window.from, lastState.window.to);
    }
  });

  canvas.addEventListener("mouseleave", () => {
    hideTooltip();
    if (lastState?.hovered) ctx.dispatch({ type: "unhover" });
  });

  return { render };
}
