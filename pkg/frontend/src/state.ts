import type { SuggestionRow } from "./types.js";
import { COLORMAP_NAMES } from "./colormaps.js";

/**
 * All UI state lives in one ViewState object and every change goes
 * through reduce(state, event). The reducer is a pure function, so
 * replaying an event log reproduces the exact same state; rendering
 * and fetching react to the result but never mutate it directly.
 */

export interface HoverTarget {
  kind: "sample" | "instance" | "incident";
  /** device for samples, instance id for instances, incident id for incidents */
  id: string;
  /** absolute sample index for samples, undefined otherwise */
  index?: number;
}

export interface SelectedInstance {
  id: string;
  /** absolute sample index where the instance strand starts */
  offset: number;
}

export interface StoringDraft {
  name: string;
  devices: string[];
  classByDevice: Record<string, string>;
  instanceAnnotation: string;
  deviceAnnotations: Record<string, string>;
  /** field-level messages from a rejected save, keyed by field path */
  errors: Record<string, string>;
}

export interface ViewState {
  /** analyzed sample count, 0 until the first series payload lands */
  samples: number;
  window: { from: number; to: number };
  devices: string[];
  /** spiral period in seconds, shared by every strand */
  periodSeconds: number;
  /** manual integral multiple for crowded spirals */
  periodMultiple: number;
  colormap: string;
  /** null means derive the reference from the visible data */
  colormapReference: [number, number] | null;
  selected: SelectedInstance[];
  hovered: HoverTarget | null;
  storing: StoringDraft | null;
}

export function initialState(): ViewState {
  return {
    samples: 0,
    window: { from: 0, to: 0 },
    devices: [],
    periodSeconds: 60,
    periodMultiple: 1,
    colormap: "viridis",
    colormapReference: null,
    selected: [],
    hovered: null,
    storing: null,
  };
}

export type ViewEvent =
  | { type: "data-loaded"; samples: number; devices: string[] }
  | { type: "window"; from: number; to: number }
  | { type: "device-toggle"; device: string }
  | { type: "period"; seconds: number }
  | { type: "period-multiple"; multiple: number }
  | { type: "colormap"; name: string }
  | { type: "colormap-reference"; reference: [number, number] | null }
  | { type: "suggestion-click"; suggestion: SuggestionRow; alt: boolean }
  | { type: "instance-drag"; id: string; offset: number }
  | { type: "hover"; target: HoverTarget }
  | { type: "unhover" }
  | { type: "storing-toggle"; autoClasses: Record<string, string> }
  | { type: "storing-name"; name: string }
  | { type: "storing-device-click"; device: string; autoClass: string | null }
  | { type: "storing-class"; device: string; cls: string }
  | { type: "storing-annotation"; device: string | null; text: string }
  | { type: "storing-errors"; errors: Record<string, string> }
  | { type: "storing-saved" };

function clampOffset(offset: number, samples: number): number {
  if (samples <= 0) return 0;
  return Math.min(samples - 1, Math.max(0, Math.round(offset)));
}

function emptyDraft(): StoringDraft {
  return {
    name: "",
    devices: [],
    classByDevice: {},
    instanceAnnotation: "",
    deviceAnnotations: {},
    errors: {},
  };
}

export function reduce(state: ViewState, event: ViewEvent): ViewState {
  switch (event.type) {
    case "data-loaded":
      return {
        ...state,
        samples: event.samples,
        devices: event.devices,
        window: {
          from: Math.min(state.window.from, event.samples),
          to: Math.min(state.window.to, event.samples),
        },
        selected: state.selected.map((s) => ({
          ...s,
          offset: clampOffset(s.offset, event.samples),
        })),
      };

    case "window": {
      const from = Math.max(0, Math.min(event.from, event.to));
      const to = Math.min(state.samples || event.to, Math.max(event.from, event.to));
      return { ...state, window: { from, to } };
    }

    case "device-toggle": {
      const devices = state.devices.includes(event.device)
        ? state.devices.filter((d) => d !== event.device)
        : [...state.devices, event.device];
      return { ...state, devices };
    }

    case "period":
      return event.seconds > 0 ? { ...state, periodSeconds: event.seconds } : state;

    case "period-multiple": {
      const m = Math.max(1, Math.round(event.multiple));
      return { ...state, periodMultiple: m };
    }

    case "colormap":
      return COLORMAP_NAMES.includes(event.name)
        ? { ...state, colormap: event.name }
        : state;

    case "colormap-reference":
      if (event.reference && !(event.reference[0] < event.reference[1])) return state;
      return { ...state, colormapReference: event.reference };

    case "suggestion-click": {
      const { suggestion, alt } = event;
      const already = state.selected.some((s) => s.id === suggestion.instance);
      const selected = already
        ? state.selected.filter((s) => s.id !== suggestion.instance)
        : [
            ...state.selected,
            {
              id: suggestion.instance,
              offset: clampOffset(suggestion.initial_offset, state.samples),
            },
          ];
      if (!alt) return { ...state, selected };
      // Alt prescribes the stored view settings on top of selecting
      const vs = suggestion.vis_settings;
      return {
        ...state,
        selected,
        periodSeconds: vs.period_seconds,
        colormap: vs.colormap,
        colormapReference: [vs.colormap_reference[0], vs.colormap_reference[1]],
      };
    }

    case "instance-drag":
      return {
        ...state,
        selected: state.selected.map((s) =>
          s.id === event.id ? { ...s, offset: clampOffset(event.offset, state.samples) } : s,
        ),
      };

    case "hover":
      return { ...state, hovered: event.target };

    case "unhover":
      return { ...state, hovered: null };

    case "storing-toggle":
      if (state.storing) return state; // leaving storing mode means saving
      return {
        ...state,
        storing: { ...emptyDraft(), classByDevice: { ...event.autoClasses } },
      };

    case "storing-name":
      if (!state.storing) return state;
      return { ...state, storing: { ...state.storing, name: event.name } };

    case "storing-device-click": {
      if (!state.storing) return state;
      const draft = state.storing;
      const picked = draft.devices.includes(event.device);
      const devices = picked
        ? draft.devices.filter((d) => d !== event.device)
        : [...draft.devices, event.device];
      const classByDevice = { ...draft.classByDevice };
      if (!picked && event.autoClass && !classByDevice[event.device]) {
        classByDevice[event.device] = event.autoClass;
      }
      return { ...state, storing: { ...draft, devices, classByDevice } };
    }

    case "storing-class":
      if (!state.storing) return state;
      return {
        ...state,
        storing: {
          ...state.storing,
          classByDevice: { ...state.storing.classByDevice, [event.device]: event.cls },
        },
      };

    case "storing-annotation": {
      if (!state.storing) return state;
      if (event.device === null) {
        return { ...state, storing: { ...state.storing, instanceAnnotation: event.text } };
      }
      return {
        ...state,
        storing: {
          ...state.storing,
          deviceAnnotations: {
            ...state.storing.deviceAnnotations,
            [event.device]: event.text,
          },
        },
      };
    }

    case "storing-errors":
      // rejected save keeps the draft so nothing typed is lost
      if (!state.storing) return state;
      return { ...state, storing: { ...state.storing, errors: event.errors } };

    case "storing-saved":
      return { ...state, storing: null };
  }
}

/** Spiral period after the manual integral-multiple control. */
export function effectivePeriod(state: ViewState): number {
  return state.periodSeconds * state.periodMultiple;
}

export class Store {
  state: ViewState;
  private listeners: ((state: ViewState) => void)[] = [];

  constructor(state: ViewState = initialState()) {
    this.state = state;
  }

  dispatch(event: ViewEvent): void {
    this.state = reduce(this.state, event);
    for (const fn of this.listeners) fn(this.state);
  }

  subscribe(fn: (state: ViewState) => void): void {
    this.listeners.push(fn);
  }
}
