import { ApiClient } from "./api.js";
import { COLORMAP_NAMES } from "./colormaps.js";
import { strandOrder } from "./cluster.js";
import { guidanceHighlights, type Highlight } from "./guidance.js";
import { viewOf, windowData, type SeriesView } from "./seriesData.js";
import { Store, type ViewEvent } from "./state.js";
import { createOntologyTree } from "./ontologyTree.js";
import { createSpiralChart } from "./spiralChart.js";
import { createTimeSlider } from "./timeSlider.js";
import { renderStoring } from "./storing.js";
import { renderSuggestionList } from "./suggestions.js";
import type {
  IncidentsPayload,
  InstanceDocument,
  OntologyPayload,
  SuggestionsPayload,
} from "./types.js";

/** Composition root: owns the fetched payloads and re-renders on every state change. */

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function startApp(): void {
  const api = new ApiClient();
  const store = new Store();

  let series: SeriesView | null = null;
  let incidents: IncidentsPayload | null = null;
  let ontology: OntologyPayload | null = null;
  let suggestions: SuggestionsPayload | null = null;
  const instanceDocs = new Map<string, InstanceDocument>();
  let seriesAbort: AbortController | null = null;
  let mode: "literal" | "similarity" = "literal";

  const dispatch = (ev: ViewEvent) => store.dispatch(ev);

  const slider = createTimeSlider(el<HTMLCanvasElement>("slider"), {
    dispatch,
    commitWindow: (from, to) => void refreshWindow(from, to),
  });
  const spirals = createSpiralChart(el("spirals"), dispatch);
  const tree = createOntologyTree(el("tree"), el("tree-detail"), dispatch);

  function annotationsOf(): Map<string, string> {
    const out = new Map<string, string>();
    for (const [id, doc] of instanceDocs) {
      const notes = [doc.instance_annotation, ...Object.values(doc.device_annotations)]
        .filter(Boolean)
        .join(" / ");
      if (notes) out.set(id, notes);
    }
    return out;
  }

  function autoClasses(): Record<string, string> {
    const out: Record<string, string> = {};
    if (!incidents) return out;
    const { from, to } = store.state.window;
    for (const row of incidents.incidents) {
      if (to > from && (row.end <= from || row.start >= to)) continue;
      const cls = row.manual_class ?? (row.complete ? row.path[row.path.length - 1] : null);
      if (cls) out[row.device] = cls;
    }
    return out;
  }

  function highlights(): Highlight[] {
    if (!incidents || !ontology) return [];
    return guidanceHighlights(incidents.incidents, ontology.document.classes);
  }

  function render(): void {
    const state = store.state;
    slider.render(series, state, {
      marks: incidents?.marks ?? {},
      suggestions: suggestions?.suggestions ?? [],
      highlights: highlights(),
      order: series ? strandOrder(overviewReadings()) : [],
      instanceData: instanceDocs,
      annotations: annotationsOf(),
    });
    spirals.render(series ? windowData(series) : null, state, {
      highlights: highlights(),
      instanceData: instanceDocs,
    });
    if (ontology) tree.render(ontology, state);
    renderSuggestionList(
      el("suggestions"),
      suggestions?.suggestions ?? [],
      new Set(state.selected.map((s) => s.id)),
      dispatch,
      annotationsOf(),
    );
    renderStoring(el<HTMLButtonElement>("storing-button"), el("storing-panel"), state, {
      classes: () => ontology?.document.classes ?? [],
      autoClasses,
      devices: () => state.devices,
      windowData: () => (series ? windowData(series) : null),
      dispatch,
      save: (body) => api.storeInstance(body),
      onStored: () => void refreshSuggestions(),
    });
    renderIncidentPanel();
    renderControls();
  }

  function overviewReadings(): Record<string, number[]> {
    const out: Record<string, number[]> = {};
    if (!series) return out;
    for (const dev of store.state.devices) {
      out[dev] = (series.devices[dev]?.overview ?? []).map((p) => p.reading);
    }
    return out;
  }

  function renderIncidentPanel(): void {
    const panel = el("incidents");
    panel.textContent = "";
    if (!incidents) return;
    for (const row of incidents.incidents) {
      const div = document.createElement("div");
      div.className = "incident-row" + (row.complete ? "" : " stalled");
      const text = document.createElement("span");
      const cls = row.manual_class ?? (row.complete ? row.path[row.path.length - 1] : "unclassified");
      const qual = row.qualifier ? ` [${row.qualifier}]` : "";
      text.textContent = `${row.device} ${row.start}..${row.end} ${cls}${qual}`;
      if (row.error) text.title = row.error;
      div.appendChild(text);
      if (!row.complete && ontology) {
        // stalled incidents get a manual classification dropdown
        const select = document.createElement("select");
        const blank = document.createElement("option");
        blank.value = "";
        blank.textContent = "classify as";
        select.appendChild(blank);
        for (const cls of ontology.document.classes) {
          const opt = document.createElement("option");
          opt.value = cls.id;
          opt.textContent = cls.name;
          select.appendChild(opt);
        }
        select.onchange = () => {
          if (!select.value) return;
          api
            .classifyIncident(row.id, select.value)
            .then(() => refreshIncidents())
            .catch((err) => window.alert(String(err)));
        };
        div.appendChild(select);
      }
      panel.appendChild(div);
    }
  }

  function renderControls(): void {
    const state = store.state;
    const period = el<HTMLInputElement>("period");
    if (document.activeElement !== period) period.value = String(state.periodSeconds);
    const multiple = el<HTMLSelectElement>("period-multiple");
    multiple.value = String(state.periodMultiple);
    const colormap = el<HTMLSelectElement>("colormap");
    colormap.value = state.colormap;
  }

  async function refreshWindow(from: number, to: number): Promise<void> {
    seriesAbort?.abort();
    seriesAbort = new AbortController();
    try {
      const payload = await api.series({ start: from, end: to }, seriesAbort.signal);
      series = viewOf(payload);
      dispatch({
        type: "data-loaded",
        samples: payload.samples,
        devices: store.state.devices.length ? store.state.devices : Object.keys(payload.devices).slice(0, 4),
      });
      await refreshSuggestions();
    } catch (err) {
      if ((err as Error).name !== "AbortError") console.error(err);
    }
    render();
  }

  async function refreshSuggestions(): Promise<void> {
    const { from, to } = store.state.window;
    suggestions = await api.suggestions(from, to, mode);
    await Promise.all(
      suggestions.suggestions.map(async (s) => {
        if (!instanceDocs.has(s.instance)) {
          instanceDocs.set(s.instance, await api.instance(s.instance));
        }
      }),
    );
    render();
  }

  async function refreshIncidents(): Promise<void> {
    incidents = await api.incidents();
    await refreshSuggestions();
  }

  el<HTMLInputElement>("period").onchange = (ev) => {
    const v = Number((ev.target as HTMLInputElement).value);
    if (v > 0) dispatch({ type: "period", seconds: v });
  };
  el<HTMLSelectElement>("period-multiple").onchange = (ev) => {
    dispatch({ type: "period-multiple", multiple: Number((ev.target as HTMLSelectElement).value) });
  };
  const colormapSelect = el<HTMLSelectElement>("colormap");
  for (const name of COLORMAP_NAMES) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    colormapSelect.appendChild(opt);
  }
  colormapSelect.onchange = () => dispatch({ type: "colormap", name: colormapSelect.value });
  const modeSelect = el<HTMLSelectElement>("mode");
  modeSelect.onchange = () => {
    mode = modeSelect.value === "similarity" ? "similarity" : "literal";
    void refreshSuggestions();
  };

  store.subscribe(render);

  void (async () => {
    try {
      const [payload, inc, ont] = await Promise.all([
        api.series({}),
        api.incidents(),
        api.ontology(),
      ]);
      series = viewOf(payload);
      incidents = inc;
      ontology = ont;
      dispatch({
        type: "data-loaded",
        samples: payload.samples,
        devices: Object.keys(payload.devices).slice(0, 4),
      });
      await refreshSuggestions();
    } catch (err) {
      el("suggestions").textContent = `service unreachable: ${String(err)}`;
    }
    render();
  })();
}

if (typeof document !== "undefined" && document.getElementById("slider")) {
  startApp();
}
