import type { InstanceBody, OntologyClassRow } from "./types.js";
import type { StoringDraft, ViewEvent, ViewState } from "./state.js";
import { effectivePeriod } from "./state.js";
import type { WindowData } from "./seriesData.js";
import { ApiError } from "./api.js";

/**
 * Storing workflow. One click on the storing button enters storing
 * mode; devices are picked by clicking their rows; each shows its
 * automatic classification in a dropdown of every ontology class so
 * the analyst can override it; annotations are free text per device
 * and for the whole instance. A second click on the same button
 * builds the instance body from the current window and view settings
 * and posts it. A rejected save keeps the draft and shows the
 * field-level messages inline.
 */

export function validateDraft(draft: StoringDraft): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!draft.name.trim()) errors.name = "give the instance a name";
  if (!draft.devices.length) errors.devices = "select at least one device";
  for (const dev of draft.devices) {
    if (!draft.classByDevice[dev]) errors[`labels.${dev}`] = "pick a class";
  }
  return errors;
}

/**
 * The saved instance carries the involved devices, the selected time
 * frame, the windowed data and abnormality ratings, the annotations,
 * and the current period, colormap and colormap reference.
 */
export function buildInstanceBody(
  draft: StoringDraft,
  view: ViewState,
  data: WindowData,
): InstanceBody {
  const segments: InstanceBody["segments"] = {};
  let lo = Infinity;
  let hi = -Infinity;
  for (const dev of draft.devices) {
    const readings = data.readings[dev] ?? [];
    const ratings = data.ratings[dev] ?? [];
    segments[dev] = {
      t0: data.t0 + data.from * data.dt,
      dt: data.dt,
      readings,
      ratings,
    };
    for (const v of readings) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  let reference = view.colormapReference;
  if (!reference) {
    // derive from the stored data when nothing was prescribed
    reference = Number.isFinite(lo) && lo < hi ? [lo, hi] : [0, 1];
  }
  const annotations: Record<string, string> = {};
  for (const dev of draft.devices) {
    const note = draft.deviceAnnotations[dev];
    if (note) annotations[dev] = note;
  }
  return {
    name: draft.name.trim(),
    labels: draft.devices
      .filter((dev) => draft.classByDevice[dev])
      .map((dev) => ({ device: dev, class: draft.classByDevice[dev] })),
    segments,
    instance_annotation: draft.instanceAnnotation,
    device_annotations: annotations,
    vis_settings: {
      period_seconds: effectivePeriod(view),
      colormap: view.colormap,
      colormap_reference: reference,
    },
  };
}

export interface StoringContext {
  classes: () => OntologyClassRow[];
  /** device to automatically classified final class, from the incidents */
  autoClasses: () => Record<string, string>;
  devices: () => string[];
  windowData: () => WindowData | null;
  dispatch: (ev: ViewEvent) => void;
  save: (body: InstanceBody) => Promise<string>;
  onStored?: (id: string) => void;
}

function fieldError(panel: HTMLElement, key: string, errors: Record<string, string>): void {
  const msg = errors[key];
  if (!msg) return;
  const el = document.createElement("div");
  el.className = "field-error";
  el.dataset.field = key;
  el.textContent = msg;
  panel.appendChild(el);
}

export function renderStoring(
  button: HTMLButtonElement,
  panel: HTMLElement,
  state: ViewState,
  ctx: StoringContext,
): void {
  const draft = state.storing;
  button.textContent = draft ? "save instance" : "store instance";
  button.classList.toggle("armed", !!draft);
  button.onclick = () => {
    if (!state.storing) {
      ctx.dispatch({ type: "storing-toggle", autoClasses: ctx.autoClasses() });
      return;
    }
    submit(state.storing, state, ctx);
  };

  panel.textContent = "";
  panel.classList.toggle("hidden", !draft);
  if (!draft) return;

  fieldError(panel, "", draft.errors);

  const nameLabel = document.createElement("label");
  nameLabel.textContent = "name ";
  const nameInput = document.createElement("input");
  nameInput.type = "text";
  nameInput.className = "storing-name";
  nameInput.value = draft.name;
  nameInput.onchange = () => ctx.dispatch({ type: "storing-name", name: nameInput.value });
  nameLabel.appendChild(nameInput);
  panel.appendChild(nameLabel);
  fieldError(panel, "name", draft.errors);
  fieldError(panel, "devices", draft.errors);

  const list = document.createElement("div");
  list.className = "storing-devices";
  const classes = ctx.classes();
  for (const dev of ctx.devices()) {
    const row = document.createElement("div");
    row.className = "storing-device" + (draft.devices.includes(dev) ? " picked" : "");
    row.dataset.device = dev;

    const name = document.createElement("span");
    name.textContent = dev;
    name.className = "storing-device-name";
    name.onclick = () =>
      ctx.dispatch({
        type: "storing-device-click",
        device: dev,
        autoClass: ctx.autoClasses()[dev] ?? null,
      });
    row.appendChild(name);

    if (draft.devices.includes(dev)) {
      const select = document.createElement("select");
      select.className = "storing-class";
      for (const cls of classes) {
        const opt = document.createElement("option");
        opt.value = cls.id;
        opt.textContent = cls.name;
        opt.selected = draft.classByDevice[dev] === cls.id;
        select.appendChild(opt);
      }
      select.onchange = () =>
        ctx.dispatch({ type: "storing-class", device: dev, cls: select.value });
      row.appendChild(select);

      const note = document.createElement("input");
      note.type = "text";
      note.className = "storing-device-note";
      note.placeholder = "annotation";
      note.value = draft.deviceAnnotations[dev] ?? "";
      note.onchange = () =>
        ctx.dispatch({ type: "storing-annotation", device: dev, text: note.value });
      row.appendChild(note);
      fieldError(row, `labels.${dev}`, draft.errors);
    }
    list.appendChild(row);
  }
  panel.appendChild(list);

  const noteLabel = document.createElement("label");
  noteLabel.textContent = "instance annotation ";
  const note = document.createElement("textarea");
  note.className = "storing-annotation";
  note.value = draft.instanceAnnotation;
  note.onchange = () =>
    ctx.dispatch({ type: "storing-annotation", device: null, text: note.value });
  noteLabel.appendChild(note);
  panel.appendChild(noteLabel);
}

function submit(draft: StoringDraft, state: ViewState, ctx: StoringContext): void {
  const errors = validateDraft(draft);
  const data = ctx.windowData();
  if (!data) errors.devices = errors.devices ?? "select a window with data first";
  if (Object.keys(errors).length || !data) {
    ctx.dispatch({ type: "storing-errors", errors });
    return;
  }
  const body = buildInstanceBody(draft, state, data);
  ctx
    .save(body)
    .then((id) => {
      ctx.dispatch({ type: "storing-saved" });
      ctx.onStored?.(id);
    })
    .catch((err) => {
      const errors: Record<string, string> = {};
      if (err instanceof ApiError && err.fieldErrors.length) {
        for (const fe of err.fieldErrors) errors[fe.field] = fe.message;
      } else {
        errors[""] = String(err instanceof Error ? err.message : err);
      }
      ctx.dispatch({ type: "storing-errors", errors });
    });
}
