import type { SuggestionRow } from "./types.js";
import type { ViewEvent } from "./state.js";

/**
 * Ranked suggestion list under the time slider. Plain click selects
 * or deselects an instance for display; holding Alt while clicking
 * additionally prescribes the instance's stored period, colormap and
 * colormap reference onto the whole view.
 */

export function renderSuggestionList(
  container: HTMLElement,
  suggestions: SuggestionRow[],
  selectedIds: ReadonlySet<string>,
  dispatch: (ev: ViewEvent) => void,
  annotations: ReadonlyMap<string, string> = new Map(),
): void {
  container.textContent = "";
  if (!suggestions.length) {
    const empty = document.createElement("div");
    empty.className = "suggestion-empty";
    empty.textContent = "no suggestions for this window";
    container.appendChild(empty);
    return;
  }

  for (const s of suggestions) {
    const row = document.createElement("div");
    row.className = "suggestion-row" + (selectedIds.has(s.instance) ? " selected" : "");
    row.dataset.instance = s.instance;

    const name = document.createElement("span");
    name.className = "suggestion-name";
    name.textContent = s.name;

    const meta = document.createElement("span");
    meta.className = "suggestion-meta";
    const labels = s.matched_labels.map(([d, c]) => `${d}/${c}`).join(", ");
    meta.textContent = `rank ${s.rank_value.toFixed(3)} at ${s.initial_offset} (${labels})`;

    row.append(name, meta);
    const note = annotations.get(s.instance);
    if (note) row.title = note;

    row.addEventListener("click", (ev: MouseEvent) => {
      dispatch({ type: "suggestion-click", suggestion: s, alt: ev.altKey });
    });
    row.addEventListener("mouseenter", () => {
      dispatch({ type: "hover", target: { kind: "instance", id: s.instance } });
    });
    row.addEventListener("mouseleave", () => {
      dispatch({ type: "unhover" });
    });

    container.appendChild(row);
  }
}
