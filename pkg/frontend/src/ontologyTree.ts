import type { OntologyClassRow, OntologyPayload } from "./types.js";
import type { ViewEvent, ViewState } from "./state.js";

/**
 * Browsable tree of the acting ontology: class names with their
 * triggers and callback, collapsible per node, documentation in the
 * detail pane. In storing mode a click on a class assigns it to the
 * devices currently picked in the draft.
 */

export function createOntologyTree(
  container: HTMLElement,
  detail: HTMLElement,
  dispatch: (ev: ViewEvent) => void,
) {
  const collapsed = new Set<string>();
  let payload: OntologyPayload | null = null;
  let state: ViewState | null = null;

  function childrenOf(parent: string | null): OntologyClassRow[] {
    if (!payload) return [];
    return payload.document.classes.filter((c) => c.parent === parent);
  }

  function showDetail(cls: OntologyClassRow): void {
    detail.textContent = "";
    const title = document.createElement("h3");
    title.textContent = cls.name;
    detail.appendChild(title);
    const doc = document.createElement("p");
    doc.textContent = payload?.documentation[cls.id] ?? cls.annotations;
    detail.appendChild(doc);
    if (cls.qualifiers.length) {
      const q = document.createElement("p");
      q.textContent = `qualifiers: ${cls.qualifiers.join(", ")}`;
      detail.appendChild(q);
    }
  }

  function nodeFor(cls: OntologyClassRow): HTMLElement {
    const node = document.createElement("div");
    node.className = "tree-node";
    node.dataset.class = cls.id;

    const row = document.createElement("div");
    row.className = "tree-row";
    const kids = childrenOf(cls.id);

    if (kids.length) {
      const toggle = document.createElement("span");
      toggle.className = "tree-toggle";
      toggle.textContent = collapsed.has(cls.id) ? "+" : "-";
      toggle.onclick = (ev) => {
        ev.stopPropagation();
        if (collapsed.has(cls.id)) collapsed.delete(cls.id);
        else collapsed.add(cls.id);
        render(payload!, state!);
      };
      row.appendChild(toggle);
    }

    const name = document.createElement("span");
    name.className = "tree-name";
    name.textContent = cls.name;
    row.appendChild(name);

    const meta: string[] = [];
    if (cls.triggers.length) meta.push(`on ${cls.triggers.join("|")}`);
    if (cls.callback) meta.push(cls.callback);
    if (meta.length) {
      const info = document.createElement("span");
      info.className = "tree-meta";
      info.textContent = ` ${meta.join("; ")}`;
      row.appendChild(info);
    }

    row.onclick = () => {
      showDetail(cls);
      const draft = state?.storing;
      if (draft) {
        for (const dev of draft.devices) {
          dispatch({ type: "storing-class", device: dev, cls: cls.id });
        }
      }
    };
    node.appendChild(row);

    if (kids.length && !collapsed.has(cls.id)) {
      const sub = document.createElement("div");
      sub.className = "tree-children";
      for (const kid of kids) sub.appendChild(nodeFor(kid));
      node.appendChild(sub);
    }
    return node;
  }

  function render(p: OntologyPayload, s: ViewState): void {
    payload = p;
    state = s;
    container.textContent = "";
    for (const root of childrenOf(null)) container.appendChild(nodeFor(root));
  }

  return { render };
}
