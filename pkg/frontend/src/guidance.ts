import type { IncidentRow, OntologyClassRow } from "./types.js";

/**
 * Guidance turns classification outcomes into visual cues. The
 * ontology document attaches guidance actions to classes; the only
 * shipped kind highlights the period containing the abnormal values.
 */

export interface Highlight {
  device: string;
  start: number;
  end: number;
  incident: string;
}

function finalClass(row: IncidentRow): string | null {
  if (row.manual_class) return row.manual_class;
  if (row.complete && row.path.length) return row.path[row.path.length - 1];
  return null;
}

export function guidanceHighlights(
  incidents: IncidentRow[],
  classes: OntologyClassRow[],
): Highlight[] {
  const byId = new Map(classes.map((c) => [c.id, c]));
  const out: Highlight[] = [];
  for (const row of incidents) {
    const cls = finalClass(row);
    if (!cls) continue;
    const node = byId.get(cls);
    if (!node) continue;
    for (const action of node.guidance) {
      if (action.kind !== "highlight_period") continue;
      let start = row.start;
      let end = row.end;
      if (action.params.target === "excursion") {
        const s = Number(row.diagnostics.excursion_start);
        const e = Number(row.diagnostics.excursion_end);
        if (Number.isFinite(s) && Number.isFinite(e) && s < e) {
          start = s;
          end = e;
        }
      }
      out.push({ device: row.device, start, end, incident: row.id });
    }
  }
  return out;
}
