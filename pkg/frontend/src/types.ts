/** JSON shapes of the triage service API, mirrored field by field. */

export interface Region {
  kind: "full" | "downsampled";
  readings: number[];
  ratings: number[];
  /** Downsampled regions carry explicit timestamps per point. */
  times?: number[];
  /** Full-resolution regions are uniform and carry t0/dt instead. */
  t0?: number;
  dt?: number;
}

export interface SeriesPayload {
  t0: number;
  dt: number;
  samples: number;
  window: [number, number];
  devices: Record<string, Region[]>;
}

export interface IncidentRow {
  id: string;
  device: string;
  start: number;
  end: number;
  complete: boolean;
  path: string[];
  qualifier: string | null;
  diagnostics: Record<string, string>;
  error: string | null;
  manual_class: string | null;
}

export type SeverityLevel = "warning" | "alert";

export interface SeverityMark {
  start: number;
  end: number;
  level: SeverityLevel;
}

export interface IncidentsPayload {
  incidents: IncidentRow[];
  marks: Record<string, SeverityMark[]>;
  labels: [string, string][];
  unclassified: string[];
}

export interface VisSettings {
  period_seconds: number;
  colormap: string;
  colormap_reference: [number, number];
}

export interface SuggestionRow {
  instance: string;
  name: string;
  rank_value: number;
  matched_labels: [string, string][];
  initial_offset: number;
  vis_settings: VisSettings;
}

export interface SuggestionsPayload {
  labels: [string, string][];
  mode: "literal" | "similarity";
  suggestions: SuggestionRow[];
}

export interface GuidanceAction {
  kind: string;
  params: Record<string, string>;
}

export interface OntologyClassRow {
  id: string;
  name: string;
  parent: string | null;
  triggers: string[];
  qualifiers: string[];
  callback: string | null;
  annotations: string;
  guidance: GuidanceAction[];
}

export interface OntologyPayload {
  document: { name: string; classes: OntologyClassRow[] };
  documentation: Record<string, string>;
}

export interface SegmentBody {
  t0: number;
  dt: number;
  readings: number[];
  ratings: number[];
}

/** POST /api/instances request body. */
export interface InstanceBody {
  name: string;
  labels: { device: string; class: string }[];
  segments: Record<string, SegmentBody>;
  instance_annotation: string;
  device_annotations: Record<string, string>;
  vis_settings: VisSettings;
}

export interface InstanceDocument extends InstanceBody {
  id: string;
  created_at: number;
}

export interface FieldError {
  field: string;
  message: string;
}
