import type {
  FieldError,
  IncidentsPayload,
  InstanceBody,
  InstanceDocument,
  OntologyPayload,
  SeriesPayload,
  SuggestionsPayload,
} from "./types.js";

/**
 * Thin typed client over fetch. Every mutation in the UI goes through
 * here, and window-scoped reads accept an AbortSignal so a stale
 * request can be cancelled when the selection frame moves again.
 */

export class ApiError extends Error {
  status: number;
  fieldErrors: FieldError[];

  constructor(status: number, message: string, fieldErrors: FieldError[] = []) {
    super(message);
    this.status = status;
    this.fieldErrors = fieldErrors;
  }
}

export function resolveApiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  const fromGlobal = (window as unknown as { KR_API?: string }).KR_API;
  if (fromGlobal) return fromGlobal.replace(/\/$/, "");
  if (window.location.protocol.startsWith("http")) return "";
  // opened from a file, talk to the default local service
  return "http://127.0.0.1:8571";
}

async function readError(res: Response): Promise<ApiError> {
  let detail = res.statusText;
  let fields: FieldError[] = [];
  try {
    const body = await res.json();
    if (Array.isArray(body.errors)) fields = body.errors;
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body, keep the status text
  }
  return new ApiError(res.status, detail, fields);
}

export class ApiClient {
  base: string;

  constructor(base?: string) {
    this.base = base ?? resolveApiBase();
  }

  private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
    const res = await fetch(this.base + path, { signal });
    if (!res.ok) throw await readError(res);
    return (await res.json()) as T;
  }

  series(
    opts: { devices?: string[]; start?: number; end?: number; budget?: number },
    signal?: AbortSignal,
  ): Promise<SeriesPayload> {
    const q = new URLSearchParams();
    if (opts.devices && opts.devices.length) q.set("devices", opts.devices.join(","));
    if (opts.start !== undefined) q.set("start", String(opts.start));
    if (opts.end !== undefined) q.set("end", String(opts.end));
    if (opts.budget !== undefined) q.set("budget", String(opts.budget));
    const qs = q.toString();
    return this.getJson<SeriesPayload>(`/api/series${qs ? "?" + qs : ""}`, signal);
  }

  incidents(signal?: AbortSignal): Promise<IncidentsPayload> {
    return this.getJson<IncidentsPayload>("/api/incidents", signal);
  }

  suggestions(
    start: number,
    end: number,
    mode: "literal" | "similarity" = "literal",
    signal?: AbortSignal,
  ): Promise<SuggestionsPayload> {
    return this.getJson<SuggestionsPayload>(
      `/api/suggestions?start=${start}&end=${end}&mode=${mode}`,
      signal,
    );
  }

  ontology(): Promise<OntologyPayload> {
    return this.getJson<OntologyPayload>("/api/ontology");
  }

  instance(id: string): Promise<InstanceDocument> {
    return this.getJson<InstanceDocument>(`/api/instances/${encodeURIComponent(id)}`);
  }

  async storeInstance(body: InstanceBody): Promise<string> {
    const res = await fetch(this.base + "/api/instances", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await readError(res);
    const out = (await res.json()) as { id: string };
    return out.id;
  }

  async classifyIncident(incident: string, cls: string): Promise<void> {
    const res = await fetch(this.base + "/api/classify", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ incident, class: cls }),
    });
    if (!res.ok) throw await readError(res);
  }
}
