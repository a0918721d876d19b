"""HTTP JSON service exposing triage, series access, and the knowledge store.

The web frontend talks only to these endpoints.  Series requests return the
selected window at full resolution and the surrounding data downsampled to a
point budget, so a browser can show a 100k-sample day without receiving it.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .callbacks import incident_ontology, incident_registry
from .config import AnalysisParams
from .dataio import DataError, read_csv
from .ontology import class_documentation, load_ontology
from .store import (
    InstanceValidationError,
    KnowledgeStore,
    UnknownInstanceError,
    instance_from_document,
    instance_to_document,
)
from .tsa import DeviceSeries, downsample
from .triage import TriageRun, rank_instances, run_triage


class ConfigError(Exception):
    pass


@dataclass
class ServiceConfig:
    data: str
    store: str
    ontology: str | None = None
    host: str = "127.0.0.1"
    port: int = 8571
    budget: int = 2000
    params: AnalysisParams = field(default_factory=AnalysisParams)


def load_config(path: str) -> ServiceConfig:
    if not os.path.exists(path):
        raise ConfigError(f"no such config file: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {"data", "store", "ontology", "host", "port", "budget", "params"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("data", "store"):
        if not isinstance(doc.get(key), str) or not doc[key]:
            raise ConfigError(f"config needs a {key!r} path")
    if not os.path.exists(doc["data"]):
        raise ConfigError(f"data file does not exist: {doc['data']}")
    try:
        params = AnalysisParams.from_dict(doc.get("params", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad params: {exc}") from None
    budget = doc.get("budget", 2000)
    if not isinstance(budget, int) or budget < 16:
        raise ConfigError("budget must be an integer of at least 16")
    port = doc.get("port", 8571)
    if not isinstance(port, int) or not (0 < port < 65536):
        raise ConfigError("port must be in 1..65535")
    return ServiceConfig(
        data=doc["data"],
        store=doc["store"],
        ontology=doc.get("ontology"),
        host=doc.get("host", "127.0.0.1"),
        port=port,
        budget=budget,
        params=params,
    )


def _split_budget(budget: int, left: int, right: int) -> tuple[int, int]:
    """Apportion the outside-window budget so both flanks together never
    exceed budget + 2 points even after per-flank rounding."""
    usable = max(budget - 2, 8)
    if left == 0:
        return 0, usable
    if right == 0:
        return usable, 0
    share = max(4, min(usable - 4, round(usable * left / (left + right))))
    return share, usable - share


def _region_payload(series: DeviceSeries, full: bool) -> dict:
    body = {
        "kind": "full" if full else "downsampled",
        "readings": series.readings.tolist(),
        "ratings": series.ratings.tolist(),
    }
    if series.times is not None:
        body["times"] = series.times.tolist()
    else:
        body["t0"] = series.t0
        body["dt"] = series.dt
    return body


def _slice(series: DeviceSeries, start: int, end: int) -> DeviceSeries:
    return DeviceSeries(
        series.device,
        series.t0 + start * series.dt,
        series.dt,
        series.readings[start:end],
        series.ratings[start:end],
    )


def _device_regions(
    series: DeviceSeries, lo: int, hi: int, budget: int
) -> list[dict]:
    n = len(series.readings)
    regions: list[dict] = []
    left_budget, right_budget = _split_budget(budget, lo, n - hi)
    if lo > 0:
        piece = downsample(_slice(series, 0, lo), max(left_budget, 4))
        regions.append(_region_payload(piece, full=len(piece.readings) == lo))
    if hi > lo:
        regions.append(_region_payload(_slice(series, lo, hi), full=True))
    if n - hi > 0:
        piece = downsample(_slice(series, hi, n), max(right_budget, 4))
        regions.append(
            _region_payload(piece, full=len(piece.readings) == n - hi)
        )
    return regions


def _classified_payload(run: TriageRun, manual: dict[str, str]) -> dict:
    incidents = []
    for ci in run.incidents:
        inc = ci.incident
        row = {
            "id": inc.id,
            "device": inc.device,
            "start": inc.start,
            "end": inc.end,
            "complete": ci.complete,
            "path": list(ci.result.path) if ci.result else [],
            "qualifier": ci.result.qualifier if ci.result else None,
            "diagnostics": dict(ci.result.diagnostics) if ci.result else {},
            "error": ci.error,
            "manual_class": manual.get(inc.id),
        }
        incidents.append(row)
    return {
        "incidents": incidents,
        "marks": {
            dev: [
                {"start": m.start, "end": m.end, "level": m.level}
                for m in marks
            ]
            for dev, marks in run.marks.items()
        },
        "labels": sorted(run.outcome.labels),
        "unclassified": [ci.incident.id for ci in run.outcome.unclassified()],
    }


def create_app(config: ServiceConfig) -> FastAPI:
    try:
        data = read_csv(config.data)
    except DataError as exc:
        raise ConfigError(f"cannot load data: {exc}") from None
    if config.ontology:
        if not os.path.exists(config.ontology):
            raise ConfigError(f"ontology file does not exist: {config.ontology}")
        ontology = load_ontology(config.ontology)
    else:
        ontology = incident_ontology()
    registry = incident_registry()
    store = KnowledgeStore(config.store, ontology)

    app = FastAPI(title="kbtriage", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = app.state
    state.config = config
    state.data = data
    state.ontology = ontology
    state.registry = registry
    state.store = store
    state.manual: dict[str, str] = {}
    state.manual_version = 0
    state.suggestion_cache: dict[tuple, dict] = {}
    state.triage_lock = threading.Lock()
    state.triage_run = None

    n_samples = len(next(iter(data.values())).readings)

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    def triage() -> TriageRun:
        with state.triage_lock:
            if state.triage_run is None:
                state.triage_run = run_triage(
                    state.data, ontology, registry, store, config.params
                )
            return state.triage_run

    @app.get("/api/series")
    def series(
        devices: str = "",
        start: int = 0,
        end: int = 0,
        budget: int = 0,
    ):
        names = (
            [d for d in devices.split(",") if d]
            if devices
            else sorted(state.data)
        )
        for name in names:
            if name not in state.data:
                return error(404, f"unknown device {name!r}")
        if start > end:
            return error(400, "start must not exceed end")
        points = budget or config.budget
        if points < 16:
            return error(400, "budget must be at least 16")
        lo = min(max(start, 0), n_samples)
        hi = min(max(end, 0), n_samples)
        payload = {
            "t0": next(iter(state.data.values())).t0,
            "dt": next(iter(state.data.values())).dt,
            "samples": n_samples,
            "window": [lo, hi],
            "devices": {
                name: _device_regions(state.data[name], lo, hi, points)
                for name in names
            },
        }
        return payload

    @app.get("/api/incidents")
    def incidents():
        return _classified_payload(triage(), state.manual)

    @app.get("/api/suggestions")
    def suggestions(start: int = 0, end: int = 0, mode: str = "literal"):
        if mode not in ("literal", "similarity"):
            return error(400, f"unknown mode {mode!r}")
        if start > end:
            return error(400, "start must not exceed end")
        run = triage()
        key = (start, end, mode, store.version, state.manual_version)
        cached = state.suggestion_cache.get(key)
        if cached is not None:
            return cached
        labels: set[tuple[str, str]] = set()
        for ci in run.incidents:
            inc = ci.incident
            if inc.start < end and inc.end > start:
                if ci.complete:
                    labels.add((inc.device, ci.result.final_class))
                cls = state.manual.get(inc.id)
                if cls:
                    labels.add((inc.device, cls))
        ranked = rank_instances(
            labels,
            store,
            run.outcome.cache,
            data=state.data,
            k=config.params.suggestion_count,
            mode=mode,
        )
        by_id = {inst.id: inst for inst in store.list_instances()}
        payload = {
            "labels": sorted(labels),
            "mode": mode,
            "suggestions": [
                {
                    "instance": s.instance,
                    "name": by_id[s.instance].name,
                    "rank_value": s.rank_value,
                    "matched_labels": sorted(s.matched_labels),
                    "initial_offset": s.initial_offset,
                    "vis_settings": {
                        "period_seconds": by_id[s.instance].vis_settings.period_seconds,
                        "colormap": by_id[s.instance].vis_settings.colormap,
                        "colormap_reference": list(
                            by_id[s.instance].vis_settings.colormap_reference
                        ),
                    },
                }
                for s in ranked
            ],
        }
        state.suggestion_cache[key] = payload
        return payload

    @app.get("/api/ontology")
    def ontology_doc():
        return {
            "document": ontology.to_document(),
            "documentation": {
                cls.id: class_documentation(ontology, cls.id, registry)
                for cls in ontology
            },
        }

    @app.get("/api/instances")
    def list_instances():
        return {
            "instances": [
                instance_to_document(inst) for inst in store.list_instances()
            ]
        }

    @app.get("/api/instances/{instance_id}")
    def get_instance(instance_id: str):
        try:
            inst = store.get_instance(instance_id)
        except UnknownInstanceError:
            return error(404, f"unknown instance {instance_id!r}")
        return instance_to_document(inst)

    @app.post("/api/instances", status_code=201)
    async def add_instance(request: Request):
        try:
            doc = await request.json()
        except json.JSONDecodeError:
            return error(400, "body must be JSON")
        try:
            draft = instance_from_document(doc, require_id=False)
            instance_id = store.add_instance(draft)
        except InstanceValidationError as exc:
            return JSONResponse(
                {
                    "errors": [
                        {"field": f, "message": m} for f, m in exc.errors
                    ]
                },
                status_code=422,
            )
        return {"id": instance_id}

    @app.delete("/api/instances/{instance_id}", status_code=204)
    def delete_instance(instance_id: str):
        try:
            store.delete_instance(instance_id)
        except UnknownInstanceError:
            return error(404, f"unknown instance {instance_id!r}")

    @app.post("/api/classify")
    def classify_manual(body: dict):
        incident_id = body.get("incident")
        cls = body.get("class")
        if not isinstance(incident_id, str) or not isinstance(cls, str):
            return error(422, "body needs string fields 'incident' and 'class'")
        if cls not in ontology:
            return error(422, f"unknown class {cls!r}")
        run = triage()
        known = {ci.incident.id for ci in run.incidents}
        if incident_id not in known:
            return error(422, f"unknown incident {incident_id!r}")
        state.manual[incident_id] = cls
        state.manual_version += 1
        return {"incident": incident_id, "class": cls}

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
