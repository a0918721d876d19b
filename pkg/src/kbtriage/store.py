"""File-backed store of classified incident instances.

Layout: one JSON document per instance under ``<root>/instances/`` plus a
``ranges.json`` with the learned normal range per device.  Writes go to a
temp file in the same directory and are renamed into place, so a reader
never observes a half-written document.  The store is single-writer,
multi-reader; a lock serializes writes within one process.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .ontology import Ontology
from .tsa import DeviceSeries


class StoreError(Exception):
    pass


class UnknownInstanceError(StoreError):
    pass


class UnknownDeviceError(StoreError):
    pass


class InstanceValidationError(StoreError):
    """Field-level validation failures, suitable for a 422 response body."""

    def __init__(self, errors: list[tuple[str, str]]):
        super().__init__("; ".join(f"{f}: {m}" for f, m in errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class VisSettings:
    """How an instance wants to be displayed when it is suggested again."""

    period_seconds: float = 1.0
    colormap: str = "viridis"
    colormap_reference: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class NormalRange:
    device: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError("normal range needs lo <= hi")


@dataclass
class StoredInstance:
    id: str
    name: str
    labels: set[tuple[str, str]]  # (device, class id)
    segments: dict[str, DeviceSeries]
    instance_annotation: str = ""
    device_annotations: dict[str, str] = field(default_factory=dict)
    vis_settings: VisSettings = field(default_factory=VisSettings)
    created_at: float = 0.0


def instance_to_document(inst: StoredInstance) -> dict:
    return {
        "id": inst.id,
        "name": inst.name,
        "created_at": inst.created_at,
        "labels": [
            {"device": d, "class": c} for d, c in sorted(inst.labels)
        ],
        "segments": {
            dev: {
                "t0": seg.t0,
                "dt": seg.dt,
                "readings": seg.readings.tolist(),
                "ratings": seg.ratings.tolist(),
            }
            for dev, seg in sorted(inst.segments.items())
        },
        "instance_annotation": inst.instance_annotation,
        "device_annotations": dict(sorted(inst.device_annotations.items())),
        "vis_settings": {
            "period_seconds": inst.vis_settings.period_seconds,
            "colormap": inst.vis_settings.colormap,
            "colormap_reference": list(inst.vis_settings.colormap_reference),
        },
    }


def instance_from_document(doc: dict, require_id: bool = True) -> StoredInstance:
    errors = _document_errors(doc, require_id=require_id)
    if errors:
        raise InstanceValidationError(errors)
    segments = {
        dev: DeviceSeries(
            device=dev,
            t0=float(raw["t0"]),
            dt=float(raw["dt"]),
            readings=np.asarray(raw["readings"], dtype=np.float64),
            ratings=np.asarray(raw["ratings"], dtype=np.float64),
        )
        for dev, raw in doc["segments"].items()
    }
    vs = doc.get("vis_settings", {})
    return StoredInstance(
        id=doc.get("id", ""),
        name=doc["name"],
        labels={(l["device"], l["class"]) for l in doc.get("labels", [])},
        segments=segments,
        instance_annotation=doc.get("instance_annotation", ""),
        device_annotations=dict(doc.get("device_annotations", {})),
        vis_settings=VisSettings(
            period_seconds=float(vs.get("period_seconds", 1.0)),
            colormap=str(vs.get("colormap", "viridis")),
            colormap_reference=tuple(vs.get("colormap_reference", (0.0, 1.0))),
        ),
        created_at=float(doc.get("created_at", 0.0)),
    )


_INSTANCE_FIELDS = {
    "id",
    "name",
    "created_at",
    "labels",
    "segments",
    "instance_annotation",
    "device_annotations",
    "vis_settings",
}


def _document_errors(doc: dict, require_id: bool) -> list[tuple[str, str]]:
    errors: list[tuple[str, str]] = []
    if not isinstance(doc, dict):
        return [("", "instance document must be a JSON object")]
    unknown = set(doc) - _INSTANCE_FIELDS
    if unknown:
        errors.append(("", f"unknown field(s): {sorted(unknown)}"))
    if require_id and not (isinstance(doc.get("id"), str) and doc["id"]):
        errors.append(("id", "must be a non-empty string"))
    elif "id" in doc and not isinstance(doc["id"], str):
        errors.append(("id", "must be a string when given"))
    if not (isinstance(doc.get("name"), str) and doc["name"]):
        errors.append(("name", "must be a non-empty string"))
    labels = doc.get("labels", [])
    if not isinstance(labels, list):
        errors.append(("labels", "must be a list"))
        labels = []
    for i, lab in enumerate(labels):
        if (
            not isinstance(lab, dict)
            or set(lab) != {"device", "class"}
            or not all(isinstance(lab[k], str) and lab[k] for k in ("device", "class"))
        ):
            errors.append((f"labels[{i}]", "expected {device, class} strings"))
    segments = doc.get("segments")
    if not isinstance(segments, dict) or not segments:
        errors.append(("segments", "must be a non-empty object"))
        segments = {}
    for dev, raw in segments.items():
        where = f"segments.{dev}"
        if not isinstance(raw, dict):
            errors.append((where, "must be an object"))
            continue
        for key in ("t0", "dt", "readings", "ratings"):
            if key not in raw:
                errors.append((f"{where}.{key}", "missing"))
        readings = raw.get("readings")
        ratings = raw.get("ratings")
        if isinstance(readings, list) and isinstance(ratings, list):
            if len(readings) != len(ratings) or not readings:
                errors.append((where, "readings and ratings need equal length >= 1"))
            elif any(
                not isinstance(v, (int, float)) or not np.isfinite(v)
                for v in readings + ratings
            ):
                errors.append((where, "readings and ratings must be finite numbers"))
            elif any(not 0.0 <= v <= 1.0 for v in ratings):
                errors.append((f"{where}.ratings", "must lie in [0, 1]"))
        if "dt" in raw and not (isinstance(raw["dt"], (int, float)) and raw["dt"] > 0):
            errors.append((f"{where}.dt", "must be > 0"))
    if not errors:
        for i, lab in enumerate(labels):
            if lab["device"] not in segments:
                errors.append(
                    (f"labels[{i}].device", f"no segment stored for {lab['device']!r}")
                )
    vs = doc.get("vis_settings", {})
    if not isinstance(vs, dict):
        errors.append(("vis_settings", "must be an object"))
    else:
        if set(vs) - {"period_seconds", "colormap", "colormap_reference"}:
            errors.append(("vis_settings", "unknown key"))
        ps = vs.get("period_seconds", 1.0)
        if not (isinstance(ps, (int, float)) and ps > 0):
            errors.append(("vis_settings.period_seconds", "must be > 0"))
        ref = vs.get("colormap_reference", (0.0, 1.0))
        if (
            not isinstance(ref, (list, tuple))
            or len(ref) != 2
            or not all(isinstance(v, (int, float)) for v in ref)
            or not ref[0] < ref[1]
        ):
            errors.append(("vis_settings.colormap_reference", "must be [lo, hi] with lo < hi"))
    return errors


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(path)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class QueryHit:
    instance: StoredInstance
    score: int


class KnowledgeStore:
    """Instances plus learned normal ranges under one directory."""

    def __init__(self, root: str, ontology: Ontology | None = None):
        self.root = root
        self.ontology = ontology
        self.warnings: list[str] = []
        self.version = 0  # bumped on every write, used as a cache key upstream
        self._lock = threading.Lock()
        self._instances: dict[str, StoredInstance] = {}
        self._ranges: dict[str, NormalRange] = {}
        os.makedirs(self._instance_dir, exist_ok=True)
        self._load()

    @property
    def _instance_dir(self) -> str:
        return os.path.join(self.root, "instances")

    @property
    def _ranges_path(self) -> str:
        return os.path.join(self.root, "ranges.json")

    def _load(self) -> None:
        for fname in sorted(os.listdir(self._instance_dir)):
            if not fname.endswith(".json"):
                continue
            path = os.path.join(self._instance_dir, fname)
            try:
                with open(path, encoding="utf-8") as fh:
                    doc = json.load(fh)
                inst = instance_from_document(doc)
            except (json.JSONDecodeError, InstanceValidationError, OSError, ValueError) as exc:
                # One corrupt file must not take the whole store down.
                self.warnings.append(f"skipped {fname}: {exc}")
                continue
            self._instances[inst.id] = inst
        if os.path.exists(self._ranges_path):
            try:
                with open(self._ranges_path, encoding="utf-8") as fh:
                    raw = json.load(fh)
                self._ranges = {
                    dev: NormalRange(dev, float(v["lo"]), float(v["hi"]))
                    for dev, v in raw.items()
                }
            except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                self.warnings.append(f"skipped ranges.json: {exc}")

    # -- instances ----------------------------------------------------------

    def _next_id(self) -> str:
        top = 0
        for iid in self._instances:
            m = re.fullmatch(r"inst-(\d+)", iid)
            if m:
                top = max(top, int(m.group(1)))
        return f"inst-{top + 1:06d}"

    def add_instance(self, draft: StoredInstance) -> str:
        """Validate, assign an id when missing, persist, and return the id."""
        with self._lock:
            doc = instance_to_document(draft)
            if not draft.id:
                doc["id"] = self._next_id()
            if not doc.get("created_at"):
                doc["created_at"] = time.time()
            errors = _document_errors(doc, require_id=True)
            if not errors and self.ontology is not None:
                for i, lab in enumerate(doc["labels"]):
                    if lab["class"] not in self.ontology:
                        errors.append(
                            (f"labels[{i}].class", f"unknown class {lab['class']!r}")
                        )
            if not errors and doc["id"] in self._instances:
                errors.append(("id", f"instance {doc['id']} already exists"))
            if errors:
                raise InstanceValidationError(errors)
            inst = instance_from_document(doc)
            _atomic_write(
                os.path.join(self._instance_dir, f"{inst.id}.json"),
                json.dumps(doc, indent=2, allow_nan=False) + "\n",
            )
            self._instances[inst.id] = inst
            self.version += 1
            return inst.id

    def get_instance(self, instance_id: str) -> StoredInstance:
        try:
            return self._instances[instance_id]
        except KeyError:
            raise UnknownInstanceError(f"unknown instance {instance_id!r}") from None

    def list_instances(self) -> list[StoredInstance]:
        return sorted(self._instances.values(), key=lambda i: (i.created_at, i.id))

    def delete_instance(self, instance_id: str) -> None:
        with self._lock:
            if instance_id not in self._instances:
                raise UnknownInstanceError(f"unknown instance {instance_id!r}")
            path = os.path.join(self._instance_dir, f"{instance_id}.json")
            if os.path.exists(path):
                os.unlink(path)
            del self._instances[instance_id]
            self.version += 1

    def query_by_classes(self, selected: set[str]) -> list[QueryHit]:
        """Instances labeled with any selected class or one of its descendants.

        Score counts how many of the selected classes an instance matches;
        zero-score instances are excluded.  Ties order by newest first, then
        by id.
        """
        if self.ontology is None:
            raise StoreError("query_by_classes needs a store opened with an ontology")
        subtrees = {sel: self.ontology.subtree(sel) for sel in selected}
        hits = []
        for inst in self._instances.values():
            classes = {cls for _dev, cls in inst.labels}
            score = sum(1 for sel in selected if classes & subtrees[sel])
            if score > 0:
                hits.append(QueryHit(inst, score))
        hits.sort(key=lambda h: (-h.score, -h.instance.created_at, h.instance.id))
        return hits

    # -- normal ranges ------------------------------------------------------

    def set_normal_range(self, rng: NormalRange) -> None:
        with self._lock:
            self._ranges[rng.device] = rng
            payload = {
                dev: {"lo": r.lo, "hi": r.hi} for dev, r in sorted(self._ranges.items())
            }
            _atomic_write(
                self._ranges_path, json.dumps(payload, indent=2, allow_nan=False) + "\n"
            )
            self.version += 1

    def get_normal_range(self, device: str) -> NormalRange:
        try:
            return self._ranges[device]
        except KeyError:
            raise UnknownDeviceError(f"no normal range stored for {device!r}") from None

    def normal_ranges(self) -> dict[str, NormalRange]:
        return dict(self._ranges)


def open_store(path: str, ontology: Ontology | None = None) -> KnowledgeStore:
    return KnowledgeStore(path, ontology)
