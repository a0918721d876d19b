"""Incident detection, classification and suggestion ranking.

The pipeline is: detect alert runs on each device's rating channel, learn
or look up normal ranges, classify every incident by ontology traversal,
collect the (device, final class) labels of the complete classifications,
and rank stored instances against those labels for the suggestion list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .callbacks import Incident, IncidentContext, MatchCache, learn_normal_range
from .config import AnalysisParams
from .ontology import (
    CallbackRegistry,
    ClassificationError,
    ClassificationResult,
    Ontology,
    classify,
)
from .store import KnowledgeStore, NormalRange
from .tsa import DeviceSeries


@dataclass(frozen=True)
class SeverityMark:
    start: int
    end: int
    level: str  # "warning" | "alert"


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(edges[::2], edges[1::2]))


def _merge_runs(runs: list[tuple[int, int]], gap: int) -> list[tuple[int, int]]:
    if not runs:
        return []
    merged = [runs[0]]
    for s, e in runs[1:]:
        ps, pe = merged[-1]
        if s - pe < gap:
            merged[-1] = (ps, max(pe, e))
        else:
            merged.append((s, e))
    return merged


def _subtract(interval: tuple[int, int], holes: list[tuple[int, int]]) -> list[tuple[int, int]]:
    pieces = [interval]
    for hs, he in holes:
        nxt = []
        for s, e in pieces:
            if he <= s or hs >= e:
                nxt.append((s, e))
                continue
            if s < hs:
                nxt.append((s, hs))
            if he < e:
                nxt.append((he, e))
        pieces = nxt
    return pieces


def detect_incidents(
    series: DeviceSeries, params: AnalysisParams | None = None
) -> tuple[list[Incident], list[SeverityMark]]:
    """Alert runs above alert_threshold become incidents; warning marks cover
    the remaining stretches above warn_threshold.

    Runs separated by fewer than merge_gap samples merge into one incident;
    merged runs shorter than min_incident_len are dropped.  Marks never
    overlap and alert marks equal the incident intervals exactly.
    """
    p = params or AnalysisParams()
    ratings = series.ratings
    readings = series.readings

    alert_runs = _merge_runs(_runs(ratings >= p.alert_threshold), p.merge_gap)
    alert_runs = [(int(s), int(e)) for s, e in alert_runs if e - s >= p.min_incident_len]

    incidents = []
    for s, e in alert_runs:
        incidents.append(
            Incident(
                device=series.device,
                start=s,
                end=e,
                segment=readings[s:e],
                ratings=ratings[s:e],
                pre_context=readings[max(0, s - p.context_len) : s],
                post_context=readings[e : e + p.context_len],
            )
        )

    warn_runs = _merge_runs(_runs(ratings >= p.warn_threshold), p.merge_gap)
    warn_runs = [(int(s), int(e)) for s, e in warn_runs if e - s >= p.min_incident_len]
    marks = [SeverityMark(s, e, "alert") for s, e in alert_runs]
    for run in warn_runs:
        for s, e in _subtract(run, alert_runs):
            if e > s:
                marks.append(SeverityMark(int(s), int(e), "warning"))
    marks.sort(key=lambda m: (m.start, m.end))
    return incidents, marks


@dataclass
class ClassifiedIncident:
    incident: Incident
    result: ClassificationResult | None = None
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.result is not None and self.result.complete


@dataclass
class TriageOutcome:
    incidents: list[ClassifiedIncident] = field(default_factory=list)
    labels: set[tuple[str, str]] = field(default_factory=set)
    ranges: dict[str, NormalRange] = field(default_factory=dict)
    cache: MatchCache = field(default_factory=MatchCache)

    def unclassified(self) -> list[ClassifiedIncident]:
        return [ci for ci in self.incidents if not ci.complete]


def resolve_ranges(
    data: dict[str, DeviceSeries],
    store: KnowledgeStore | None,
    params: AnalysisParams,
) -> dict[str, NormalRange]:
    """Stored normal ranges where available, else ranges learned from the
    stretches of the analyzed data that sit below the warning threshold."""
    ranges: dict[str, NormalRange] = {}
    stored = store.normal_ranges() if store is not None else {}
    for device, series in data.items():
        if device in stored:
            ranges[device] = stored[device]
            continue
        calm = series.ratings < params.warn_threshold
        if not calm.any():
            continue  # nothing incident-free to learn from
        training = DeviceSeries(
            device,
            series.t0,
            series.dt,
            series.readings[calm],
            np.zeros(int(calm.sum())),
        )
        ranges[device] = learn_normal_range(training, params.range_margin)
    return ranges


def classify_incidents(
    incidents: list[Incident],
    ontology: Ontology,
    registry: CallbackRegistry,
    store: KnowledgeStore | None,
    data: dict[str, DeviceSeries],
    params: AnalysisParams | None = None,
    ranges: dict[str, NormalRange] | None = None,
    cache: MatchCache | None = None,
) -> TriageOutcome:
    """Classify every incident independently; one failure never poisons the
    rest.  Complete classifications contribute (device, final class) labels."""
    p = params or AnalysisParams()
    out = TriageOutcome(
        ranges=ranges if ranges is not None else resolve_ranges(data, store, p),
        cache=cache if cache is not None else MatchCache(),
    )
    for incident in incidents:
        ctx = IncidentContext(
            incident=incident,
            data=data,
            ranges=out.ranges,
            cache=out.cache,
            params=p,
        )
        ci = ClassifiedIncident(incident)
        try:
            ci.result = classify(ontology, registry, ctx, store)
        except ClassificationError as exc:
            ci.error = str(exc)
        out.incidents.append(ci)
        if ci.complete:
            out.labels.add((incident.device, ci.result.final_class))
    return out


@dataclass(frozen=True)
class Suggestion:
    instance: str
    rank_value: float
    matched_labels: frozenset[tuple[str, str]]
    initial_offset: int


def rank_instances(
    current_labels: set[tuple[str, str]],
    store: KnowledgeStore,
    cache: MatchCache,
    data: dict[str, DeviceSeries] | None = None,
    k: int | None = None,
    mode: str = "literal",
) -> list[Suggestion]:
    """Rank stored instances against the current classification labels.

    An instance participates when it shares at least one (device, class)
    label with the current set.  In literal mode each shared label adds the
    device's best-match distance, so the largest accumulated distance ranks
    first; similarity mode adds 1 / (1 + d_min) per label instead.  Both
    modes return the top k (default 5), ties broken by instance id.  The
    initial offset is the best-match position of the shared device with
    the smallest distance.
    """
    if mode not in ("literal", "similarity"):
        raise ValueError(f"unknown mode {mode!r}")
    top = k if k is not None else AnalysisParams().suggestion_count
    suggestions: list[Suggestion] = []
    for inst in sorted(store.list_instances(), key=lambda i: i.id):
        shared = current_labels & inst.labels
        if not shared:
            continue
        matched: set[tuple[str, str]] = set()
        value = 0.0
        best: tuple[float, int] | None = None
        for device, cls in sorted(shared):
            res = cache.get(inst.id, device)
            if res is None and data is not None:
                res = cache.ensure(inst, device, data)
            if res is None:
                continue  # device not matchable against this dataset
            matched.add((device, cls))
            if mode == "literal":
                value += res.d_min
            else:
                value += 1.0 / (1.0 + res.d_min)
            if best is None or res.d_min < best[0]:
                best = (res.d_min, res.position)
        if not matched or best is None:
            continue
        suggestions.append(
            Suggestion(inst.id, value, frozenset(matched), best[1])
        )
    suggestions.sort(key=lambda s: (-s.rank_value, s.instance))
    return suggestions[:top]


@dataclass
class TriageRun:
    """Everything a service or CLI invocation needs after one pass."""

    outcome: TriageOutcome
    marks: dict[str, list[SeverityMark]]

    @property
    def incidents(self) -> list[ClassifiedIncident]:
        return self.outcome.incidents


def run_triage(
    data: dict[str, DeviceSeries],
    ontology: Ontology,
    registry: CallbackRegistry,
    store: KnowledgeStore | None,
    params: AnalysisParams | None = None,
) -> TriageRun:
    """Detect and classify incidents on every device of a dataset."""
    p = params or AnalysisParams()
    all_incidents: list[Incident] = []
    marks: dict[str, list[SeverityMark]] = {}
    for device in sorted(data):
        incidents, device_marks = detect_incidents(data[device], p)
        all_incidents.extend(incidents)
        marks[device] = device_marks
    outcome = classify_incidents(
        all_incidents, ontology, registry, store, data, params=p
    )
    return TriageRun(outcome=outcome, marks=marks)
