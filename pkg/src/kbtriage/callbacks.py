"""Analysis callbacks bound by the shipped incident ontology.

Each callback inspects one detected incident in the context of the analyzed
data, the learned normal ranges and the knowledge store, and returns the
routing token the ontology traversal needs next.  Token domains:

* callbackFalsePositiveCheck: "True" | "False"
* callbackAnomalyType:        "abnormal values" | "abnormal occurrence"
* callbackPeriodicTest:       "1" | "2" | "3"
* callbackDisruptType:        "pattern" | "period"
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .config import AnalysisParams
from .ontology import CallbackRegistry, CallbackResult, Ontology, parse_ontology
from .store import KnowledgeStore, NormalRange
from .tsa import (
    DeviceSeries,
    MatchResult,
    SegmentTooShort,
    estimate_period,
    match_instance,
    projection_phase,
    refine_period,
    sliding_min_distance,
)

FALSE_POSITIVE_CLASS = "False Positive"


@dataclass
class Incident:
    """One contiguous alert interval on a single device.

    start/end are absolute sample indices into the analyzed series, end
    exclusive.  pre_context/post_context hold the surrounding readings the
    periodicity callbacks compare against.
    """

    device: str
    start: int
    end: int
    segment: np.ndarray
    ratings: np.ndarray
    pre_context: np.ndarray
    post_context: np.ndarray

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError("need 0 <= start < end")
        if len(self.segment) != self.end - self.start:
            raise ValueError("segment length must equal end - start")

    @property
    def id(self) -> str:
        return f"{self.device}:{self.start}-{self.end}"


class MatchCache:
    """(instance id, device) -> best match, shared across callbacks and ranking.

    populate() walks every stored instance once and is idempotent, so the
    first classification of a session pays the matching cost and later ones
    hit the cache.  Thread-safe: one writer at a time, readers any time.
    """

    def __init__(self) -> None:
        self._results: dict[tuple[str, str], MatchResult] = {}
        self._skipped: set[tuple[str, str]] = set()
        self._lock = threading.RLock()

    def get(self, instance_id: str, device: str) -> MatchResult | None:
        return self._results.get((instance_id, device))

    def known(self, instance_id: str, device: str) -> bool:
        key = (instance_id, device)
        return key in self._results or key in self._skipped

    def put(self, result: MatchResult) -> None:
        with self._lock:
            self._results[(result.instance, result.device)] = result

    def populate(self, store: KnowledgeStore, data: dict[str, DeviceSeries]) -> None:
        with self._lock:
            for inst in store.list_instances():
                if all(self.known(inst.id, dev) for dev in inst.segments):
                    continue
                try:
                    matches = match_instance(inst, data)
                except ValueError:
                    # nothing matchable; remember so we do not retry every call
                    for dev in inst.segments:
                        self._skipped.add((inst.id, dev))
                    continue
                for res in matches.results:
                    self._results[(res.instance, res.device)] = res
                for dev in matches.skipped:
                    self._skipped.add((inst.id, dev))

    def ensure(
        self, instance, device: str, data: dict[str, DeviceSeries]
    ) -> MatchResult | None:
        """Cached match for one (instance, device), computing it on a miss."""
        key = (instance.id, device)
        if key in self._results:
            return self._results[key]
        if key in self._skipped:
            return None
        with self._lock:
            series = data.get(device)
            segment = instance.segments.get(device)
            if (
                series is None
                or segment is None
                or len(segment.readings) < 2
                or len(series.readings) < len(segment.readings)
            ):
                self._skipped.add(key)
                return None
            d_min, pos = sliding_min_distance(segment.readings, series.readings)
            res = MatchResult(instance.id, device, d_min, pos)
            self._results[key] = res
            return res


@dataclass
class IncidentContext:
    """Everything a callback may inspect while classifying one incident."""

    incident: Incident
    data: dict[str, DeviceSeries]
    ranges: dict[str, NormalRange] = field(default_factory=dict)
    cache: MatchCache = field(default_factory=MatchCache)
    params: AnalysisParams = field(default_factory=AnalysisParams)


def learn_normal_range(training: DeviceSeries, margin: float | None = None) -> NormalRange:
    """Robust operating envelope from incident-free readings.

    Takes the 0.1% and 99.9% quantiles so single glitches cannot stretch
    the range, then widens both ends by margin * (max - min).
    """
    readings = training.readings
    if len(readings) == 0:
        raise ValueError("cannot learn a range from an empty series")
    eps = AnalysisParams().range_margin if margin is None else margin
    lo_q = float(np.quantile(readings, 0.001))
    hi_q = float(np.quantile(readings, 0.999))
    span = float(readings.max() - readings.min())
    return NormalRange(training.device, lo_q - eps * span, hi_q + eps * span)


def _trim_constant_runs(x: np.ndarray) -> tuple[np.ndarray, int]:
    """Strip leading/trailing runs of repeated values; returns (array, lead).

    A constant transition between two periodic regimes would otherwise sit
    inside a context window and dilute the period estimate.  A fully
    constant array is returned unchanged.
    """
    n = len(x)
    if n == 0:
        return x, 0
    lead_end = 1
    while lead_end < n and x[lead_end] == x[0]:
        lead_end += 1
    tail_start = n - 1
    while tail_start > 0 and x[tail_start - 1] == x[n - 1]:
        tail_start -= 1
    lead = lead_end if lead_end > 1 else 0
    tail = tail_start if n - tail_start > 1 else n
    if lead >= tail:
        return x, 0
    return x[lead:tail], lead


def cb_false_positive_check(ctx: IncidentContext, store: KnowledgeStore | None) -> CallbackResult:
    """Token "True" when a stored false-positive instance for this device
    matches the incident's neighbourhood within fp_distance.

    Side effect: fills the match cache for every stored instance against
    the analyzed data, so later ranking reuses the work.
    """
    inc = ctx.incident
    diagnostics: dict[str, str] = {}
    if store is None:
        return CallbackResult("False", diagnostics={"fp_candidates": "0"})
    ctx.cache.populate(store, ctx.data)

    series = ctx.data.get(inc.device)
    best_id, best_d = None, np.inf
    candidates = 0
    for inst in store.list_instances():
        if (inc.device, FALSE_POSITIVE_CLASS) not in inst.labels:
            continue
        candidates += 1
        segment = inst.segments[inc.device].readings
        if series is None or len(segment) < 2:
            continue
        # window around the incident wide enough for the stored segment
        pad = len(segment)
        lo = max(0, inc.start - pad)
        hi = min(len(series.readings), inc.end + pad)
        window = series.readings[lo:hi]
        if len(window) < len(segment):
            continue
        d, _pos = sliding_min_distance(segment, window)
        if d < best_d:
            best_d, best_id = d, inst.id
    diagnostics["fp_candidates"] = str(candidates)
    if best_id is not None:
        diagnostics["fp_best_instance"] = best_id
        diagnostics["fp_best_distance"] = repr(float(best_d))
    token = "True" if best_d <= ctx.params.fp_distance else "False"
    return CallbackResult(token, diagnostics=diagnostics)


def cb_anomaly_type(ctx: IncidentContext, store: KnowledgeStore | None) -> CallbackResult:
    """Range check: out-of-range readings make "abnormal values" with a
    High/Low qualifier, in-range incidents make "abnormal occurrence"."""
    inc = ctx.incident
    rng = ctx.ranges.get(inc.device)
    if rng is None:
        raise KeyError(f"no normal range known for device {inc.device!r}")
    seg = inc.segment
    hi_exc = float(seg.max() - rng.hi)
    lo_exc = float(rng.lo - seg.min())
    diagnostics = {
        "range_lo": repr(float(rng.lo)),
        "range_hi": repr(float(rng.hi)),
    }
    if hi_exc <= 0 and lo_exc <= 0:
        return CallbackResult("abnormal occurrence", diagnostics=diagnostics)
    # Both sides may be violated; the larger absolute excursion names the type.
    qualifier = "High" if hi_exc >= lo_exc else "Low"
    outside = (seg > rng.hi) | (seg < rng.lo)
    first = int(np.argmax(outside))
    last = int(len(outside) - 1 - np.argmax(outside[::-1]))
    diagnostics.update(
        {
            "excursion_high": repr(max(hi_exc, 0.0)),
            "excursion_low": repr(max(lo_exc, 0.0)),
            "excursion_start": str(inc.start + first),
            "excursion_end": str(inc.start + last + 1),
        }
    )
    return CallbackResult("abnormal values", qualifier=qualifier, diagnostics=diagnostics)


def cb_periodic_test(ctx: IncidentContext, store: KnowledgeStore | None) -> CallbackResult:
    """Compare the dominant period before and after the incident.

    Token "1": periodic on both sides with the same period (within
    period_match_tol), diagnostics then carry the measured phase offset.
    Token "2": periodic on both sides at different periods.  Token "3":
    no stable period after (or not enough context to tell).
    """
    inc = ctx.incident
    p = ctx.params
    pre, pre_trim = _trim_constant_runs(inc.pre_context)
    post, post_trim = _trim_constant_runs(inc.post_context)
    need = max(4 * p.min_period, 8)
    if len(pre) < need or len(post) < need:
        return CallbackResult("3", diagnostics={"insufficient_context": "true"})

    est_pre = estimate_period(pre, p.min_period, p.periodicity_min_score)
    est_post = estimate_period(post, p.min_period, p.periodicity_min_score)
    diagnostics = {
        "period_pre": repr(float(est_pre.period)),
        "score_pre": repr(float(est_pre.score)),
        "period_post": repr(float(est_post.period)),
        "score_post": repr(float(est_post.score)),
    }
    if not (est_pre.periodic and est_post.periodic):
        return CallbackResult("3", diagnostics=diagnostics)
    if abs(est_pre.period - est_post.period) > p.period_match_tol * est_pre.period:
        return CallbackResult("2", diagnostics=diagnostics)

    # Same frequency on both sides: measure how far the post-incident wave is
    # displaced against the pre-incident one, in absolute sample phase.  The
    # period estimate is sharpened first because the gap between the two
    # windows multiplies any period error into phase error.
    pre_start = inc.start - len(inc.pre_context) + pre_trim
    post_start = inc.end + post_trim
    period = refine_period(pre, pre_start, est_pre.period)
    phi_pre = projection_phase(pre, pre_start, period)
    phi_post = projection_phase(post, post_start, period)
    offset = (phi_post - phi_pre) % period
    diagnostics["period"] = repr(float(period))
    diagnostics["phase_offset"] = repr(float(offset))
    return CallbackResult("1", diagnostics=diagnostics)


def cb_disrupt_type(ctx: IncidentContext, store: KnowledgeStore | None) -> CallbackResult:
    """Was there an established period before the incident?  "period" when
    the pre-context is periodic, "pattern" when it never was."""
    p = ctx.params
    pre, _ = _trim_constant_runs(ctx.incident.pre_context)
    try:
        est = estimate_period(pre, p.min_period, p.periodicity_min_score)
    except SegmentTooShort:
        return CallbackResult("pattern", diagnostics={"insufficient_context": "true"})
    diagnostics = {"period_pre": repr(float(est.period)), "score_pre": repr(float(est.score))}
    token = "period" if est.periodic else "pattern"
    return CallbackResult(token, diagnostics=diagnostics)


def incident_registry() -> CallbackRegistry:
    """The four analysis callbacks under the names the shipped ontology binds."""
    reg = CallbackRegistry()
    reg.register(
        "callbackFalsePositiveCheck",
        cb_false_positive_check,
        doc=(
            "Matches the incident against stored false-positive instances of "
            "the same device; a z-normalized match within the configured "
            "distance dismisses the alert."
        ),
        token_domain={"True", "False"},
    )
    reg.register(
        "callbackAnomalyType",
        cb_anomaly_type,
        doc=(
            "Checks the incident readings against the device's learned normal "
            "range; out-of-range readings are abnormal values (High/Low by the "
            "larger excursion), in-range incidents are abnormal occurrences."
        ),
        token_domain={"abnormal values", "abnormal occurrence"},
    )
    reg.register(
        "callbackPeriodicTest",
        cb_periodic_test,
        doc=(
            "Estimates the dominant period before and after the incident: 1 "
            "when both sides repeat at the same period, 2 when the period "
            "changed, 3 when the aftermath shows no stable period."
        ),
        token_domain={"1", "2", "3"},
    )
    reg.register(
        "callbackDisruptType",
        cb_disrupt_type,
        doc=(
            "Splits non-periodic aftermaths by their history: period when an "
            "established period was destroyed, pattern when no period existed."
        ),
        token_domain={"pattern", "period"},
    )
    return reg


def incident_ontology() -> Ontology:
    """The shipped incident ontology (11 classes)."""
    text = resources.files("kbtriage.data").joinpath("incident_ontology.json").read_text(
        encoding="utf-8"
    )
    return parse_ontology(text)
