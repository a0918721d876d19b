"""Tunable thresholds shared by detection, callbacks and ranking."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class AnalysisParams:
    # Severity thresholds on the abnormality rating, rating is always in [0, 1].
    warn_threshold: float = 0.5
    alert_threshold: float = 0.8
    # Runs above alert_threshold closer than merge_gap samples become one
    # incident; merged runs shorter than min_incident_len are dropped.
    min_incident_len: int = 5
    merge_gap: int = 10
    # Samples of surrounding data handed to the periodicity callbacks.
    context_len: int = 600
    # A stored false-positive instance suppresses an incident when its best
    # z-normalized match distance is at most fp_distance.
    fp_distance: float = 1.0
    # Autocorrelation score at or above which a segment counts as periodic.
    periodicity_min_score: float = 0.6
    # Smallest period, in samples, the period estimator will report.
    min_period: int = 2
    # Relative tolerance when deciding whether two periods are the same.
    period_match_tol: float = 0.05
    # Margin added around the robust quantile envelope when learning ranges.
    range_margin: float = 0.01
    # Number of suggestions returned by the ranking step.
    suggestion_count: int = 5

    def __post_init__(self) -> None:
        if not 0.0 <= self.warn_threshold <= self.alert_threshold <= 1.0:
            raise ValueError("need 0 <= warn_threshold <= alert_threshold <= 1")
        if self.min_incident_len < 1 or self.merge_gap < 0:
            raise ValueError("min_incident_len >= 1 and merge_gap >= 0 required")
        if self.context_len < 0 or self.min_period < 1:
            raise ValueError("context_len >= 0 and min_period >= 1 required")
        if self.fp_distance < 0 or self.period_match_tol < 0:
            raise ValueError("fp_distance and period_match_tol must be >= 0")
        if not 0.0 <= self.periodicity_min_score <= 1.0:
            raise ValueError("periodicity_min_score must be in [0, 1]")
        if self.suggestion_count < 1:
            raise ValueError("suggestion_count must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "AnalysisParams":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**raw)
