"""Synthetic telemetry generator for demos and end-to-end tests.

Every device gets a sinusoid base signal (or smoothed noise when the device
is the target of a pattern-disrupt injection) plus white noise.  Injections
overlay controlled faults and raise the rating channel over their window.

Determinism contract: the base signals consume the seed generator in full
before any injection runs, and each injection draws from its own generator
keyed by (seed, device index, start).  Adding or removing one injection
therefore never changes the base signals or the other injections, and a
false-positive injection leaves every reading bit-identical to the
uninjected run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .tsa import DeviceSeries

KINDS = (
    "high",
    "low",
    "phase-shift",
    "freq-change",
    "period-disrupt",
    "pattern-disrupt",
    "false-positive",
)

# kinds whose aftermath runs to the end of the series
PERSISTENT = frozenset({"phase-shift", "freq-change", "period-disrupt"})

# classification a triage run should reach for each kind
KIND_CLASSES: dict[str, tuple[str, str | None]] = {
    "high": ("Abnormal Values", "High"),
    "low": ("Abnormal Values", "Low"),
    "phase-shift": ("Phase Shift", None),
    "freq-change": ("Frequency Change", None),
    "period-disrupt": ("Period Disrupt", None),
    "pattern-disrupt": ("Pattern Disrupt", None),
    "false-positive": ("False Positive", None),
}

RATING_LEVEL = 0.95
MIN_MARGIN = 700


@dataclass(frozen=True)
class Injection:
    kind: str
    device: str
    start: int
    duration: int = 120

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown injection kind {self.kind!r}")
        if self.start < 0 or self.duration < 1:
            raise ValueError("injection needs start >= 0 and duration >= 1")

    @property
    def end(self) -> int:
        return self.start + self.duration


_INJECT_RE = re.compile(
    r"^(?P<kind>[a-z-]+)@(?P<device>[^:@\s]+):(?P<start>\d+)(?::(?P<duration>\d+))?$"
)


def parse_injection(text: str) -> Injection:
    """Parse 'kind@device:start' or 'kind@device:start:duration'."""
    m = _INJECT_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse injection {text!r}")
    duration = int(m["duration"]) if m["duration"] else 120
    return Injection(m["kind"], m["device"], int(m["start"]), duration)


@dataclass
class GeneratedData:
    data: dict[str, DeviceSeries]
    truth: dict = field(default_factory=dict)


def _smooth(x: np.ndarray, w: int = 3) -> np.ndarray:
    return np.convolve(x, np.ones(w) / w, mode="same")


@dataclass
class _Base:
    period: float
    amp: float
    mean: float
    phase: float
    clean: np.ndarray  # noiseless sinusoid, kept for phase-true injections


def _validate_plan(
    devices: list[str], steps: int, injections: list[Injection], margin: int
) -> None:
    if margin < MIN_MARGIN:
        raise ValueError(f"margin must be at least {MIN_MARGIN}")
    by_device: dict[str, list[Injection]] = {}
    for inj in injections:
        if inj.device not in devices:
            raise ValueError(f"injection targets unknown device {inj.device!r}")
        if inj.start < margin or inj.end + margin > steps:
            raise ValueError(
                f"injection {inj.kind}@{inj.device}:{inj.start} needs "
                f"{margin} clear samples on both sides"
            )
        by_device.setdefault(inj.device, []).append(inj)
    for device, plan in by_device.items():
        plan.sort(key=lambda i: i.start)
        kinds = {i.kind for i in plan}
        if "pattern-disrupt" in kinds and kinds & PERSISTENT:
            raise ValueError(
                f"{device}: pattern-disrupt uses a non-periodic base signal, "
                "which the periodic-history injections cannot share"
            )
        for prev, nxt in zip(plan, plan[1:]):
            if nxt.start < prev.end + margin:
                raise ValueError(
                    f"{device}: injections at {prev.start} and {nxt.start} "
                    f"are closer than the {margin}-sample margin"
                )
            if prev.kind in PERSISTENT:
                raise ValueError(
                    f"{device}: {prev.kind} at {prev.start} rewrites the rest "
                    "of the series, nothing can follow it"
                )


def generate(
    devices: int = 4,
    steps: int = 4000,
    seed: int = 0,
    injections: list[Injection] | tuple[Injection, ...] = (),
    t0: float = 1_600_000_000.0,
    dt: float = 1.0,
    margin: int = MIN_MARGIN,
) -> GeneratedData:
    if devices < 1:
        raise ValueError("need at least one device")
    if steps < 16:
        raise ValueError("need at least 16 steps")
    names = [f"dev{i + 1:02d}" for i in range(devices)]
    injections = list(injections)
    _validate_plan(names, steps, injections, margin)
    noise_base = {
        inj.device for inj in injections if inj.kind == "pattern-disrupt"
    }

    # base pass: one generator, identical draw sequence whatever the plan
    rng = np.random.default_rng(seed)
    t = np.arange(steps, dtype=float)
    bases: dict[str, _Base] = {}
    readings: dict[str, np.ndarray] = {}
    ratings = {name: np.zeros(steps) for name in names}
    for name in names:
        period = float(rng.uniform(32.0, 72.0))
        amp = float(rng.uniform(0.8, 1.6))
        mean = float(rng.uniform(8.0, 12.0))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        raw = rng.normal(0.0, 1.0, steps)
        clean = mean + amp * np.sin(2.0 * np.pi * t / period + phase)
        bases[name] = _Base(period, amp, mean, phase, clean)
        if name in noise_base:
            readings[name] = mean + amp * _smooth(raw)
        else:
            readings[name] = clean + 0.05 * amp * raw

    # injection pass: one child generator per injection, stably keyed
    truth_rows = []
    for inj in injections:
        jrng = np.random.default_rng([seed, names.index(inj.device), inj.start])
        base = bases[inj.device]
        x = readings[inj.device]
        s, e = inj.start, inj.end
        if inj.kind == "high":
            x[s:e] += 2.5 * base.amp
        elif inj.kind == "low":
            x[s:e] -= 2.5 * base.amp
        elif inj.kind == "phase-shift":
            delta = int(round(float(jrng.uniform(0.15, 0.45)) * base.period))
            delta = max(delta, 2)
            hold = base.clean[s]
            shifted = base.mean + base.amp * np.sin(
                2.0 * np.pi * (t[s + delta :] - delta) / base.period + base.phase
            )
            noise = x[s + delta :] - base.clean[s + delta :]
            x[s : s + delta] = hold
            x[s + delta :] = shifted + noise
        elif inj.kind == "freq-change":
            factor = 1.35 if base.period <= 52.0 else 0.7
            new_period = base.period * factor
            entry_phase = 2.0 * np.pi * s / base.period + base.phase
            new_wave = base.mean + base.amp * np.sin(
                2.0 * np.pi * (t[s:] - s) / new_period + entry_phase
            )
            noise = x[s:] - base.clean[s:]
            x[s:] = new_wave + noise
        elif inj.kind == "period-disrupt":
            raw = jrng.normal(0.0, 1.0, steps - s)
            x[s:] = base.mean + 0.5 * base.amp * _smooth(raw)
        elif inj.kind == "pattern-disrupt":
            q20, q80 = np.quantile(x, [0.2, 0.8])
            x[s:e] = np.linspace(q20, q80, e - s)
        elif inj.kind == "false-positive":
            pass  # ratings only, readings stay untouched
        ratings[inj.device][s:e] = RATING_LEVEL
        cls, qualifier = KIND_CLASSES[inj.kind]
        truth_rows.append(
            {
                "kind": inj.kind,
                "device": inj.device,
                "start": s,
                "end": e,
                "class": cls,
                "qualifier": qualifier,
            }
        )

    data = {
        name: DeviceSeries(name, t0, dt, readings[name], ratings[name])
        for name in names
    }
    truth = {
        "seed": seed,
        "steps": steps,
        "devices": names,
        "injections": truth_rows,
    }
    return GeneratedData(data=data, truth=truth)
