"""Acceptance criteria for the triage system, one test per criterion.

Each test prints a PASS line carrying its criterion number.  Time budgets
are asserted with perf_counter; tolerances are pinned in the assertions.
"""

import json
import statistics
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from kbtriage.callbacks import (
    Incident,
    MatchCache,
    incident_ontology,
    incident_registry,
)
from kbtriage.config import AnalysisParams
from kbtriage.dataio import write_csv
from kbtriage.gendata import Injection, generate
from kbtriage.ontology import CallbackRegistry, CallbackResult, classify, parse_ontology, validate
from kbtriage.service import create_app, load_config
from kbtriage.store import KnowledgeStore, StoredInstance, VisSettings
from kbtriage.triage import (
    classify_incidents,
    detect_incidents,
    rank_instances,
    resolve_ranges,
    run_triage,
)
from kbtriage.tsa import DeviceSeries, sliding_min_distance


def _cls(cid, parent=None, triggers=(), callback=None):
    out = {"id": cid, "name": cid, "parent": parent, "triggers": list(triggers)}
    if callback:
        out["callback"] = callback
    return out


def _registry_emitting(token):
    reg = CallbackRegistry()
    reg.register(
        "pick", lambda payload, store: CallbackResult(token), doc="scripted"
    )
    return reg


def test_c01_scripted_traversals_follow_exact_paths():
    t_start = time.perf_counter()

    flat = parse_ontology(json.dumps({
        "name": "flat",
        "classes": [
            _cls("Class 1", callback="pick"),
            _cls("Class 2", parent="Class 1", triggers=["A"]),
            _cls("Class 3", parent="Class 1", triggers=["B"]),
            _cls("Class 4", parent="Class 1", triggers=["C"]),
        ],
    }))
    result = classify(flat, _registry_emitting("A"), payload=None)
    assert result.path == ["Class 1", "Class 2"]
    assert result.complete

    grouped = parse_ontology(json.dumps({
        "name": "grouped",
        "classes": [
            _cls("Class 1", callback="pick"),
            _cls("Class 5", parent="Class 1", triggers=["A", "B"]),
            _cls("Class 2", parent="Class 5", triggers=["A"]),
            _cls("Class 3", parent="Class 5", triggers=["B"]),
            _cls("Class 4", parent="Class 1", triggers=["C"]),
        ],
    }))
    result = classify(grouped, _registry_emitting("A"), payload=None)
    assert result.path == ["Class 1", "Class 5", "Class 2"]
    assert result.complete

    elapsed = time.perf_counter() - t_start
    assert elapsed < 1.0
    print(f"PASS C1: scripted traversals exact ({elapsed:.3f}s)")


def test_c02_shipped_ontology_shape_and_validation():
    t_start = time.perf_counter()
    ontology = incident_ontology()
    got = {
        c.id: (c.parent, set(c.triggers), c.callback, set(c.qualifiers))
        for c in ontology
    }
    assert got == {
        "Incident": (None, set(), "callbackFalsePositiveCheck", set()),
        "False Positive": ("Incident", {"True"}, None, set()),
        "Anomaly": ("Incident", {"False"}, "callbackAnomalyType", set()),
        "Abnormal Values": ("Anomaly", {"abnormal values"}, None, {"High", "Low"}),
        "Abnormal Occurrence": (
            "Anomaly", {"abnormal occurrence"}, "callbackPeriodicTest", set(),
        ),
        "Periodic": ("Abnormal Occurrence", {"1", "2"}, None, set()),
        "Not Periodic": (
            "Abnormal Occurrence", {"3"}, "callbackDisruptType", set(),
        ),
        "Phase Shift": ("Periodic", {"1"}, None, set()),
        "Frequency Change": ("Periodic", {"2"}, None, set()),
        "Pattern Disrupt": ("Not Periodic", {"pattern"}, None, set()),
        "Period Disrupt": ("Not Periodic", {"period"}, None, set()),
    }
    assert len(ontology) == 11
    assert ontology.root == "Incident"
    assert (
        "The phase of the period is shifted and the frequency remains the same."
        in ontology["Phase Shift"].annotations
    )
    report = validate(ontology, incident_registry())
    assert report.ok, report.findings

    elapsed = time.perf_counter() - t_start
    assert elapsed < 1.0
    print(f"PASS C2: shipped ontology shape and validation ({elapsed:.3f}s)")


def test_c03_fault_kinds_recovered_across_seeds():
    t_start = time.perf_counter()
    ontology = incident_ontology()
    registry = incident_registry()
    plan = [
        ("high", "Abnormal Values", "High", 99),
        ("low", "Abnormal Values", "Low", 99),
        ("phase-shift", "Phase Shift", None, 90),
        ("freq-change", "Frequency Change", None, 90),
        ("period-disrupt", "Period Disrupt", None, 90),
        ("pattern-disrupt", "Pattern Disrupt", None, 90),
    ]
    scores = {}
    for kind, want_class, want_qualifier, floor in plan:
        wins = 0
        for seed in range(100):
            out = generate(
                devices=1,
                steps=3200,
                seed=seed,
                injections=[Injection(kind, "dev01", 1500)],
            )
            run = run_triage(out.data, ontology, registry, None)
            done = [ci for ci in run.incidents if ci.complete]
            wins += (
                len(done) == 1
                and done[0].result.final_class == want_class
                and (
                    want_qualifier is None
                    or done[0].result.qualifier == want_qualifier
                )
            )
        scores[kind] = wins
        assert wins >= floor, f"{kind}: {wins}/100 classified"
    elapsed = time.perf_counter() - t_start
    assert elapsed < 120.0
    detail = ", ".join(f"{k}={v}" for k, v in scores.items())
    print(f"PASS C3: fault recovery {detail} ({elapsed:.1f}s)")


def test_c04_match_kernel_modes_agree_on_random_pairs():
    t_start = time.perf_counter()
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        m = int(rng.integers(2, 65))
        n = int(rng.integers(m, 4097))
        series = rng.normal(0.0, 1.0, n)
        if n >= 8 and rng.random() < 0.25:  # plant a flat stretch
            a = int(rng.integers(0, n - 3))
            b = min(n, a + 2 + int(rng.integers(0, 64)))
            series[a:b] = series[a]
        roll = rng.random()
        if roll < 0.15:
            query = np.full(m, float(rng.normal()))
        elif roll < 0.55 and n > m:
            p = int(rng.integers(0, n - m))
            query = series[p : p + m].copy()
        else:
            query = rng.normal(0.0, 1.0, m)
        d_brute, p_brute = sliding_min_distance(query, series, mode="brute")
        d_fft, p_fft = sliding_min_distance(query, series, mode="fft")
        assert abs(d_fft - d_brute) <= 1e-6
        assert p_fft == p_brute
    elapsed = time.perf_counter() - t_start
    assert elapsed < 30.0
    print(f"PASS C4: 1000 kernel pairs agree across modes ({elapsed:.1f}s)")


def _tiny_store(root, spec):
    store = KnowledgeStore(root)
    ids = {}
    for name, labels in spec.items():
        segs = {
            dev: DeviceSeries(dev, 0.0, 1.0, np.arange(8.0), np.zeros(8))
            for dev, _ in labels
        }
        ids[name] = store.add_instance(
            StoredInstance(id="", name=name, labels=set(labels), segments=segs)
        )
    return store, ids


def _oracle_rank(current, store, cache, mode, k):
    rows = []
    for inst in store.list_instances():
        shared = sorted(set(current) & inst.labels)
        total, matched, best = 0.0, [], None
        for dev, cls in shared:
            res = cache.get(inst.id, dev)
            if res is None:
                continue
            matched.append((dev, cls))
            total += res.d_min if mode == "literal" else 1.0 / (1.0 + res.d_min)
            if best is None or res.d_min < best[0]:
                best = (res.d_min, res.position)
        if matched:
            rows.append((inst.id, total, frozenset(matched), best[1]))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:k]


def test_c05_ranking_matches_enumeration_on_random_stores(tmp_path):
    from kbtriage.tsa import MatchResult

    t_start = time.perf_counter()
    rng = np.random.default_rng(77)
    devices = [f"dev{j:02d}" for j in range(4)]
    classes = ["Abnormal Values", "Phase Shift", "Pattern Disrupt", "False Positive"]
    tie_pool = [0.5, 1.0, 1.5, 2.0]  # coarse grid forces frequent ties
    for trial in range(200):
        spec = {}
        for j in range(int(rng.integers(1, 8))):
            labels = set()
            for _ in range(int(rng.integers(1, 4))):
                labels.add(
                    (
                        devices[rng.integers(len(devices))],
                        classes[rng.integers(len(classes))],
                    )
                )
            spec[f"t{trial}i{j}"] = labels
        store, ids = _tiny_store(tmp_path / f"s{trial}", spec)
        cache = MatchCache()
        for name, labels in spec.items():
            for dev, _ in labels:
                if rng.random() < 0.85:
                    cache.put(
                        MatchResult(
                            ids[name],
                            dev,
                            float(tie_pool[rng.integers(len(tie_pool))]),
                            int(rng.integers(0, 300)),
                        )
                    )
        current = set()
        for _ in range(int(rng.integers(1, 5))):
            current.add(
                (
                    devices[rng.integers(len(devices))],
                    classes[rng.integers(len(classes))],
                )
            )
        for mode in ("literal", "similarity"):
            got = rank_instances(current, store, cache, mode=mode)
            want = _oracle_rank(current, store, cache, mode, 5)
            assert [
                (s.instance, s.matched_labels, s.initial_offset) for s in got
            ] == [(w[0], w[2], w[3]) for w in want]
            for s, w in zip(got, want):
                assert s.rank_value == pytest.approx(w[1], abs=1e-12)
    elapsed = time.perf_counter() - t_start
    assert elapsed < 10.0
    print(f"PASS C5: 200 stores ranked identically to enumeration ({elapsed:.1f}s)")


def test_c06_single_incident_classification_latency(tmp_path):
    ontology = incident_ontology()
    registry = incident_registry()
    params = AnalysisParams()
    n = 10_000
    t = np.arange(n, dtype=float)
    readings = 10.0 + np.sin(2 * np.pi * t / 50.0)
    readings += 0.05 * np.random.default_rng(3).normal(0, 1, n)
    ratings = np.zeros(n)
    readings[5000:5120] += 2.5
    ratings[5000:5120] = 0.95
    data = {"dev01": DeviceSeries("dev01", 0.0, 1.0, readings, ratings)}

    store = KnowledgeStore(tmp_path, ontology)
    class_pool = ["Abnormal Values", "Phase Shift", "False Positive"]
    rng = np.random.default_rng(8)
    for j in range(25):
        a = int(rng.integers(0, n - 200))
        seg = DeviceSeries("dev01", float(a), 1.0, readings[a : a + 120], np.zeros(120))
        store.add_instance(
            StoredInstance(
                id="",
                name=f"bench {j}",
                labels={("dev01", class_pool[j % 3])},
                segments={"dev01": seg},
            )
        )

    incidents, _ = detect_incidents(data["dev01"], params)
    assert len(incidents) == 1
    ranges = resolve_ranges(data, store, params)
    cache = MatchCache()
    cache.populate(store, data)  # warm

    classify_incidents(
        incidents, ontology, registry, store, data, params, ranges, cache
    )
    laps = []
    for _ in range(100):
        t0 = time.perf_counter()
        outcome = classify_incidents(
            incidents, ontology, registry, store, data, params, ranges, cache
        )
        laps.append(time.perf_counter() - t0)
        assert outcome.incidents[0].complete
    median = statistics.median(laps)
    assert median < 0.050, f"median {median * 1000:.1f}ms"
    print(f"PASS C6: warm single-incident classification median {median * 1000:.1f}ms")


def _store_with_slices(root, ontology, data, count):
    store = KnowledgeStore(root, ontology)
    devices = sorted(data)
    rng = np.random.default_rng(5)
    pool = ["Abnormal Values", "Phase Shift", "Period Disrupt", "False Positive"]
    for j in range(count):
        dev = devices[j % len(devices)]
        series = data[dev]
        a = int(rng.integers(0, len(series.readings) - 220))
        seg = DeviceSeries(
            dev, series.t0 + a, series.dt,
            series.readings[a : a + 200], series.ratings[a : a + 200],
        )
        store.add_instance(
            StoredInstance(
                id="",
                name=f"slice {j}",
                labels={(dev, pool[j % len(pool)])},
                segments={dev: seg},
            )
        )
    return store


def test_c07_first_series_request_on_large_deployment(tmp_path):
    out = generate(devices=28, steps=100_000, seed=7)
    csv_path = tmp_path / "big.csv"
    write_csv(str(csv_path), out.data)
    _store_with_slices(tmp_path / "store", incident_ontology(), out.data, 26)
    cfg = tmp_path / "svc.json"
    cfg.write_text(
        json.dumps({"data": str(csv_path), "store": str(tmp_path / "store")})
    )
    client = TestClient(create_app(load_config(str(cfg))))

    t_start = time.perf_counter()
    resp = client.get("/api/series", params={"budget": 2000})
    elapsed = time.perf_counter() - t_start
    assert resp.status_code == 200
    payload = resp.json()
    assert len(payload["devices"]) == 28
    for dev, regions in payload["devices"].items():
        assert sum(len(r["readings"]) for r in regions) <= 2002
    assert elapsed < 5.0
    print(f"PASS C7: first series request on 28x100k in {elapsed:.2f}s")


def test_c08_window_regions_contract(tmp_path):
    out = generate(
        devices=3,
        steps=20_000,
        seed=21,
        injections=[Injection("high", "dev02", 9000)],
    )
    csv_path = tmp_path / "mid.csv"
    write_csv(str(csv_path), out.data)
    cfg = tmp_path / "svc.json"
    cfg.write_text(
        json.dumps({"data": str(csv_path), "store": str(tmp_path / "store")})
    )
    client = TestClient(create_app(load_config(str(cfg))))

    t_start = time.perf_counter()
    rng = np.random.default_rng(99)
    n = 20_000
    for _ in range(100):
        lo = int(rng.integers(0, n))
        hi = int(rng.integers(lo, n + 1))
        budget = int(rng.integers(24, 500))
        resp = client.get(
            "/api/series",
            params={"start": lo, "end": hi, "budget": budget},
        )
        assert resp.status_code == 200
        payload = resp.json()
        assert payload["window"] == [lo, hi]
        for dev, regions in payload["devices"].items():
            src = out.data[dev]
            inside = [
                r
                for r in regions
                if r["kind"] == "full"
                and "t0" in r
                and round((r["t0"] - payload["t0"]) / payload["dt"]) == lo
                and len(r["readings"]) == hi - lo
            ]
            if hi > lo:
                assert len(inside) == 1
                assert inside[0]["readings"] == src.readings[lo:hi].tolist()
                assert inside[0]["ratings"] == src.ratings[lo:hi].tolist()
            outside = sum(
                len(r["readings"]) for r in regions if r not in inside
            )
            assert outside <= budget + 2
            got_readings = np.concatenate(
                [np.asarray(r["readings"]) for r in regions]
            )
            got_ratings = np.concatenate(
                [np.asarray(r["ratings"]) for r in regions]
            )
            assert got_readings.min() == src.readings.min()
            assert got_readings.max() == src.readings.max()
            assert got_ratings.max() == src.ratings.max()
    elapsed = time.perf_counter() - t_start
    assert elapsed < 30.0
    print(f"PASS C8: 100 window requests honored the region contract ({elapsed:.1f}s)")


def test_c09_store_round_trips_are_bit_exact(tmp_path):
    t_start = time.perf_counter()
    rng = np.random.default_rng(31)
    store = KnowledgeStore(tmp_path)
    drafts = {}
    scales = [1e-300, 1e-9, 1.0, 1e3, 1e300]
    for j in range(100):
        segments = {}
        labels = set()
        for d in range(int(rng.integers(1, 4))):
            dev = f"dev{d:02d}"
            length = int(rng.integers(1, 500))
            scale = scales[int(rng.integers(len(scales)))]
            readings = rng.normal(0.0, 1.0, length) * scale
            if rng.random() < 0.2:
                readings[:: max(1, length // 3)] = -0.0
            segments[dev] = DeviceSeries(
                dev,
                float(rng.uniform(-1e9, 1e9)),
                float(rng.uniform(0.001, 3600.0)),
                readings,
                rng.uniform(0.0, 1.0, length),
            )
            labels.add((dev, f"class-{int(rng.integers(5))}"))
        iid = store.add_instance(
            StoredInstance(
                id="",
                name=f"roundtrip {j} µunit",
                labels=labels,
                segments=segments,
                instance_annotation="multi\nline " + "x" * int(rng.integers(0, 40)),
                device_annotations={d: f"note {d}" for d in segments},
                vis_settings=VisSettings(
                    period_seconds=float(rng.uniform(0.01, 9000.0)),
                    colormap="plasma",
                    colormap_reference=(
                        float(rng.uniform(-5, 0)),
                        float(rng.uniform(0.1, 5)),
                    ),
                ),
            )
        )
        drafts[iid] = store.get_instance(iid)

    reopened = KnowledgeStore(tmp_path)
    assert not reopened.warnings
    for iid, orig in drafts.items():
        back = reopened.get_instance(iid)
        assert back.name == orig.name
        assert back.labels == orig.labels
        assert back.instance_annotation == orig.instance_annotation
        assert back.device_annotations == orig.device_annotations
        assert back.vis_settings == orig.vis_settings
        assert back.created_at == orig.created_at
        assert sorted(back.segments) == sorted(orig.segments)
        for dev, seg in orig.segments.items():
            got = back.segments[dev]
            assert got.t0 == seg.t0 and got.dt == seg.dt
            assert got.readings.tobytes() == seg.readings.tobytes()
            assert got.ratings.tobytes() == seg.ratings.tobytes()
    elapsed = time.perf_counter() - t_start
    assert elapsed < 10.0
    print(f"PASS C9: 100 instances round-tripped bit-exact ({elapsed:.1f}s)")


def test_c10_class_query_ordering_and_exclusion(tmp_path):
    t_start = time.perf_counter()
    ontology = incident_ontology()
    store = KnowledgeStore(tmp_path, ontology)

    def add(name, labels, created):
        return store.add_instance(
            StoredInstance(
                id="",
                name=name,
                labels=set(labels),
                segments={
                    dev: DeviceSeries(dev, 0.0, 1.0, np.arange(8.0), np.zeros(8))
                    for dev in {d for d, _ in labels}
                },
                created_at=created,
            )
        )

    a = add("values", [("dev01", "Abnormal Values")], 1.0)
    b = add("shifted", [("dev01", "Phase Shift")], 2.0)
    c = add("noise", [("dev01", "False Positive")], 3.0)
    d = add("both", [("dev02", "Frequency Change"), ("dev01", "Abnormal Values")], 4.0)

    hits = store.query_by_classes({"Anomaly"})
    assert [(h.instance.id, h.score) for h in hits] == [
        (d, 1), (b, 1), (a, 1),
    ]

    hits = store.query_by_classes({"Periodic", "Abnormal Values"})
    assert [(h.instance.id, h.score) for h in hits] == [
        (d, 2), (b, 1), (a, 1),
    ]

    hits = store.query_by_classes({"False Positive"})
    assert [(h.instance.id, h.score) for h in hits] == [(c, 1)]

    assert store.query_by_classes({"Not Periodic"}) == []

    elapsed = time.perf_counter() - t_start
    assert elapsed < 1.0
    print(f"PASS C10: class queries ordered and filtered exactly ({elapsed:.3f}s)")
