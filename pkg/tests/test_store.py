"""Instance persistence, validation, querying and normal ranges."""

from __future__ import annotations

import json
import os

import numpy as np
import pytest

from kbtriage.ontology import parse_ontology
from kbtriage.store import (
    InstanceValidationError,
    KnowledgeStore,
    NormalRange,
    StoredInstance,
    UnknownDeviceError,
    UnknownInstanceError,
    VisSettings,
    instance_from_document,
    instance_to_document,
    open_store,
)
from kbtriage.tsa import DeviceSeries


def small_ontology():
    classes = [
        {"id": "Top", "name": "Top", "parent": None, "triggers": [], "callback": "cb"},
        {"id": "Mid", "name": "Mid", "parent": "Top", "triggers": ["m"], "callback": "cb2"},
        {"id": "LeafA", "name": "LeafA", "parent": "Mid", "triggers": ["a"]},
        {"id": "LeafB", "name": "LeafB", "parent": "Mid", "triggers": ["b"]},
        {"id": "Other", "name": "Other", "parent": "Top", "triggers": ["o"]},
    ]
    return parse_ontology(json.dumps({"name": "mini", "classes": classes}))


def make_instance(iid="", name="pump wobble", devices=("d1",), cls="LeafA",
                  created_at=0.0, n=16, seed=5):
    rng = np.random.default_rng(seed)
    segments = {
        dev: DeviceSeries(dev, 10.0, 1.0, rng.standard_normal(n),
                          rng.uniform(0, 1, size=n))
        for dev in devices
    }
    return StoredInstance(
        id=iid,
        name=name,
        labels={(dev, cls) for dev in devices},
        segments=segments,
        instance_annotation="observed during maintenance",
        device_annotations={devices[0]: "primary sensor"},
        vis_settings=VisSettings(3.5, "plasma", (-1.0, 1.0)),
        created_at=created_at,
    )


def test_add_assigns_sequential_ids_and_persists(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    first = store.add_instance(make_instance())
    second = store.add_instance(make_instance(name="valve flutter"))
    assert first == "inst-000001"
    assert second == "inst-000002"
    assert [i.id for i in store.list_instances()] == [first, second]
    assert os.path.exists(tmp_path / "kb" / "instances" / f"{first}.json")


def test_round_trip_is_bit_exact(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    original = make_instance(created_at=1234.5)
    iid = store.add_instance(original)

    reopened = open_store(str(tmp_path / "kb"), small_ontology())
    got = reopened.get_instance(iid)
    assert got.name == original.name
    assert got.labels == original.labels
    assert got.created_at == 1234.5
    assert got.vis_settings == original.vis_settings
    assert got.instance_annotation == original.instance_annotation
    assert got.device_annotations == original.device_annotations
    for dev, seg in original.segments.items():
        assert np.array_equal(got.segments[dev].readings, seg.readings)
        assert np.array_equal(got.segments[dev].ratings, seg.ratings)
        assert got.segments[dev].t0 == seg.t0
        assert got.segments[dev].dt == seg.dt


def test_document_codec_round_trip():
    inst = make_instance(iid="inst-000009", created_at=7.0)
    doc = instance_to_document(inst)
    again = instance_to_document(instance_from_document(json.loads(json.dumps(doc))))
    assert again == doc


def test_validation_rejects_label_without_segment(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    bad = make_instance()
    bad.labels.add(("ghost", "LeafA"))
    with pytest.raises(InstanceValidationError) as err:
        store.add_instance(bad)
    assert any("ghost" in msg for _f, msg in err.value.errors)


def test_validation_rejects_unknown_class(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    bad = make_instance(cls="Bogus")
    with pytest.raises(InstanceValidationError) as err:
        store.add_instance(bad)
    assert any("Bogus" in msg for _f, msg in err.value.errors)


def test_validation_rejects_empty_name_and_bad_ratings(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    with pytest.raises(InstanceValidationError):
        store.add_instance(make_instance(name=""))
    inst = make_instance()
    object.__setattr__  # keep linters quiet; segments are mutable on purpose
    inst.segments["d1"].ratings[0] = 0.5  # fine
    doc = instance_to_document(inst)
    doc["segments"]["d1"]["ratings"][0] = 1.5
    with pytest.raises(InstanceValidationError):
        instance_from_document(doc)


def test_delete_removes_file_and_unknown_id_is_reported(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    iid = store.add_instance(make_instance())
    store.delete_instance(iid)
    assert store.list_instances() == []
    assert not os.path.exists(tmp_path / "kb" / "instances" / f"{iid}.json")
    with pytest.raises(UnknownInstanceError):
        store.delete_instance(iid)
    with pytest.raises(UnknownInstanceError):
        store.get_instance(iid)


def test_corrupt_file_is_skipped_with_warning(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    iid = store.add_instance(make_instance())
    with open(tmp_path / "kb" / "instances" / "broken.json", "w") as fh:
        fh.write("{not json")
    reopened = open_store(str(tmp_path / "kb"), small_ontology())
    assert [i.id for i in reopened.list_instances()] == [iid]
    assert any("broken.json" in w for w in reopened.warnings)


def test_query_matches_descendants_and_ranks_by_score(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    both = make_instance(name="both", devices=("d1", "d2"), created_at=10.0)
    both.labels = {("d1", "LeafA"), ("d2", "Other")}
    one = make_instance(name="one", devices=("d1",), cls="LeafB", created_at=20.0)
    none = make_instance(name="none", devices=("d1",), cls="Top", created_at=30.0)
    id_both = store.add_instance(both)
    id_one = store.add_instance(one)
    store.add_instance(none)

    hits = store.query_by_classes({"Mid", "Other"})
    assert [(h.instance.id, h.score) for h in hits][:2] == [(id_both, 2), (id_one, 1)]
    # selecting Mid matches its descendants LeafA and LeafB
    only_mid = store.query_by_classes({"Mid"})
    assert {h.instance.id for h in only_mid} == {id_both, id_one}
    assert all(h.score == 1 for h in only_mid)
    # zero-match instances are excluded entirely
    assert all(h.instance.name != "none" for h in hits)


def test_query_ties_order_newest_first(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    older = store.add_instance(make_instance(name="older", created_at=100.0))
    newer = store.add_instance(make_instance(name="newer", created_at=200.0))
    hits = store.query_by_classes({"LeafA"})
    assert [h.instance.id for h in hits] == [newer, older]


def test_normal_ranges_persist(tmp_path):
    store = open_store(str(tmp_path / "kb"))
    store.set_normal_range(NormalRange("d1", -1.5, 2.5))
    store.set_normal_range(NormalRange("d2", 0.0, 1.0))
    reopened = open_store(str(tmp_path / "kb"))
    got = reopened.get_normal_range("d1")
    assert (got.lo, got.hi) == (-1.5, 2.5)
    assert set(reopened.normal_ranges()) == {"d1", "d2"}
    with pytest.raises(UnknownDeviceError):
        reopened.get_normal_range("d9")
    with pytest.raises(ValueError):
        NormalRange("d1", 2.0, 1.0)


def test_store_never_mutates_the_ontology(tmp_path):
    ont = small_ontology()
    from kbtriage.ontology import serialize_ontology

    before = serialize_ontology(ont)
    store = open_store(str(tmp_path / "kb"), ont)
    iid = store.add_instance(make_instance())
    store.query_by_classes({"Mid"})
    store.set_normal_range(NormalRange("d1", 0.0, 1.0))
    store.delete_instance(iid)
    assert serialize_ontology(ont) == before


def test_version_bumps_on_writes_only(tmp_path):
    store = open_store(str(tmp_path / "kb"), small_ontology())
    v0 = store.version
    iid = store.add_instance(make_instance())
    v1 = store.version
    store.get_instance(iid)
    store.list_instances()
    store.query_by_classes({"Mid"})
    assert store.version == v1 > v0
    store.delete_instance(iid)
    assert store.version > v1
