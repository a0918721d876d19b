"""Ontology parsing, validation and callback-driven traversal."""

from __future__ import annotations

import json
from collections import defaultdict

import numpy as np
import pytest

from kbtriage.ontology import (
    CallbackRegistry,
    CallbackResult,
    ClassificationError,
    Ontology,
    OntologyClass,
    OntologyError,
    UnknownClassError,
    ancestors,
    class_documentation,
    classify,
    parse_ontology,
    serialize_ontology,
    validate,
)


def _doc(classes, name="fixture"):
    return json.dumps({"name": name, "classes": classes})


def _cls(cid, parent=None, triggers=(), callback=None, **extra):
    out = {"id": cid, "name": cid, "parent": parent, "triggers": list(triggers)}
    if callback:
        out["callback"] = callback
    out.update(extra)
    return out


def scripted(table):
    """Registry whose callbacks return fixed (token, qualifier) pairs."""
    reg = CallbackRegistry()
    for name, (token, qualifier) in table.items():
        reg.register(
            name,
            lambda payload, store, t=token, q=qualifier: CallbackResult(t, q),
            doc=f"scripted callback {name}",
        )
    return reg


# ---------------------------------------------------------------------------
# parsing and structure


def test_parse_minimal_single_class():
    ont = parse_ontology(_doc([_cls("Root")]))
    assert len(ont) == 1
    assert ont.root == "Root"
    assert ont.is_leaf("Root")


def test_parse_rejects_duplicate_ids():
    with pytest.raises(OntologyError, match="duplicate"):
        parse_ontology(_doc([_cls("A"), _cls("A")]))


def test_parse_rejects_two_roots():
    with pytest.raises(OntologyError, match="root"):
        parse_ontology(_doc([_cls("A"), _cls("B")]))


def test_parse_rejects_missing_root():
    with pytest.raises(OntologyError):
        parse_ontology(_doc([_cls("A", parent="B", triggers=["x"]),
                             _cls("B", parent="A", triggers=["y"])]))


def test_parse_rejects_sibling_trigger_collision():
    doc = _doc([
        _cls("Root", callback="cb"),
        _cls("A", parent="Root", triggers=["tok", "other"]),
        _cls("B", parent="Root", triggers=["tok"]),
    ])
    with pytest.raises(OntologyError, match="share trigger"):
        parse_ontology(doc)


def test_parse_rejects_unknown_field():
    raw = json.loads(_doc([_cls("Root")]))
    raw["classes"][0]["color"] = "red"
    with pytest.raises(OntologyError, match="unknown class field"):
        parse_ontology(json.dumps(raw))
    raw = json.loads(_doc([_cls("Root")]))
    raw["flavour"] = "vanilla"
    with pytest.raises(OntologyError, match="unknown document field"):
        parse_ontology(json.dumps(raw))


def test_parse_rejects_callback_on_leaf():
    doc = _doc([
        _cls("Root", callback="cb"),
        _cls("Leaf", parent="Root", triggers=["x"], callback="cb2"),
    ])
    with pytest.raises(OntologyError, match="leaf"):
        parse_ontology(doc)


def test_parse_rejects_root_triggers_and_untagged_child():
    with pytest.raises(OntologyError, match="root"):
        Ontology("x", [OntologyClass("R", "R", triggers=frozenset({"a"}))])
    doc = _doc([_cls("Root", callback="cb"), _cls("A", parent="Root")])
    with pytest.raises(OntologyError, match="triggers"):
        parse_ontology(doc)


def test_parse_rejects_bad_guidance():
    doc = _doc([_cls("Root", guidance=[{"kind": "dance", "params": {}}])])
    with pytest.raises(OntologyError, match="guidance"):
        parse_ontology(doc)


def test_unknown_class_lookup_raises():
    ont = parse_ontology(_doc([_cls("Root")]))
    with pytest.raises(UnknownClassError):
        ont["Nope"]


# ---------------------------------------------------------------------------
# serialization round trip


TWO_LEVEL = _doc([
    _cls("Root", callback="decide"),
    _cls("A", parent="Root", triggers=["a"], qualifiers=["Hi", "Lo"],
         annotations="first branch", guidance=[{"kind": "highlight_period",
                                                "params": {"target": "window"}}]),
    _cls("B", parent="Root", triggers=["b", "bb"]),
])


def test_round_trip_identity():
    ont = parse_ontology(TWO_LEVEL)
    again = parse_ontology(serialize_ontology(ont))
    assert again == ont
    assert serialize_ontology(again) == serialize_ontology(ont)


def test_round_trip_random_trees():
    rng = np.random.default_rng(7)
    for _ in range(25):
        doc, _table = random_tree(rng)
        ont = parse_ontology(json.dumps(doc))
        assert parse_ontology(serialize_ontology(ont)) == ont


# ---------------------------------------------------------------------------
# ancestors / documentation


def test_ancestors_chain():
    doc = _doc([
        _cls("Root", callback="c1"),
        _cls("Mid", parent="Root", triggers=["m"], callback="c2"),
        _cls("Leaf", parent="Mid", triggers=["l"]),
    ])
    ont = parse_ontology(doc)
    assert ancestors(ont, "Leaf") == ["Root", "Mid"]
    assert ancestors(ont, "Root") == []


def test_class_documentation_merges_annotation_and_callback_doc():
    ont = parse_ontology(TWO_LEVEL)
    reg = CallbackRegistry()
    reg.register("decide", lambda p, s: CallbackResult("a"), doc="routes by letter")
    doc_root = class_documentation(ont, "Root", reg)
    assert "routes by letter" in doc_root
    assert class_documentation(ont, "A", reg) == "first branch"
    with pytest.raises(UnknownClassError):
        class_documentation(ont, "Missing", reg)


# ---------------------------------------------------------------------------
# validation against a registry


def test_validate_reports_missing_callbacks():
    doc = _doc([
        _cls("Root", callback="cbA"),
        _cls("X", parent="Root", triggers=["x"], callback="cbB"),
        _cls("Y", parent="X", triggers=["y"]),
    ])
    ont = parse_ontology(doc)
    report = validate(ont, CallbackRegistry())
    kinds = [(f.kind, f.class_id) for f in report.findings]
    assert ("missing_callback", "Root") in kinds
    assert ("missing_callback", "X") in kinds
    assert not report.ok


def test_validate_reports_unreachable_trigger_via_token_domain():
    doc = _doc([
        _cls("Root", callback="decide"),
        _cls("A", parent="Root", triggers=["1"]),
        _cls("B", parent="Root", triggers=["4"]),
    ])
    ont = parse_ontology(doc)
    reg = CallbackRegistry()
    reg.register("decide", lambda p, s: CallbackResult("1"), token_domain={"1", "2", "3"})
    report = validate(ont, reg)
    assert [f.kind for f in report.findings] == ["unreachable_trigger"]
    assert report.findings[0].class_id == "B"


def test_validate_checks_skip_level_grandchildren_against_ancestor_domain():
    doc = _doc([
        _cls("Root", callback="decide"),
        _cls("Skip", parent="Root", triggers=["1", "2"]),
        _cls("L1", parent="Skip", triggers=["1"]),
        _cls("L2", parent="Skip", triggers=["9"]),
    ])
    ont = parse_ontology(doc)
    reg = CallbackRegistry()
    reg.register("decide", lambda p, s: CallbackResult("1"), token_domain={"1", "2"})
    report = validate(ont, reg)
    assert [(f.kind, f.class_id) for f in report.findings] == [
        ("unreachable_trigger", "L2")
    ]


# ---------------------------------------------------------------------------
# traversal


def test_classify_single_step():
    ont = parse_ontology(TWO_LEVEL)
    res = classify(ont, scripted({"decide": ("a", None)}), payload=None)
    assert res.path == ["Root", "A"]
    assert res.final_class == "A"
    assert res.complete is True
    assert res.diagnostics["route.Root"] == "a"


def test_classify_multi_level_skip():
    doc = _doc([
        _cls("Root", callback="decide"),
        _cls("Skip", parent="Root", triggers=["a", "b"]),
        _cls("A", parent="Skip", triggers=["a"]),
        _cls("B", parent="Skip", triggers=["b"]),
        _cls("C", parent="Root", triggers=["c"]),
    ])
    ont = parse_ontology(doc)
    res = classify(ont, scripted({"decide": ("a", None)}), payload=None)
    assert res.path == ["Root", "Skip", "A"]
    assert res.complete is True
    # Same token recorded at each routing step.
    assert res.diagnostics["route.Root"] == "a"
    assert res.diagnostics["route.Skip"] == "a"


def test_classify_stall_keeps_partial_path():
    ont = parse_ontology(TWO_LEVEL)
    res = classify(ont, scripted({"decide": ("zz", None)}), payload=None)
    assert res.path == ["Root"]
    assert res.final_class == "Root"
    assert res.complete is False


def test_classify_stall_inside_skip():
    doc = _doc([
        _cls("Root", callback="decide"),
        _cls("Skip", parent="Root", triggers=["a"]),
        _cls("Deep", parent="Skip", triggers=["other"]),
    ])
    ont = parse_ontology(doc)
    res = classify(ont, scripted({"decide": ("a", None)}), payload=None)
    assert res.path == ["Root", "Skip"]
    assert res.complete is False


def test_classify_qualifier_recorded_and_validated():
    reg_hi = scripted({"decide": ("a", "Hi")})
    reg_bad = scripted({"decide": ("a", "Medium")})
    ont = parse_ontology(TWO_LEVEL)
    good = classify(ont, reg_hi, payload=None)
    assert good.qualifier == "Hi" and good.complete is True
    bad = classify(ont, reg_bad, payload=None)
    assert bad.qualifier is None and bad.complete is False
    # Final class without declared qualifiers drops the qualifier silently.
    res = classify(ont, scripted({"decide": ("b", "Hi")}), payload=None)
    assert res.final_class == "B" and res.qualifier is None and res.complete


def test_classify_callback_exception_carries_partial_path():
    def boom(payload, store):
        raise RuntimeError("sensor offline")

    doc = _doc([
        _cls("Root", callback="ok"),
        _cls("Mid", parent="Root", triggers=["go"], callback="boom"),
        _cls("Leaf", parent="Mid", triggers=["x"]),
    ])
    ont = parse_ontology(doc)
    reg = CallbackRegistry()
    reg.register("ok", lambda p, s: CallbackResult("go"))
    reg.register("boom", boom)
    with pytest.raises(ClassificationError) as err:
        classify(ont, reg, payload=None)
    assert err.value.path == ["Root", "Mid"]


def test_classify_missing_callback_is_an_error():
    ont = parse_ontology(TWO_LEVEL)
    with pytest.raises(ClassificationError):
        classify(ont, CallbackRegistry(), payload=None)


def test_route_tokens_match_child_triggers():
    ont = parse_ontology(TWO_LEVEL)
    res = classify(ont, scripted({"decide": ("bb", None)}), payload=None)
    for i in range(len(res.path) - 1):
        # the recorded token for each routing step is accepted by the child
        token = res.diagnostics[f"route.{res.path[i]}"]
        assert token in ont[res.path[i + 1]].triggers


# ---------------------------------------------------------------------------
# random trees against an independent path-walker oracle


def random_tree(rng: np.random.Generator):
    """Random valid ontology document plus a scripted callback table."""
    n = int(rng.integers(2, 22))
    classes = [{"id": "n0", "name": "n0", "parent": None, "triggers": []}]
    token_pool = [f"t{i}" for i in range(40)]
    used_by_parent: dict[str, set[str]] = defaultdict(set)
    for i in range(1, n):
        parent = f"n{rng.integers(0, i)}"
        free = [t for t in token_pool if t not in used_by_parent[parent]]
        k = int(rng.integers(1, 3))
        triggers = list(rng.choice(free, size=min(k, len(free)), replace=False))
        used_by_parent[parent].update(triggers)
        cls = {"id": f"n{i}", "name": f"n{i}", "parent": parent, "triggers": triggers}
        if rng.random() < 0.3:
            cls["qualifiers"] = ["Q1", "Q2"]
        classes.append(cls)

    children = defaultdict(list)
    for c in classes:
        if c["parent"] is not None:
            children[c["parent"]].append(c["id"])
    table = {}
    for c in classes:
        if children[c["id"]] and rng.random() < 0.8:
            name = f"cb_{c['id']}"
            c["callback"] = name
            # Mostly emit a token some child accepts, sometimes a stray one.
            if rng.random() < 0.75:
                kid = rng.choice(children[c["id"]])
                kid_triggers = next(x["triggers"] for x in classes if x["id"] == kid)
                token = str(rng.choice(kid_triggers))
            else:
                token = str(rng.choice(token_pool))
            qualifier = None
            if rng.random() < 0.3:
                qualifier = str(rng.choice(["Q1", "Q2", "QX"]))
            table[name] = (token, qualifier)
    return {"name": "random", "classes": classes}, table


def oracle_walk(doc: dict, table: dict):
    """Independent traversal over the raw document, for cross-checking."""
    classes = {c["id"]: c for c in doc["classes"]}
    children = defaultdict(list)
    for c in doc["classes"]:
        if c["parent"] is not None:
            children[c["parent"]].append(c["id"])
    root = next(c["id"] for c in doc["classes"] if c["parent"] is None)

    def take(cid, token):
        for kid in children[cid]:
            if token in classes[kid]["triggers"]:
                return kid
        return None

    cur, path, last = root, [root], None
    while classes[cur].get("callback"):
        token, qualifier = table[classes[cur]["callback"]]
        last = (token, qualifier)
        nxt = take(cur, token)
        if nxt is None:
            return path, cur, None, False
        path.append(nxt)
        cur = nxt
        while not classes[cur].get("callback") and children[cur]:
            nxt = take(cur, token)
            if nxt is None:
                return path, cur, None, False
            path.append(nxt)
            cur = nxt
    complete = not children[cur]
    qualifier = None
    if last is not None and last[1] is not None:
        declared = classes[cur].get("qualifiers", [])
        if last[1] in declared:
            qualifier = last[1]
        elif declared:
            complete = False
    return path, cur, qualifier, complete


def test_classify_agrees_with_oracle_on_random_trees():
    rng = np.random.default_rng(1234)
    agreements = 0
    for _ in range(100):
        doc, table = random_tree(rng)
        ont = parse_ontology(json.dumps(doc))
        reg = scripted(table)
        expected = oracle_walk(doc, table)
        got = classify(ont, reg, payload=None)
        assert (got.path, got.final_class, got.qualifier, got.complete) == expected
        agreements += 1
    assert agreements == 100
