"""Acting ontology: a class tree whose nodes bind analysis callbacks.

Classification starts at the root, invokes the current class's callback and
routes the returned token through the children's trigger sets.  A child
without a callback but with children of its own is crossed with the same
token (multi-level skip), so one callback result can descend several levels.
Traversal ends at a class without a callback; if no child trigger matches
along the way the result is marked incomplete and keeps the partial path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

GUIDANCE_KINDS = frozenset({"highlight_period", "prescribe_settings"})


class OntologyError(ValueError):
    """Malformed ontology document or violated structural invariant."""


class UnknownClassError(OntologyError):
    """A class id that does not exist in the ontology."""


class UnknownCallbackError(KeyError):
    """A callback name that is not registered."""


class ClassificationError(RuntimeError):
    """A callback failed while classifying; carries the partial path."""

    def __init__(self, message: str, path: list[str]):
        super().__init__(message)
        self.path = list(path)


@dataclass(frozen=True)
class GuidanceAction:
    """A machine-readable hint attached to a class for downstream views."""

    kind: str
    params: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in GUIDANCE_KINDS:
            raise OntologyError(f"unknown guidance kind {self.kind!r}")
        for key in self.params:
            if not isinstance(key, str) or not key:
                raise OntologyError("guidance params need non-empty string keys")


@dataclass(frozen=True)
class OntologyClass:
    id: str
    name: str
    parent: str | None = None
    triggers: frozenset[str] = frozenset()
    qualifiers: frozenset[str] = frozenset()
    callback: str | None = None
    annotations: str = ""
    guidance: tuple[GuidanceAction, ...] = ()


@dataclass(frozen=True)
class CallbackResult:
    """What a callback hands back to the traversal."""

    token: str
    qualifier: str | None = None
    diagnostics: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class CallbackSpec:
    name: str
    fn: Callable[[Any, Any], CallbackResult]
    doc: str = ""
    # Tokens the callback can emit; None means undeclared (validation skips it).
    token_domain: frozenset[str] | None = None


class CallbackRegistry:
    """Name -> callable binding used while traversing an ontology."""

    def __init__(self) -> None:
        self._entries: dict[str, CallbackSpec] = {}

    def register(
        self,
        name: str,
        fn: Callable[[Any, Any], CallbackResult],
        doc: str = "",
        token_domain: set[str] | frozenset[str] | None = None,
    ) -> None:
        if not name:
            raise ValueError("callback name must be non-empty")
        domain = frozenset(token_domain) if token_domain is not None else None
        self._entries[name] = CallbackSpec(name, fn, doc, domain)

    def resolve(self, name: str) -> CallbackSpec:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownCallbackError(name) from None

    def names(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries


class Ontology:
    """Validated class tree with constant-time child and parent lookup."""

    def __init__(self, name: str, classes: list[OntologyClass]):
        if not classes:
            raise OntologyError("ontology needs at least one class")
        self.name = name
        self._classes: dict[str, OntologyClass] = {}
        for cls in classes:
            if cls.id in self._classes:
                raise OntologyError(f"duplicate class id {cls.id!r}")
            if not cls.id or not cls.name:
                raise OntologyError("class id and name must be non-empty")
            self._classes[cls.id] = cls
        roots = [c.id for c in classes if c.parent is None]
        if len(roots) != 1:
            raise OntologyError(f"expected exactly one root, found {len(roots)}")
        self.root = roots[0]
        self._children: dict[str, tuple[str, ...]] = {c.id: () for c in classes}
        for cls in classes:
            if cls.parent is not None:
                if cls.parent not in self._classes:
                    raise OntologyError(
                        f"class {cls.id!r} references missing parent {cls.parent!r}"
                    )
                self._children[cls.parent] += (cls.id,)
        self._check_structure()

    def _check_structure(self) -> None:
        # Every class must hang off the root; a cycle among non-roots would
        # leave its members unreachable.
        seen: set[str] = set()
        stack = [self.root]
        while stack:
            cid = stack.pop()
            seen.add(cid)
            stack.extend(self._children[cid])
        if len(seen) != len(self._classes):
            orphans = sorted(set(self._classes) - seen)
            raise OntologyError(f"classes not reachable from root: {orphans}")
        if self._classes[self.root].triggers:
            raise OntologyError("root class must not declare triggers")
        for cls in self._classes.values():
            if cls.parent is not None and not cls.triggers:
                raise OntologyError(f"non-root class {cls.id!r} needs triggers")
            kids = self._children[cls.id]
            if cls.callback is not None and not kids:
                raise OntologyError(f"leaf class {cls.id!r} must not bind a callback")
            claimed: set[str] = set()
            for kid in kids:
                overlap = claimed & self._classes[kid].triggers
                if overlap:
                    raise OntologyError(
                        f"children of {cls.id!r} share trigger tokens {sorted(overlap)}"
                    )
                claimed |= self._classes[kid].triggers

    def __len__(self) -> int:
        return len(self._classes)

    def __contains__(self, class_id: str) -> bool:
        return class_id in self._classes

    def __iter__(self) -> Iterator[OntologyClass]:
        return iter(self._classes.values())

    def __getitem__(self, class_id: str) -> OntologyClass:
        try:
            return self._classes[class_id]
        except KeyError:
            raise UnknownClassError(f"unknown class {class_id!r}") from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ontology):
            return NotImplemented
        return self.name == other.name and self._classes == other._classes

    def children(self, class_id: str) -> tuple[str, ...]:
        self[class_id]
        return self._children[class_id]

    def is_leaf(self, class_id: str) -> bool:
        return not self.children(class_id)

    def ancestors(self, class_id: str) -> list[str]:
        """Chain from the root down to the class's parent, root first."""
        chain: list[str] = []
        parent = self[class_id].parent
        while parent is not None:
            chain.append(parent)
            parent = self[parent].parent
        chain.reverse()
        return chain

    def subtree(self, class_id: str) -> set[str]:
        """The class itself plus every descendant."""
        out: set[str] = set()
        stack = [self[class_id].id]
        while stack:
            cid = stack.pop()
            out.add(cid)
            stack.extend(self._children[cid])
        return out

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "classes": [
                {
                    "id": c.id,
                    "name": c.name,
                    "parent": c.parent,
                    "triggers": sorted(c.triggers),
                    "qualifiers": sorted(c.qualifiers),
                    "callback": c.callback,
                    "annotations": c.annotations,
                    "guidance": [
                        {"kind": g.kind, "params": dict(g.params)} for g in c.guidance
                    ],
                }
                for c in self._classes.values()
            ],
        }


_CLASS_FIELDS = {
    "id",
    "name",
    "parent",
    "triggers",
    "qualifiers",
    "callback",
    "annotations",
    "guidance",
}


def _parse_class(raw: dict) -> OntologyClass:
    if not isinstance(raw, dict):
        raise OntologyError("each class must be a JSON object")
    unknown = set(raw) - _CLASS_FIELDS
    if unknown:
        raise OntologyError(f"unknown class field(s): {sorted(unknown)}")
    for key in ("id", "name"):
        if not isinstance(raw.get(key), str):
            raise OntologyError(f"class field {key!r} must be a string")
    parent = raw.get("parent")
    if parent is not None and not isinstance(parent, str):
        raise OntologyError("class field 'parent' must be a string or null")
    callback = raw.get("callback")
    if callback is not None and not isinstance(callback, str):
        raise OntologyError("class field 'callback' must be a string or null")
    annotations = raw.get("annotations", "")
    if not isinstance(annotations, str):
        raise OntologyError("class field 'annotations' must be a string")

    def _str_list(key: str) -> frozenset[str]:
        value = raw.get(key, [])
        if not isinstance(value, list) or any(
            not isinstance(v, str) or not v for v in value
        ):
            raise OntologyError(f"class field {key!r} must be a list of non-empty strings")
        if len(set(value)) != len(value):
            raise OntologyError(f"class field {key!r} has duplicate entries")
        return frozenset(value)

    guidance_raw = raw.get("guidance", [])
    if not isinstance(guidance_raw, list):
        raise OntologyError("class field 'guidance' must be a list")
    guidance = []
    for item in guidance_raw:
        if not isinstance(item, dict) or set(item) - {"kind", "params"}:
            raise OntologyError("guidance entries are objects with kind and params")
        params = item.get("params", {})
        if not isinstance(params, dict) or any(
            not isinstance(v, str) for v in params.values()
        ):
            raise OntologyError("guidance params must map strings to strings")
        guidance.append(GuidanceAction(item.get("kind", ""), dict(params)))

    return OntologyClass(
        id=raw["id"],
        name=raw["name"],
        parent=parent,
        triggers=_str_list("triggers"),
        qualifiers=_str_list("qualifiers"),
        callback=callback,
        annotations=annotations,
        guidance=tuple(guidance),
    )


def parse_ontology(text: str) -> Ontology:
    """Parse a UTF-8 JSON ontology document, rejecting unknown fields."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OntologyError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise OntologyError("ontology document must be a JSON object")
    unknown = set(doc) - {"name", "classes"}
    if unknown:
        raise OntologyError(f"unknown document field(s): {sorted(unknown)}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise OntologyError("document field 'name' must be a non-empty string")
    classes_raw = doc.get("classes")
    if not isinstance(classes_raw, list) or not classes_raw:
        raise OntologyError("document field 'classes' must be a non-empty list")
    return Ontology(name, [_parse_class(c) for c in classes_raw])


def serialize_ontology(ontology: Ontology) -> str:
    return json.dumps(ontology.to_document(), indent=2, ensure_ascii=False) + "\n"


def load_ontology(path: str) -> Ontology:
    with open(path, encoding="utf-8") as fh:
        return parse_ontology(fh.read())


def ancestors(ontology: Ontology, class_id: str) -> list[str]:
    return ontology.ancestors(class_id)


def class_documentation(
    ontology: Ontology, class_id: str, registry: CallbackRegistry | None = None
) -> str:
    """Class annotation plus, when available, the bound callback's doc string."""
    cls = ontology[class_id]
    parts = [cls.annotations] if cls.annotations else []
    if cls.callback and registry is not None and cls.callback in registry:
        doc = registry.resolve(cls.callback).doc
        if doc:
            parts.append(doc)
    return "\n\n".join(parts)


@dataclass(frozen=True)
class ValidationFinding:
    kind: str  # "missing_callback" | "unreachable_trigger"
    class_id: str
    detail: str


@dataclass
class ValidationReport:
    findings: list[ValidationFinding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings


def validate(ontology: Ontology, registry: CallbackRegistry) -> ValidationReport:
    """Check callback bindings against a registry.

    Reports every callback name bound by a class but absent from the
    registry, and every child trigger token the routing callback can never
    emit (when that callback declares a token domain).  Children of a class
    without a callback are routed by the nearest ancestor callback, matching
    the multi-level skip in classify().
    """
    report = ValidationReport()
    for cls in ontology:
        if cls.callback is not None and cls.callback not in registry:
            report.findings.append(
                ValidationFinding(
                    "missing_callback", cls.id, f"callback {cls.callback!r} not registered"
                )
            )
    # Effective routing callback per class: own callback, else the parent's
    # effective one (the token that crossed into this class keeps routing).
    effective: dict[str, str | None] = {}

    def _effective(cid: str) -> str | None:
        if cid in effective:
            return effective[cid]
        cls = ontology[cid]
        if cls.callback is not None:
            effective[cid] = cls.callback
        elif cls.parent is None:
            effective[cid] = None
        else:
            effective[cid] = _effective(cls.parent)
        return effective[cid]

    for cls in ontology:
        if cls.parent is None:
            continue
        router = _effective(cls.parent)
        if router is None or router not in registry:
            continue
        domain = registry.resolve(router).token_domain
        if domain is None:
            continue
        stray = cls.triggers - domain
        for token in sorted(stray):
            report.findings.append(
                ValidationFinding(
                    "unreachable_trigger",
                    cls.id,
                    f"trigger {token!r} never emitted by {router!r}",
                )
            )
    return report


@dataclass
class ClassificationResult:
    path: list[str]
    final_class: str
    qualifier: str | None
    complete: bool
    diagnostics: dict[str, str] = field(default_factory=dict)


def _route(ontology: Ontology, class_id: str, token: str) -> str | None:
    for kid in ontology.children(class_id):
        if token in ontology[kid].triggers:
            return kid
    return None


def classify(
    ontology: Ontology,
    registry: CallbackRegistry,
    payload: Any,
    store: Any = None,
) -> ClassificationResult:
    """Walk the tree from the root, routing callback tokens through triggers.

    Every routing step records its token in diagnostics under
    ``route.<class id>``.  A token no child trigger accepts stops the walk
    with complete=False and the partial path.  A qualifier emitted by the
    last callback is kept only when the final class declares it; a declared
    set that does not contain it also downgrades to complete=False.
    """
    current = ontology.root
    path = [current]
    diagnostics: dict[str, str] = {}
    last: CallbackResult | None = None

    while ontology[current].callback is not None:
        cb_name = ontology[current].callback
        try:
            spec = registry.resolve(cb_name)
            result = spec.fn(payload, store)
        except Exception as exc:
            raise ClassificationError(
                f"callback {cb_name!r} failed at class {current!r}: {exc}", path
            ) from exc
        if not isinstance(result, CallbackResult) or not result.token:
            raise ClassificationError(
                f"callback {cb_name!r} returned no routable token", path
            )
        diagnostics.update(result.diagnostics)
        diagnostics[f"route.{current}"] = result.token
        last = result

        nxt = _route(ontology, current, result.token)
        if nxt is None:
            return ClassificationResult(path, current, None, False, diagnostics)
        path.append(nxt)
        current = nxt
        # Multi-level skip: cross callback-less classes with the same token.
        while ontology[current].callback is None and ontology.children(current):
            diagnostics[f"route.{current}"] = result.token
            nxt = _route(ontology, current, result.token)
            if nxt is None:
                return ClassificationResult(path, current, None, False, diagnostics)
            path.append(nxt)
            current = nxt

    complete = ontology.is_leaf(current)
    qualifier = None
    if last is not None and last.qualifier is not None:
        declared = ontology[current].qualifiers
        if last.qualifier in declared:
            qualifier = last.qualifier
        elif declared:
            complete = False
    return ClassificationResult(path, current, qualifier, complete, diagnostics)
