"""Command line front door: kr <command>.

Exit codes: 0 success, 1 data or domain error, 2 configuration or usage
error.  Every command that reads telemetry takes the CSV layout written by
'kr gen-data' and by the service's own tooling.
"""

from __future__ import annotations

import argparse
import json
import sys

from .callbacks import incident_ontology, incident_registry
from .config import AnalysisParams
from .dataio import (
    DataError,
    read_csv,
    truth_path_for,
    write_csv,
    write_truth,
)
from .gendata import generate, parse_injection
from .ontology import (
    Ontology,
    OntologyError,
    load_ontology,
    serialize_ontology,
    validate,
)
from .store import (
    InstanceValidationError,
    KnowledgeStore,
    StoreError,
    UnknownInstanceError,
    instance_from_document,
    instance_to_document,
)
from .triage import rank_instances, run_triage


def _load_ontology(path: str | None) -> Ontology:
    return load_ontology(path) if path else incident_ontology()


def _open_store(path: str | None, ontology: Ontology) -> KnowledgeStore | None:
    return KnowledgeStore(path, ontology) if path else None


def _incident_line(ci) -> str:
    inc = ci.incident
    head = f"{inc.device}:{inc.start}-{inc.end}"
    if ci.error is not None:
        return f"{head} -> error: {ci.error}"
    result = ci.result
    tail = result.path[-1]
    if not result.complete:
        return f"{head} -> {tail} (incomplete)"
    if result.qualifier:
        return f"{head} -> {tail} [{result.qualifier}]"
    return f"{head} -> {tail}"


def cmd_classify(args) -> int:
    ontology = _load_ontology(args.ontology)
    store = _open_store(args.store, ontology)
    data = read_csv(args.data)
    run = run_triage(data, ontology, incident_registry(), store)
    if args.json:
        rows = []
        for ci in run.incidents:
            inc = ci.incident
            rows.append(
                {
                    "id": inc.id,
                    "device": inc.device,
                    "start": inc.start,
                    "end": inc.end,
                    "complete": ci.complete,
                    "path": list(ci.result.path) if ci.result else [],
                    "qualifier": ci.result.qualifier if ci.result else None,
                    "error": ci.error,
                }
            )
        print(json.dumps({"incidents": rows}, indent=2))
        return 0
    if not run.incidents:
        print("no incidents")
        return 0
    for ci in run.incidents:
        print(_incident_line(ci))
    return 0


def cmd_suggest(args) -> int:
    ontology = _load_ontology(args.ontology)
    store = KnowledgeStore(args.store, ontology)
    data = read_csv(args.data)
    run = run_triage(data, ontology, incident_registry(), store)
    ranked = rank_instances(
        run.outcome.labels,
        store,
        run.outcome.cache,
        data=data,
        k=args.count,
        mode=args.mode,
    )
    if args.json:
        print(
            json.dumps(
                [
                    {
                        "instance": s.instance,
                        "rank_value": s.rank_value,
                        "matched_labels": sorted(s.matched_labels),
                        "initial_offset": s.initial_offset,
                    }
                    for s in ranked
                ],
                indent=2,
            )
        )
        return 0
    if not ranked:
        print("no suggestions")
        return 0
    by_id = {inst.id: inst.name for inst in store.list_instances()}
    for s in ranked:
        labels = ", ".join(f"{d}/{c}" for d, c in sorted(s.matched_labels))
        print(
            f"{s.instance}  {by_id[s.instance]}  "
            f"rank {s.rank_value:.4g}  offset {s.initial_offset}  ({labels})"
        )
    return 0


def cmd_store(args) -> int:
    ontology = _load_ontology(args.ontology)
    store = KnowledgeStore(args.store, ontology)
    if args.store_cmd == "add":
        with open(args.file) as fh:
            doc = json.load(fh)
        instance_id = store.add_instance(
            instance_from_document(doc, require_id=False)
        )
        print(instance_id)
        return 0
    if args.store_cmd == "list":
        instances = store.list_instances()
        if not instances:
            print("empty store")
            return 0
        for inst in instances:
            print(f"{inst.id}  {inst.name}  labels={len(inst.labels)}")
        return 0
    if args.store_cmd == "show":
        inst = store.get_instance(args.id)
        print(json.dumps(instance_to_document(inst), indent=2))
        return 0
    if args.store_cmd == "rm":
        store.delete_instance(args.id)
        print(f"removed {args.id}")
        return 0
    raise AssertionError(f"unhandled store command {args.store_cmd}")


def _print_tree(ontology: Ontology, class_id: str, depth: int) -> None:
    cls = ontology[class_id]
    bits = []
    if cls.triggers:
        bits.append("on " + "|".join(sorted(cls.triggers)))
    if cls.callback:
        bits.append(f"calls {cls.callback}")
    if cls.qualifiers:
        bits.append("qualifiers " + "|".join(sorted(cls.qualifiers)))
    suffix = f"  ({'; '.join(bits)})" if bits else ""
    print("  " * depth + cls.name + suffix)
    for child_id in ontology.children(class_id):
        _print_tree(ontology, child_id, depth + 1)


def cmd_ontology(args) -> int:
    ontology = _load_ontology(args.ontology)
    if args.ontology_cmd == "validate":
        report = validate(ontology, incident_registry())
        if report.ok:
            print(f"{ontology.name}: clean ({len(ontology)} classes)")
            return 0
        for finding in report.findings:
            print(f"{finding.kind}: {finding.class_id}: {finding.detail}")
        return 1
    if args.ontology_cmd == "show":
        if args.tree:
            _print_tree(ontology, ontology.root, 0)
        else:
            print(serialize_ontology(ontology), end="")
        return 0
    raise AssertionError(f"unhandled ontology command {args.ontology_cmd}")


def cmd_gen_data(args) -> int:
    injections = [parse_injection(spec) for spec in args.inject]
    out = generate(
        devices=args.devices,
        steps=args.steps,
        seed=args.seed,
        injections=injections,
    )
    write_csv(args.out, out.data)
    truth_path = truth_path_for(args.out)
    write_truth(truth_path, out.truth)
    print(f"wrote {args.out} and {truth_path}")
    return 0


def cmd_serve(args) -> int:
    from .service import create_app, load_config

    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kr", description="knowledge-assisted incident triage"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("classify", help="detect and classify incidents")
    p.add_argument("--data", required=True)
    p.add_argument("--ontology", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("suggest", help="rank stored instances for the data")
    p.add_argument("--data", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--ontology", default=None)
    p.add_argument("--mode", choices=("literal", "similarity"), default="literal")
    p.add_argument("--count", type=int, default=AnalysisParams().suggestion_count)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_suggest)

    p = sub.add_parser("store", help="manage the knowledge store")
    store_sub = p.add_subparsers(dest="store_cmd", required=True)
    q = store_sub.add_parser("add", help="add an instance from a JSON file")
    q.add_argument("file")
    q = store_sub.add_parser("list", help="list stored instances")
    q = store_sub.add_parser("show", help="print one instance document")
    q.add_argument("id")
    q = store_sub.add_parser("rm", help="delete an instance")
    q.add_argument("id")
    for q in store_sub.choices.values():
        q.add_argument("--store", required=True)
        q.add_argument("--ontology", default=None)
    p.set_defaults(fn=cmd_store)

    p = sub.add_parser("ontology", help="inspect the class tree")
    onto_sub = p.add_subparsers(dest="ontology_cmd", required=True)
    q = onto_sub.add_parser("validate", help="check callbacks and routing")
    q = onto_sub.add_parser("show", help="print the ontology")
    q.add_argument("--tree", action="store_true")
    for q in onto_sub.choices.values():
        q.add_argument("--ontology", default=None)
    p.set_defaults(fn=cmd_ontology)

    p = sub.add_parser("gen-data", help="write synthetic telemetry")
    p.add_argument("--devices", type=int, default=4)
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject", action="append", default=[], metavar="KIND@DEV:START[:LEN]")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (DataError, OntologyError, StoreError, InstanceValidationError,
            UnknownInstanceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"error: unknown key {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # config problems surface as exit 2
        from .service import ConfigError

        if isinstance(exc, ConfigError):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
