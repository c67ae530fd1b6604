"""Pre-flight validation: catch unknown targets/ops/fields before any
hardware is touched. Issues are data, not exceptions."""

from __future__ import annotations

from dataclasses import dataclass

from .doc import Parallel, RaiseAlert, Repeat, Select, SequenceDoc, Step, WaitFor


@dataclass
class Issue:
    path: str
    line: int
    kind: str
    message: str


class SimpleCatalog:
    """Known taxons with op signatures and monitored fields.

    ops: {taxon: {op: {arg name: tag}}}; fields: {taxon: set of field names}.
    """

    def __init__(self, ops: dict, fields: dict):
        self._ops = ops
        self._fields = fields

    def has_taxon(self, taxon: str) -> bool:
        return taxon in self._ops

    def op_signature(self, taxon: str, op: str):
        return self._ops.get(taxon, {}).get(op)

    def monitored_fields(self, taxon: str):
        return self._fields.get(taxon, set())


def validate(doc: SequenceDoc, catalog) -> list[Issue]:
    issues: list[Issue] = []
    _walk(doc.body, "", catalog, issues)
    return issues


def _walk(body, prefix, catalog, issues):
    for i, node in enumerate(body):
        path = f"{prefix}{i:03d}"
        if isinstance(node, Step):
            _check_step(node, path, catalog, issues)
        elif isinstance(node, WaitFor):
            if not catalog.has_taxon(node.target):
                issues.append(Issue(path, node.line, "unknown-target", node.target))
            elif node.field not in catalog.monitored_fields(node.target):
                issues.append(Issue(path, node.line, "unmonitored-field",
                                    f"{node.target}.{node.field}"))
        elif isinstance(node, Repeat):
            _walk(node.body, path + "/i0000/", catalog, issues)
        elif isinstance(node, Parallel):
            for b, branch in enumerate(node.branches):
                _walk(branch, f"{path}/b{b:02d}/", catalog, issues)
        elif isinstance(node, Select):
            for label, branch in node.choices.items():
                _walk(branch, f"{path}/c-{label}/", catalog, issues)
        elif isinstance(node, RaiseAlert):
            pass


def _check_step(node: Step, path, catalog, issues):
    if not catalog.has_taxon(node.target):
        issues.append(Issue(path, node.line, "unknown-target", node.target))
        return
    sig = catalog.op_signature(node.target, node.op)
    if sig is None:
        issues.append(Issue(path, node.line, "unknown-op",
                            f"{node.target}.{node.op}"))
        return
    for name, tag in sig.items():
        got = node.args.get(name)
        if got is None:
            issues.append(Issue(path, node.line, "missing-arg",
                                f"{node.op} needs {name} ({tag})"))
        elif got.tag != tag:
            issues.append(Issue(path, node.line, "arg-type",
                                f"{name}: {got.tag} != {tag}"))
    for name in node.args:
        if name not in sig:
            issues.append(Issue(path, node.line, "unknown-arg",
                                f"{node.op} does not take {name!r}"))
