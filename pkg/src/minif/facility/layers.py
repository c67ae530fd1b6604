"""Layered-architecture lint.

Subsystems live at one of four levels; a subsystem may import its own level
or below, never above, and the inter-subsystem import graph must be acyclic.
Mutual dependencies *inside* a subsystem are expressly legal, which is why
the repo manifest groups mutually-recursive device modules into one node.

derive_manifest() rebuilds the repo's own manifest from the source tree via
AST so the discipline is checked against reality, not against intentions.
"""

from __future__ import annotations

import ast
import json
from pathlib import Path

from ..errors import MinifError

LEVELS = ("framework_templates", "building_blocks", "application_behaviors",
          "main_programs")


class BadManifest(MinifError):
    pass


def lint_layers(manifest: dict) -> list[dict]:
    """Returns violations: {"kind": "upward"|"cycle", ...}. BadManifest on
    structural garbage."""
    subsystems = manifest.get("subsystems")
    if not isinstance(subsystems, list):
        raise BadManifest("manifest needs a 'subsystems' list")
    levels: dict[str, int] = {}
    imports: dict[str, list[str]] = {}
    for entry in subsystems:
        name = entry.get("name")
        level = entry.get("level")
        if not name or level not in LEVELS:
            raise BadManifest(f"bad subsystem entry: {entry!r}")
        if name in levels:
            raise BadManifest(f"duplicate subsystem {name!r}")
        levels[name] = LEVELS.index(level)
        imports[name] = list(entry.get("imports", []))
    for name, deps in imports.items():
        unknown = [d for d in deps if d not in levels]
        if unknown:
            raise BadManifest(f"{name} imports undefined subsystems {unknown}")

    violations: list[dict] = []
    for name, deps in sorted(imports.items()):
        for dep in deps:
            if dep != name and levels[dep] > levels[name]:
                violations.append({"kind": "upward", "from": name, "to": dep,
                                   "from_level": LEVELS[levels[name]],
                                   "to_level": LEVELS[levels[dep]]})
    for scc in _tarjan(imports):
        if len(scc) > 1 or scc[0] in imports.get(scc[0], []):
            violations.append({"kind": "cycle", "members": sorted(scc)})
    return violations


def _tarjan(graph: dict[str, list[str]]) -> list[list[str]]:
    """Strongly connected components, iteratively (no recursion limit)."""
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = [0]

    for root in graph:
        if root in index:
            continue
        work = [(root, iter(graph.get(root, [])))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in graph:
                    continue
                if child not in index:
                    index[child] = lowlink[child] = counter[0]
                    counter[0] += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(graph.get(child, []))))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.append(w)
                    if w == node:
                        break
                sccs.append(scc)
    return sccs


# -- repo self-application ------------------------------------------------------

TEMPLATE_MODULES = {"minif", "minif.errors", "minif.clock", "minif.values",
                    "minif.wirebus.errors", "minif.wirebus.frame",
                    "minif.config.taxon"}
# mutually-recursive device modules form one subsystem
DEVICE_GROUP = "minif.devices"


def level_of(module: str) -> str:
    if module in TEMPLATE_MODULES:
        return "framework_templates"
    if module.startswith(("minif.shotseq", "minif.scl", "minif.sysmgr")):
        return "application_behaviors"
    if module.startswith("minif.facility") or module == "minif.__main__":
        return "main_programs"
    return "building_blocks"


def _module_name(py_file: Path, src_root: Path) -> str:
    rel = py_file.relative_to(src_root).with_suffix("")
    parts = list(rel.parts)
    if parts[-1] == "__init__":
        parts = parts[:-1]
    return ".".join(parts)


def _subsystem_of(module: str) -> str:
    if module.startswith(DEVICE_GROUP):
        return DEVICE_GROUP
    return module


def _imports_of(py_file: Path, module: str) -> set[str]:
    tree = ast.parse(py_file.read_text())
    package_parts = module.split(".")
    if py_file.name != "__init__.py":
        package_parts = package_parts[:-1]
    found: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                if alias.name.startswith("minif"):
                    found.add(alias.name)
        elif isinstance(node, ast.ImportFrom):
            if node.level == 0:
                if node.module and node.module.startswith("minif"):
                    found.add(node.module)
                continue
            base = package_parts[:len(package_parts) - node.level + 1]
            target = ".".join(base + ([node.module] if node.module else []))
            if target.startswith("minif"):
                found.add(target)
    return found


def derive_manifest(src_root: str | Path) -> dict:
    """Build the repo manifest from the source tree."""
    src_root = Path(src_root)
    modules: dict[str, Path] = {}
    for py_file in sorted(src_root.rglob("*.py")):
        module = _module_name(py_file, src_root)
        if module.startswith("minif"):
            modules[module] = py_file

    subsystems: dict[str, dict] = {}
    for module, py_file in modules.items():
        name = _subsystem_of(module)
        entry = subsystems.setdefault(name, {"name": name, "level": level_of(name),
                                             "imports": set()})
        for imported in _imports_of(py_file, module):
            # an import of a missing module is a packaging bug; surface it
            if imported not in modules:
                raise BadManifest(f"{module} imports unknown module {imported}")
            target = _subsystem_of(imported)
            if target != name:
                entry["imports"].add(target)
    return {"subsystems": [
        {"name": s["name"], "level": s["level"], "imports": sorted(s["imports"])}
        for s in sorted(subsystems.values(), key=lambda s: s["name"])]}


def load_manifest(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise BadManifest(str(e)) from None
