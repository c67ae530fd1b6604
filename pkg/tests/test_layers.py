"""Layer lint: synthetic violation injection and repo self-application."""

import json
import pathlib
import random

import pytest

from minif.facility.layers import (BadManifest, LEVELS, derive_manifest,
                                   lint_layers, load_manifest)

SRC = pathlib.Path(__file__).parents[1] / "src"
FROZEN = SRC / "minif" / "facility" / "layer_manifest.json"


def synthetic_manifest(rng: random.Random, nodes: int = 30) -> dict:
    """A legal layered manifest: downward or same-level imports only."""
    subsystems = []
    for i in range(nodes):
        level_idx = rng.randrange(len(LEVELS))
        subsystems.append({"name": f"s{i:02d}", "level": LEVELS[level_idx],
                           "imports": [], "_idx": level_idx})
    by_name = {s["name"]: s for s in subsystems}
    for s in subsystems:
        candidates = [t["name"] for t in subsystems
                      if t["name"] != s["name"] and t["_idx"] <= s["_idx"]]
        rng.shuffle(candidates)
        for target in candidates[:rng.randrange(0, 4)]:
            # same-level edges may not close a cycle in a legal manifest
            if by_name[target]["_idx"] == s["_idx"] and _reaches(by_name, target, s["name"]):
                continue
            s["imports"].append(target)
    for s in subsystems:
        del s["_idx"]
    return {"subsystems": subsystems}


def _reaches(by_name, start, goal):
    seen, stack = set(), [start]
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(by_name[node]["imports"])
    return False


def test_simple_cycle_is_one_violation():
    manifest = {"subsystems": [
        {"name": "a", "level": "building_blocks", "imports": ["b"]},
        {"name": "b", "level": "building_blocks", "imports": ["a"]},
    ]}
    violations = lint_layers(manifest)
    assert len(violations) == 1
    assert violations[0]["kind"] == "cycle"
    assert violations[0]["members"] == ["a", "b"]


def test_upward_import_flagged():
    manifest = {"subsystems": [
        {"name": "blocks", "level": "building_blocks", "imports": ["app"]},
        {"name": "app", "level": "application_behaviors", "imports": []},
    ]}
    violations = lint_layers(manifest)
    assert violations == [{"kind": "upward", "from": "blocks", "to": "app",
                           "from_level": "building_blocks",
                           "to_level": "application_behaviors"}]


def test_same_level_import_is_legal():
    manifest = {"subsystems": [
        {"name": "a", "level": "building_blocks", "imports": ["b"]},
        {"name": "b", "level": "building_blocks", "imports": []},
    ]}
    assert lint_layers(manifest) == []


def test_bad_manifest():
    with pytest.raises(BadManifest):
        lint_layers({"subsystems": [{"name": "a", "level": "penthouse"}]})
    with pytest.raises(BadManifest):
        lint_layers({"subsystems": [{"name": "a", "level": "building_blocks",
                                     "imports": ["ghost"]}]})
    with pytest.raises(BadManifest):
        lint_layers({})


def test_injected_cycles_all_detected_no_false_positives():
    rng = random.Random(31)
    for trial in range(10):
        manifest = synthetic_manifest(rng)
        assert lint_layers(manifest) == []          # clean before injection
        subsystems = manifest["subsystems"]
        # inject one cycle among same-level nodes
        level = rng.choice(LEVELS)
        peers = [s for s in subsystems if s["level"] == level]
        while len(peers) < 3:
            extra = {"name": f"x{len(subsystems):02d}", "level": level, "imports": []}
            subsystems.append(extra)
            peers.append(extra)
        ring = rng.sample(peers, 3)
        for a, b in zip(ring, ring[1:] + ring[:1]):
            if b["name"] not in a["imports"]:
                a["imports"].append(b["name"])
        violations = lint_layers(manifest)
        cycles = [v for v in violations if v["kind"] == "cycle"]
        assert len(cycles) == 1, (trial, violations)
        assert set(s["name"] for s in ring) <= set(cycles[0]["members"])
        assert not [v for v in violations if v["kind"] == "upward"]


def test_injected_upward_imports_all_detected():
    rng = random.Random(77)
    for trial in range(10):
        manifest = synthetic_manifest(rng)
        subsystems = manifest["subsystems"]
        lower = [s for s in subsystems if s["level"] == LEVELS[0]]
        higher = [s for s in subsystems if s["level"] == LEVELS[-1]]
        if not lower or not higher:
            lower = [{"name": "low", "level": LEVELS[0], "imports": []}]
            higher = [{"name": "high", "level": LEVELS[-1], "imports": []}]
            subsystems.extend(lower + higher)
        culprit, target = rng.choice(lower), rng.choice(higher)
        culprit["imports"].append(target["name"])
        violations = lint_layers(manifest)
        upward = [v for v in violations if v["kind"] == "upward"]
        assert upward == [{"kind": "upward", "from": culprit["name"],
                           "to": target["name"], "from_level": LEVELS[0],
                           "to_level": LEVELS[-1]}], trial


def test_repo_manifest_is_clean_and_frozen_copy_matches():
    derived = derive_manifest(SRC)
    assert lint_layers(derived) == []
    frozen = load_manifest(FROZEN)
    assert frozen == derived, "layer_manifest.json is stale; regenerate with " \
                              "`python -m minif lint-layers --self --write " \
                              "src/minif/facility/layer_manifest.json`"


def test_actual_imports_respect_levels():
    """Every actual import edge in the tree is downward or same-level."""
    manifest = derive_manifest(SRC)
    level_idx = {s["name"]: LEVELS.index(s["level"]) for s in manifest["subsystems"]}
    for s in manifest["subsystems"]:
        for target in s["imports"]:
            assert level_idx[target] <= level_idx[s["name"]], \
                f"{s['name']} imports upward to {target}"
