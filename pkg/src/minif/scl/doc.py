"""Sequence document model: an ordered tree of six node kinds."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..values import StatusValue

MAX_DEPTH = 32
COMPARATORS = ("eq", "ge", "le")


@dataclass
class Step:
    target: str
    op: str
    args: dict[str, StatusValue] = field(default_factory=dict)
    line: int = 0


@dataclass
class Repeat:
    count: int
    body: list = field(default_factory=list)
    line: int = 0


@dataclass
class Parallel:
    branches: list = field(default_factory=list)    # list of bodies
    line: int = 0


@dataclass
class WaitFor:
    target: str
    field: str
    cmp: str                                        # eq | ge | le
    value: StatusValue
    timeout_ms: int
    line: int = 0


@dataclass
class Select:
    prompt: str
    choices: dict = field(default_factory=dict)     # label -> body (ordered)
    line: int = 0


@dataclass
class RaiseAlert:
    severity: str
    text: str
    options: list = field(default_factory=list)
    line: int = 0


@dataclass
class SequenceDoc:
    name: str
    version: str
    body: list = field(default_factory=list)

    def walk(self):
        """Yield (node, depth) over the whole tree."""
        stack = [(n, 1) for n in reversed(self.body)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            children = []
            if isinstance(node, Repeat):
                children = [node.body]
            elif isinstance(node, Parallel):
                children = node.branches
            elif isinstance(node, Select):
                children = list(node.choices.values())
            for body in reversed(children):
                stack.extend((n, depth + 1) for n in reversed(body))
