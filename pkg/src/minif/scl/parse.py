"""XML reader/writer for sequence documents.

Parsing is built directly on expat so every complaint carries a line
number. Rendering is canonical (fixed attribute order, two-space indent),
and parse/render are mutual inverses on canonical documents.
"""

from __future__ import annotations

import xml.parsers.expat
from xml.sax.saxutils import escape, quoteattr

from ..errors import MinifError
from ..persist.store import parse_value, render_value
from ..values import BadValue
from .doc import (COMPARATORS, MAX_DEPTH, Parallel, RaiseAlert, Repeat, Select,
                  SequenceDoc, Step, WaitFor)


class XmlSyntax(MinifError):
    pass


class UnknownElement(MinifError):
    pass


class BadAttribute(MinifError):
    pass


class DepthExceeded(MinifError):
    pass


BODY_ELEMENTS = ("step", "repeat", "parallel", "waitfor", "select", "raisealert")


class _Builder:
    """Expat handler building the node tree with line tracking."""

    def __init__(self, parser):
        self.parser = parser
        self.doc: SequenceDoc | None = None
        # stack of (element_name, container_list_or_node, extra)
        self.stack: list = []
        self.depth = 0
        self._text_parts: list[str] = []
        self._pending_arg = None

    @property
    def line(self) -> int:
        return self.parser.CurrentLineNumber

    def _need(self, attrs: dict, name: str) -> str:
        if name not in attrs:
            raise BadAttribute(f"line {self.line}: <{self.stack_top_name()}> "
                               f"missing attribute {name!r}")
        return attrs[name]

    def stack_top_name(self) -> str:
        return self.stack[-1][0] if self.stack else "?"

    def start(self, name: str, attrs: dict):
        line = self.line
        self.depth += 1
        if self.depth > MAX_DEPTH + 2:   # +2: sequence and structural wrappers
            raise DepthExceeded(f"line {line}: deeper than {MAX_DEPTH}")

        if not self.stack:
            if name != "sequence":
                raise UnknownElement(f"line {line}: root must be <sequence>, got <{name}>")
            self.doc = SequenceDoc(name=self._attr(attrs, "name", line, "sequence"),
                                   version=self._attr(attrs, "version", line, "sequence"))
            self.stack.append(("sequence", self.doc.body, None))
            return

        top_name, container, extra = self.stack[-1]

        if name == "arg":
            if top_name != "step":
                raise UnknownElement(f"line {line}: <arg> only belongs in <step>")
            self._pending_arg = (self._attr(attrs, "name", line, "arg"),
                                 self._attr(attrs, "tag", line, "arg"), line)
            self._text_parts = []
            self.stack.append(("arg", None, None))
            return
        if name == "branch":
            if top_name != "parallel":
                raise UnknownElement(f"line {line}: <branch> only belongs in <parallel>")
            body: list = []
            extra.branches.append(body)
            self.stack.append(("branch", body, None))
            return
        if name == "choice":
            if top_name != "select":
                raise UnknownElement(f"line {line}: <choice> only belongs in <select>")
            label = self._attr(attrs, "label", line, "choice")
            if label in extra.choices:
                raise BadAttribute(f"line {line}: duplicate choice label {label!r}")
            body = []
            extra.choices[label] = body
            self.stack.append(("choice", body, None))
            return

        if container is None:
            raise UnknownElement(f"line {line}: <{name}> not allowed inside <{top_name}>")
        if name not in BODY_ELEMENTS:
            raise UnknownElement(f"line {line}: <{name}>")

        if name == "step":
            node = Step(target=self._attr(attrs, "target", line, name),
                        op=self._attr(attrs, "op", line, name), line=line)
            container.append(node)
            self.stack.append(("step", None, node))
        elif name == "repeat":
            count = self._int_attr(attrs, "count", line, name)
            if count < 1:
                raise BadAttribute(f"line {line}: repeat count must be >= 1")
            node = Repeat(count=count, line=line)
            container.append(node)
            self.stack.append(("repeat", node.body, node))
        elif name == "parallel":
            node = Parallel(line=line)
            container.append(node)
            self.stack.append(("parallel", None, node))
        elif name == "waitfor":
            cmp = self._attr(attrs, "cmp", line, name)
            if cmp not in COMPARATORS:
                raise BadAttribute(f"line {line}: cmp must be one of {COMPARATORS}")
            tag = attrs.get("tag", "real")
            try:
                value = parse_value(tag, self._attr(attrs, "value", line, name))
            except (BadValue, ValueError) as e:
                raise BadAttribute(f"line {line}: bad waitfor value: {e}") from None
            node = WaitFor(target=self._attr(attrs, "target", line, name),
                           field=self._attr(attrs, "field", line, name),
                           cmp=cmp, value=value,
                           timeout_ms=self._int_attr(attrs, "timeout_ms", line, name),
                           line=line)
            container.append(node)
            self.stack.append(("waitfor", None, node))
        elif name == "select":
            node = Select(prompt=self._attr(attrs, "prompt", line, name), line=line)
            container.append(node)
            self.stack.append(("select", None, node))
        elif name == "raisealert":
            options = [o for o in self._attr(attrs, "options", line, name).split(",") if o]
            if not options:
                raise BadAttribute(f"line {line}: raisealert needs options")
            node = RaiseAlert(severity=self._attr(attrs, "severity", line, name),
                              text=self._attr(attrs, "text", line, name),
                              options=options, line=line)
            container.append(node)
            self.stack.append(("raisealert", None, node))

    def _attr(self, attrs, name, line, element) -> str:
        if name not in attrs:
            raise BadAttribute(f"line {line}: <{element}> missing attribute {name!r}")
        return attrs[name]

    def _int_attr(self, attrs, name, line, element) -> int:
        raw = self._attr(attrs, name, line, element)
        try:
            return int(raw)
        except ValueError:
            raise BadAttribute(f"line {line}: {name}={raw!r} is not an integer") from None

    def text(self, data: str):
        if self._pending_arg is not None:
            self._text_parts.append(data)

    def end(self, name: str):
        self.depth -= 1
        top_name, container, extra = self.stack.pop()
        if name == "arg":
            arg_name, tag, line = self._pending_arg
            try:
                value = parse_value(tag, "".join(self._text_parts))
            except (BadValue, ValueError) as e:
                raise BadAttribute(f"line {line}: bad arg value: {e}") from None
            step = self.stack[-1][2]
            step.args[arg_name] = value
            self._pending_arg = None
            self._text_parts = []
        elif name == "parallel":
            if len(extra.branches) < 2:
                raise BadAttribute(f"line {extra.line}: parallel needs >= 2 branches")
        elif name == "select":
            if len(extra.choices) < 2:
                raise BadAttribute(f"line {extra.line}: select needs >= 2 choices")


def parse_sequence(text: str) -> SequenceDoc:
    parser = xml.parsers.expat.ParserCreate()
    builder = _Builder(parser)
    parser.StartElementHandler = builder.start
    parser.EndElementHandler = builder.end
    parser.CharacterDataHandler = builder.text
    try:
        parser.Parse(text, True)
    except xml.parsers.expat.ExpatError as e:
        raise XmlSyntax(f"line {e.lineno}: {xml.parsers.expat.errors.messages[e.code]}") from None
    if builder.doc is None:
        raise XmlSyntax("line 1: empty document")
    return builder.doc


def render_sequence(doc: SequenceDoc) -> str:
    """Canonical rendering; parse(render(doc)) == doc and render(parse(x)) == x
    for canonical x."""
    out = [f'<sequence name={quoteattr(doc.name)} version={quoteattr(doc.version)}>']
    _render_body(doc.body, out, 1)
    out.append("</sequence>")
    return "\n".join(out) + "\n"


def _render_body(body, out, depth):
    pad = "  " * depth
    for node in body:
        if isinstance(node, Step):
            head = f'{pad}<step target={quoteattr(node.target)} op={quoteattr(node.op)}'
            if not node.args:
                out.append(head + "/>")
            else:
                out.append(head + ">")
                for name in sorted(node.args):
                    sv = node.args[name]
                    out.append(f'{pad}  <arg name={quoteattr(name)} tag={quoteattr(sv.tag)}>'
                               f'{escape(render_value(sv))}</arg>')
                out.append(f"{pad}</step>")
        elif isinstance(node, Repeat):
            out.append(f'{pad}<repeat count="{node.count}">')
            _render_body(node.body, out, depth + 1)
            out.append(f"{pad}</repeat>")
        elif isinstance(node, Parallel):
            out.append(f"{pad}<parallel>")
            for branch in node.branches:
                out.append(f"{pad}  <branch>")
                _render_body(branch, out, depth + 2)
                out.append(f"{pad}  </branch>")
            out.append(f"{pad}</parallel>")
        elif isinstance(node, WaitFor):
            out.append(f'{pad}<waitfor target={quoteattr(node.target)} '
                       f'field={quoteattr(node.field)} cmp={quoteattr(node.cmp)} '
                       f'value={quoteattr(render_value(node.value))} '
                       f'tag={quoteattr(node.value.tag)} timeout_ms="{node.timeout_ms}"/>')
        elif isinstance(node, Select):
            out.append(f'{pad}<select prompt={quoteattr(node.prompt)}>')
            for label, branch in node.choices.items():
                out.append(f'{pad}  <choice label={quoteattr(label)}>')
                _render_body(branch, out, depth + 2)
                out.append(f"{pad}  </choice>")
            out.append(f"{pad}</select>")
        elif isinstance(node, RaiseAlert):
            out.append(f'{pad}<raisealert severity={quoteattr(node.severity)} '
                       f'text={quoteattr(node.text)} '
                       f'options={quoteattr(",".join(node.options))}/>')
        else:
            raise MinifError(f"unknown node {type(node).__name__}")
