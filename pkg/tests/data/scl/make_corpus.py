"""Regenerates the sequence corpus. Run from the repo root:

    python tests/data/scl/make_corpus.py

Valid documents are written in canonical rendering (so byte round-trip
holds) and target the LocalRig default device set. Malformed documents are
literal text with a manifest of expected error kinds and line numbers.
"""

import json
import pathlib
import sys

sys.path.insert(0, "src")

from minif.scl import (parse_sequence, render_sequence, SequenceDoc, Step,  # noqa: E402
                       Repeat, Parallel, WaitFor, Select, RaiseAlert)
from minif.values import StatusValue, sv_bool, sv_int, sv_real  # noqa: E402

HERE = pathlib.Path(__file__).parent

M1 = "nif.b001.align.m001"
M2 = "nif.b001.align.m002"
PS = "nif.b001.power.ps001"
DG = "nif.b001.diag.dg001"
SN = "nif.b001.diag.sn001"


def step(target, op, /, **args):
    return Step(target=target, op=op,
                args={k: v if isinstance(v, StatusValue) else _wrap(v)
                      for k, v in args.items()})


def _wrap(v):
    if isinstance(v, bool):
        return sv_bool(v)
    if isinstance(v, int):
        return sv_int(v)
    if isinstance(v, float):
        return sv_real(v)
    raise TypeError(v)


def wait(target, field, cmp, value, timeout_ms=60000):
    return WaitFor(target=target, field=field, cmp=cmp, value=_wrap(value),
                   timeout_ms=timeout_ms)


def docs():
    yield SequenceDoc("move-one", "1", [
        step(M1, "move_to", target=10.0),
        wait(M1, "position", "ge", 10.0),
    ])
    yield SequenceDoc("read-only", "1", [
        step(M1, "read_status"), step(PS, "read_status"), step(SN, "read_status"),
    ])
    yield SequenceDoc("repeat-moves", "2", [
        Repeat(count=3, body=[
            step(M1, "move_to", target=20.0),
            wait(M1, "position", "ge", 20.0),
            step(M1, "move_to", target=0.0),
            wait(M1, "position", "le", 0.0),
        ]),
    ])
    yield SequenceDoc("power-ramp", "1", [
        step(PS, "set_voltage", volts=40.0),
        step(PS, "enable"),
        wait(PS, "output_v", "ge", 40.0),
        step(PS, "disable"),
        wait(PS, "output_v", "le", 0.0),
    ])
    yield SequenceDoc("parallel-motion", "1", [
        Parallel(branches=[
            [step(M1, "move_to", target=30.0), wait(M1, "position", "ge", 30.0)],
            [step(M2, "move_to", target=15.0), wait(M2, "position", "ge", 15.0)],
        ]),
        step(DG, "acquire", nsamples=128, dt=1e-6),
    ])
    yield SequenceDoc("alignment-demo", "3", [
        step(PS, "set_voltage", volts=25.0),
        step(PS, "enable"),
        Repeat(count=3, body=[
            step(M1, "move_to", target=12.5),
            wait(M1, "position", "ge", 12.5),
            step(M1, "move_to", target=2.5),
            wait(M1, "position", "le", 2.5),
        ]),
        Select(prompt="pick centroid algorithm", choices={
            "algorithm-a": [step(DG, "acquire", nsamples=64, dt=1e-6)],
            "algorithm-b": [step(DG, "acquire", nsamples=256, dt=1e-6),
                            step(SN, "read_status")],
        }),
        RaiseAlert(severity="info", text="alignment pass complete",
                   options=["continue", "rerun"]),
        step(PS, "disable"),
    ])
    yield SequenceDoc("digitizer-sweep", "1", [
        step(DG, "set_shot", shot_number=1),
        Repeat(count=4, body=[step(DG, "acquire", nsamples=32, dt=2e-6)]),
        wait(DG, "acquisitions", "ge", 4),
    ])
    yield SequenceDoc("gated-start", "1", [
        RaiseAlert(severity="warning", text="confirm shutters closed",
                   options=["confirmed", "abort"]),
        step(M1, "move_to", target=5.0),
        wait(M1, "position", "ge", 5.0),
    ])
    yield SequenceDoc("nested-repeat", "1", [
        Repeat(count=2, body=[
            Repeat(count=2, body=[
                step(M2, "move_to", target=10.0),
                wait(M2, "position", "ge", 10.0),
                step(M2, "move_to", target=0.0),
                wait(M2, "position", "le", 0.0),
            ]),
        ]),
    ])
    yield SequenceDoc("parallel-three-way", "1", [
        Parallel(branches=[
            [step(M1, "move_to", target=8.0), wait(M1, "position", "ge", 8.0)],
            [step(PS, "set_voltage", volts=10.0), step(PS, "enable"),
             wait(PS, "output_v", "ge", 10.0)],
            [step(DG, "acquire", nsamples=16, dt=1e-6)],
        ]),
        step(PS, "disable"),
    ])
    yield SequenceDoc("halt-and-settle", "1", [
        step(M1, "move_to", target=90.0),
        step(M1, "halt"),
        wait(M1, "moving", "eq", False),
    ])
    yield SequenceDoc("select-then-branch", "1", [
        Select(prompt="target bank", choices={
            "near": [step(M1, "move_to", target=10.0),
                     wait(M1, "position", "ge", 10.0)],
            "far": [step(M1, "move_to", target=80.0),
                    wait(M1, "position", "ge", 80.0)],
        }),
    ])
    yield SequenceDoc("sensor-watch", "1", [
        wait(SN, "value", "ge", 0.0, timeout_ms=5000),
        step(SN, "read_status"),
    ])
    yield SequenceDoc("mixed-depth", "1", [
        step(PS, "set_voltage", volts=5.0),
        Repeat(count=2, body=[
            Parallel(branches=[
                [step(M1, "move_to", target=3.0), wait(M1, "position", "ge", 3.0),
                 step(M1, "move_to", target=0.0), wait(M1, "position", "le", 0.0)],
                [step(DG, "acquire", nsamples=8, dt=1e-6)],
            ]),
        ]),
    ])
    yield SequenceDoc("two-alerts", "1", [
        RaiseAlert(severity="info", text="phase one done",
                   options=["continue"]),
        step(M2, "move_to", target=5.0),
        wait(M2, "position", "ge", 5.0),
        RaiseAlert(severity="serious", text="verify target chamber",
                   options=["verified", "recheck"]),
    ])
    yield SequenceDoc("shot-prep-slice", "1", [
        step(DG, "set_shot", shot_number=42),
        step(PS, "set_voltage", volts=60.0),
        step(PS, "enable"),
        wait(PS, "output_v", "ge", 60.0),
        step(DG, "acquire", nsamples=512, dt=5e-7),
        step(PS, "disable"),
    ])
    yield SequenceDoc("bool-wait", "1", [
        step(M1, "move_to", target=6.0),
        wait(M1, "moving", "eq", True, timeout_ms=1000),
        wait(M1, "moving", "eq", False),
    ])
    yield SequenceDoc("int-wait", "1", [
        step(DG, "acquire", nsamples=16, dt=1e-6),
        wait(DG, "acquisitions", "ge", 1, timeout_ms=1000),
    ])
    yield SequenceDoc("parallel-in-select", "1", [
        Select(prompt="scan pattern", choices={
            "cross": [Parallel(branches=[
                [step(M1, "move_to", target=10.0), wait(M1, "position", "ge", 10.0)],
                [step(M2, "move_to", target=10.0), wait(M2, "position", "ge", 10.0)],
            ])],
            "single": [step(M1, "move_to", target=10.0),
                       wait(M1, "position", "ge", 10.0)],
        }),
    ])
    yield SequenceDoc("full-dress", "2", [
        RaiseAlert(severity="info", text="begin rehearsal", options=["go"]),
        step(PS, "set_voltage", volts=15.0),
        step(PS, "enable"),
        Parallel(branches=[
            [step(M1, "move_to", target=25.0), wait(M1, "position", "ge", 25.0)],
            [wait(PS, "output_v", "ge", 15.0)],
        ]),
        Select(prompt="diagnostics depth", choices={
            "quick": [step(DG, "acquire", nsamples=32, dt=1e-6)],
            "deep": [Repeat(count=3, body=[step(DG, "acquire", nsamples=128, dt=1e-6)])],
        }),
        step(PS, "disable"),
        wait(PS, "output_v", "le", 0.0),
    ])


MALFORMED = [
    ("mal01.xml", "XmlSyntax", 4, """<sequence name="broken" version="1">
  <step target="nif.b001.align.m001" op="read_status"/>
  <repeat count="2">
</sequence>
"""),
    ("mal02.xml", "UnknownElement", 2, """<sequence name="loopy" version="1">
  <loop count="3">
  </loop>
</sequence>
"""),
    ("mal03.xml", "BadAttribute", 2, """<sequence name="no-op" version="1">
  <step target="nif.b001.align.m001"/>
</sequence>
"""),
    ("mal04.xml", "BadAttribute", 2, """<sequence name="zero-repeat" version="1">
  <repeat count="0">
    <step target="nif.b001.align.m001" op="read_status"/>
  </repeat>
</sequence>
"""),
    ("mal05.xml", "BadAttribute", 2, """<sequence name="nan-repeat" version="1">
  <repeat count="lots">
    <step target="nif.b001.align.m001" op="read_status"/>
  </repeat>
</sequence>
"""),
    ("mal06.xml", "BadAttribute", 2, """<sequence name="one-branch" version="1">
  <parallel>
    <branch>
      <step target="nif.b001.align.m001" op="read_status"/>
    </branch>
  </parallel>
</sequence>
"""),
    ("mal07.xml", "BadAttribute", 2, """<sequence name="one-choice" version="1">
  <select prompt="pick">
    <choice label="only">
      <step target="nif.b001.align.m001" op="read_status"/>
    </choice>
  </select>
</sequence>
"""),
    ("mal08.xml", "BadAttribute", 2, """<sequence name="bad-cmp" version="1">
  <waitfor target="nif.b001.align.m001" field="position" cmp="gt" value="1.0" tag="real" timeout_ms="100"/>
</sequence>
"""),
    ("mal09.xml", "BadAttribute", 3, """<sequence name="bad-arg" version="1">
  <step target="nif.b001.align.m001" op="move_to">
    <arg name="target" tag="real">not-a-number</arg>
  </step>
</sequence>
"""),
    ("mal10.xml", "UnknownElement", 3, """<sequence name="stray-branch" version="1">
  <repeat count="1">
    <branch>
      <step target="nif.b001.align.m001" op="read_status"/>
    </branch>
  </repeat>
</sequence>
"""),
]


def main():
    valid_dir = HERE / "valid"
    mal_dir = HERE / "malformed"
    valid_dir.mkdir(parents=True, exist_ok=True)
    mal_dir.mkdir(parents=True, exist_ok=True)

    count = 0
    for i, doc in enumerate(docs(), start=1):
        text = render_sequence(doc)
        parsed = parse_sequence(text)
        assert render_sequence(parsed) == text, doc.name
        (valid_dir / f"seq{i:02d}.xml").write_text(text)
        count += 1
    assert count == 20, count

    manifest = []
    for fname, kind, line, text in MALFORMED:
        (mal_dir / fname).write_text(text)
        manifest.append({"file": fname, "kind": kind, "line": line})
    (mal_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {count} valid + {len(manifest)} malformed documents")


if __name__ == "__main__":
    main()
