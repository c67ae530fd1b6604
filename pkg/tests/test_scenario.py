"""The shipped demo scenario end to end: spawn, align, fire, kill, recover."""

import json
import pathlib

import pytest

from minif.facility.scenario import ScenarioRunner, ScriptError
from tests.procrig import make_fixture

SCENARIOS = pathlib.Path(__file__).parents[1] / "scenarios"


@pytest.mark.slow
def test_demo_scenario_all_expects_pass(tmp_path):
    config = make_fixture(tmp_path, beams=2, devices_per_beam=30,
                          feps_per_beam=1.0, seed=2)
    script = json.loads((SCENARIOS / "demo.json").read_text())
    runner = ScenarioRunner(config, script, base_dir=SCENARIOS)
    code = runner.run()
    for step in runner.report:
        assert step["ok"], f"step {step['step']} {step['directive']} failed: " \
                           f"{step['detail']}"
    assert code == 0


def test_script_errors():
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        config = make_fixture(pathlib.Path(tmp), beams=1, devices_per_beam=8)
        runner = ScenarioRunner(config, {"directives": "nope"})
        with pytest.raises(ScriptError):
            runner.run()
        runner2 = ScenarioRunner(config, {"directives": [{"fly": {}, "jump": {}}]})
        with pytest.raises(ScriptError):
            runner2.run()


def test_expect_failure_is_recorded_and_run_continues(tmp_path):
    """A failed expect yields exit code 1 but later steps still run."""
    config = make_fixture(tmp_path, beams=1, devices_per_beam=8)
    script = {"directives": [
        {"expect": {"check": "resolve_ok", "name": "nif.no.such", "timeout_ms": 1}},
        {"sleep": {"ms": 10}},
    ]}
    runner = ScenarioRunner(config, script)
    code = runner.run()
    assert code == 1
    assert [s["ok"] for s in runner.report] == [False, True]
