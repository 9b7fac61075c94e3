"""End-to-end tests of the sub-commands through ``main``."""

import json
import math
from pathlib import Path
from typing import Any

import pytest

from cqdyn.core.config import settings
from cqdyn.main import main
from cqdyn.models.state import StateEnvelope
from tests.conftest import ScenarioWriter


def _read(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def test_simulate_writes_outputs(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                                 tmp_path: Path) -> None:
    """Test trajectory.csv, summary.json and the checkpoints of a toy run.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    out = tmp_path / "out"

    assert main(["simulate", "--config", str(write_scenario(short_toy_scenario))]) == 0

    header, *rows = (out / "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert header == "t,trace_dev,min_eig,J_x,J_y,J_z"
    assert len(rows) == 101
    summary = _read(out / "summary.json")
    assert summary["steps"] == 100
    assert summary["snapshots"] == 3
    assert summary["observables"]["J_z"] == pytest.approx(1.5 * math.exp(-0.5), abs=1e-9)
    assert sorted(p.name for p in (out / "checkpoints").iterdir()) == ["state_0.json", "state_1.json",
                                                                      "state_2.json"]
    final = StateEnvelope.model_validate_json((out / "checkpoints" / "state_2.json").read_text(encoding="utf-8"))
    assert final.t == pytest.approx(1.0)


def test_simulate_runs_listed_analyses(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                                       tmp_path: Path) -> None:
    """Test that analyses named in the scenario are written after the run.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    scenario = {**short_toy_scenario, "analyses": ["spectrum", "dd_check"]}

    assert main(["simulate", "--config", str(write_scenario(scenario))]) == 0

    assert (tmp_path / "out" / "spectrum.json").is_file()
    assert _read(tmp_path / "out" / "dd_check.json")["verdict"] == "PASS"
    assert not (tmp_path / "out" / "audit.json").exists()


def test_spectrum_command(write_scenario: ScenarioWriter, tmp_path: Path) -> None:
    """Test spectrum.json of the depolarizing channel.

    Args:
        write_scenario: Scenario writer fixture
        tmp_path: Pytest temporary directory
    """
    path = write_scenario({"model": {"kind": "builtin", "name": "depolarizing", "options": {"gamma": 0.25}}})

    assert main(["spectrum", "--config", str(path)]) == 0

    document = _read(tmp_path / "out" / "spectrum.json")
    assert document["zero_multiplicity"] == 1
    assert document["classes"] == ["stationary"] + ["decaying_real"] * 3
    assert document["eigenvalues"][1][0] == pytest.approx(-1.0)


def test_audit_command(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                       tmp_path: Path) -> None:
    """Test that the toy audit reports a symmetry without conservation.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    assert main(["audit", "--config", str(write_scenario(short_toy_scenario))]) == 0

    audit = _read(tmp_path / "out" / "audit.json")
    consistency = _read(tmp_path / "out" / "consistency.json")
    assert audit["symmetric"] is True
    assert audit["conserved"] is False
    assert audit["transformations_tested"] == 10
    statuses = {entry["requirement"]: entry["status"] for entry in consistency["entries"]}
    assert statuses["V(a)"] == "VIOLATED"
    assert statuses["I"] == "PASS"


@pytest.mark.parametrize(("name", "verdict"), [("toy", "PASS"), ("dd_violator", "FAIL")])
def test_check_dd_command(write_scenario: ScenarioWriter, tmp_path: Path, name: str, verdict: str) -> None:
    """Test that both verdicts are written as data with exit code 0.

    Args:
        write_scenario: Scenario writer fixture
        tmp_path: Pytest temporary directory
        name: Registry name
        verdict: Expected verdict
    """
    path = write_scenario({"model": {"kind": "builtin", "name": name}})

    assert main(["check-dd", "--config", str(path)]) == 0

    assert _read(tmp_path / "out" / "dd_check.json")["verdict"] == verdict


def test_toy_command_is_deterministic(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                                      tmp_path: Path) -> None:
    """Test the full toy reproduction and byte-identical reruns.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    path = write_scenario(short_toy_scenario)
    first = tmp_path / "first"
    second = tmp_path / "second"

    assert main(["toy", "--config", str(path), "--out", str(first)]) == 0
    assert main(["toy", "--config", str(path), "--out", str(second)]) == 0

    verdict = _read(first / "verdict.json")
    assert verdict["eom_rotationally_invariant"] is True
    assert verdict["J_conserved"] is False
    assert verdict["max_deviation_grid"] <= 1e-6
    names = ["trajectory.csv", "summary.json", "verdict.json", "audit.json", "consistency.json",
             "spectrum.json", "dd_check.json"]
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_delta_initial_state(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                             tmp_path: Path) -> None:
    """Test a delta initial state placed on the toy support.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    plus = [[[0.5, 0.0], [0.5, 0.0]], [[0.5, 0.0], [0.5, 0.0]]]
    scenario = {
        **short_toy_scenario,
        "initial_state": {"kind": "delta", "point": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0], "rho": plus},
    }

    assert main(["simulate", "--config", str(write_scenario(scenario))]) == 0

    observables = _read(tmp_path / "out" / "summary.json")["observables"]
    assert observables["J_x"] == pytest.approx(0.5 * math.exp(-0.5), abs=1e-9)
    assert observables["J_z"] == pytest.approx(math.exp(-0.5), abs=1e-9)


def test_checkpoint_as_initial_state(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                                     tmp_path: Path) -> None:
    """Test resuming from a written checkpoint.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    assert main(["simulate", "--config", str(write_scenario(short_toy_scenario))]) == 0
    checkpoint = tmp_path / "out" / "checkpoints" / "state_2.json"
    resumed = {
        **short_toy_scenario,
        "output_dir": str(tmp_path / "resumed"),
        "initial_state": {"kind": "file", "path": str(checkpoint)},
    }

    assert main(["simulate", "--config", str(write_scenario(resumed))]) == 0

    observables = _read(tmp_path / "resumed" / "summary.json")["observables"]
    assert observables["J_z"] == pytest.approx(1.5 * math.exp(-1.0), abs=1e-9)


def test_delta_off_the_support(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                               caplog: pytest.LogCaptureFixture) -> None:
    """Test that a delta away from the two atoms is a configuration error.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        caplog: Pytest log capture fixture
    """
    ground = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
    scenario = {**short_toy_scenario, "initial_state": {"kind": "delta", "point": [5.0] * 6, "rho": ground}}

    assert main(["simulate", "--config", str(write_scenario(scenario))]) == 3
    assert "initial_state.point" in caplog.text


def test_capacity_exit_code(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                            monkeypatch: pytest.MonkeyPatch) -> None:
    """Test exit code 4 when the dense Liouvillian exceeds the cap.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        monkeypatch: Pytest monkeypatch fixture
    """
    monkeypatch.setattr(settings, "max_liouvillian_dim", 4)

    assert main(["spectrum", "--config", str(write_scenario(short_toy_scenario))]) == 4


def test_monitor_abort_exit_code(write_scenario: ScenarioWriter, short_toy_scenario: dict[str, Any],
                                 tmp_path: Path) -> None:
    """Test exit code 2 when an injected fault trips the trace monitor.

    Args:
        write_scenario: Scenario writer fixture
        short_toy_scenario: Short toy scenario fixture
        tmp_path: Pytest temporary directory
    """
    scenario = {**short_toy_scenario,
                "integration": {"t_final": 1.0, "dt": 0.01, "inject_fault_at": 0.5}}

    assert main(["simulate", "--config", str(write_scenario(scenario))]) == 2
    assert not (tmp_path / "out" / "summary.json").exists()


def test_invalid_scenario_exit_code(write_scenario: ScenarioWriter, caplog: pytest.LogCaptureFixture) -> None:
    """Test exit code 3 with the offending key in the log.

    Args:
        write_scenario: Scenario writer fixture
        caplog: Pytest log capture fixture
    """
    path = write_scenario({"integration": {"t_final": 1.0, "dt": 0.0}})

    assert main(["simulate", "--config", str(path)]) == 3
    assert "integration.dt" in caplog.text


def test_toy_command_needs_the_toy_model(write_scenario: ScenarioWriter) -> None:
    """Test that the toy command rejects other models.

    Args:
        write_scenario: Scenario writer fixture
    """
    path = write_scenario({"model": {"kind": "builtin", "name": "zero"}})

    assert main(["toy", "--config", str(path)]) == 3
