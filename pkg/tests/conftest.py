"""Shared test fixtures and configuration."""

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from cqdyn.core.logging import setup_logging
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.builtin_models import BuiltinModel, build_model
from cqdyn.services.operator_algebra import OperatorBasis, make_su_basis

type ScenarioWriter = Callable[[dict[str, Any]], Path]


@pytest.fixture(autouse=True, scope="session")
def configure_logging() -> None:
    """Route structlog through the standard library for the whole session."""
    setup_logging()


@pytest.fixture(name="rng")
def rng_fixture() -> np.random.Generator:
    """Seeded generator, fresh for each test."""
    return np.random.default_rng(20240917)


@pytest.fixture(name="qubit_basis")
def qubit_basis_fixture() -> OperatorBasis:
    """The basis (I, sigma_x, sigma_y, sigma_z)."""
    return make_su_basis(2)


@pytest.fixture(name="toy_params")
def toy_params_fixture() -> ToyModelParams:
    """Default toy parameters: kappa = 0.5, q0 = x, p0 = y, rho_i = |0><0|.

    Returns:
        ToyModelParams instance
    """
    return ToyModelParams()


@pytest.fixture(name="toy_model")
def toy_model_fixture(toy_params: ToyModelParams) -> BuiltinModel:
    """The toy model on its two-atom discretization.

    Args:
        toy_params: Toy parameters fixture

    Returns:
        BuiltinModel instance
    """
    return build_model("toy", params=toy_params)


@pytest.fixture(name="write_scenario")
def write_scenario_fixture(tmp_path: Path) -> ScenarioWriter:
    """Factory writing a scenario document to ``tmp_path/scenario.json``.

    Args:
        tmp_path: Pytest temporary directory

    Returns:
        Function taking the scenario as a dict and returning its path
    """

    def write(document: dict[str, Any]) -> Path:
        document = {"output_dir": str(tmp_path / "out"), **document}
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write


@pytest.fixture(name="short_toy_scenario")
def short_toy_scenario_fixture() -> dict[str, Any]:
    """Toy scenario integrated to t = 1 with dt = 0.01.

    Returns:
        Scenario document
    """
    return {
        "model": {"kind": "toy", "params": {"kappa": 0.5}},
        "integration": {"t_final": 1.0, "dt": 0.01, "snapshot_every": 50},
        "rotations": 10,
        "horizon": 1.0,
    }
