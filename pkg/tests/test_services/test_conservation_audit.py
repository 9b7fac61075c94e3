"""Tests for symmetry checks, Noether audits and the consistency checklist."""

import numpy as np
import pytest

from cqdyn.core.exceptions import UnsupportedSymmetryError
from cqdyn.services.builtin_models import BuiltinModel, build_model
from cqdyn.services.conservation_audit import (
    conservation_check,
    consistency_suite,
    conserved_observable_search,
    noether_audit,
    pairing_norm,
    random_atomic_states,
    symmetry_check,
)
from cqdyn.services.hybrid_state import HybridObservable, check_normalization
from cqdyn.services.operator_algebra import PAULI_X, PAULI_Z


def test_toy_is_symmetric_but_not_conserving(toy_model: BuiltinModel) -> None:
    """Test the toy verdict: symmetric equation of motion, J_z not conserved.

    Args:
        toy_model: Toy model fixture
    """
    assert toy_model.charge is not None
    report = noether_audit(toy_model.audit_subject(), toy_model.charge, toy_model.transformations(30, seed=1))

    assert report.symmetric
    assert not report.conserved
    assert report.symmetry_residual <= 1e-11
    assert report.conservation_residual == pytest.approx(0.5, abs=1e-9)
    assert report.dadt_consistent
    assert report.transformations_tested == 30
    assert len(report.dJdt_samples) == 11
    assert report.dJdt_samples[0] == pytest.approx(-0.75, abs=1e-10)


def test_toy_consistency_checklist(toy_model: BuiltinModel) -> None:
    """Test I-IV pass, V(a) violated and VI following the analytic purity.

    Args:
        toy_model: Toy model fixture
    """
    report = consistency_suite(toy_model.audit_subject(), horizon=2.0)

    assert [e.requirement for e in report.entries] == ["I", "II", "III", "IV", "V(a)", "VI"]
    for requirement in ("I", "II", "III", "IV", "VI"):
        assert report.entry(requirement).status == "PASS", requirement
    assert report.entry("V(a)").status == "VIOLATED"
    assert report.entry("V(a)").residual == pytest.approx(0.5, abs=1e-9)
    assert report.model == "toy"


def test_closed_qubit_conserves_its_charge() -> None:
    """Test that sigma_z is conserved under H = omega sigma_z with U(1) phases."""
    model = build_model("closed_qubit")
    assert model.charge is not None
    report = noether_audit(model.audit_subject(), model.charge, model.transformations(5, seed=0))

    assert report.symmetric
    assert report.conserved
    assert max(abs(s) for s in report.dJdt_samples) <= 1e-12


def test_closed_qubit_purity_is_flagged() -> None:
    """Test that constant purity is reported as a flag, with no charge being data."""
    model = build_model("closed_qubit")
    report = consistency_suite(model.audit_subject(), horizon=1.0, samples=5)

    assert report.entry("VI").status == "FLAG"
    assert report.entry("V(a)").status == "PASS"


def test_rotations_are_unsupported_on_uniform_grids() -> None:
    """Test that a spec on a uniform grid cannot be checked under rotations."""
    model = build_model("drift_diffusion")

    with pytest.raises(UnsupportedSymmetryError):
        symmetry_check(model.spec, np.eye(3), np.eye(2), [model.initial_state])


def test_conservation_check() -> None:
    """Test residuals 0 for sigma_z and 2 for sigma_x under H = sigma_z."""
    spec = build_model("closed_qubit").spec

    assert conservation_check(spec, HybridObservable.product("z", PAULI_Z)) == pytest.approx(0.0, abs=1e-15)
    assert conservation_check(spec, HybridObservable.product("x", PAULI_X)) == pytest.approx(2.0)
    assert conservation_check(spec, np.zeros((1, 2, 2))) == 0.0
    assert pairing_norm(spec.support, PAULI_Z[None]) == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize(("name", "count"), [("closed_qubit", 2), ("zero", 4), ("toy", 1)])
def test_conserved_observable_search(name: str, count: int) -> None:
    """Test the dimension of the kernel of L^dagger.

    Args:
        name: Registry name
        count: Expected number of conserved fields
    """
    fields = conserved_observable_search(build_model(name).spec)

    assert len(fields) == count
    for field in fields:
        np.testing.assert_allclose(field, np.conj(np.swapaxes(field, 1, 2)), atol=1e-12)


def test_toy_conserves_only_probability() -> None:
    """Test that the single conserved field of the toy model is the identity everywhere."""
    (field,) = conserved_observable_search(build_model("toy").spec)
    reference = field[0, 0, 0]

    assert abs(reference) > 0
    np.testing.assert_allclose(field / reference, np.stack([np.eye(2)] * 2), atol=1e-10)


def test_random_atomic_states(rng: np.random.Generator) -> None:
    """Test count, layout and normalization of random point-mass states.

    Args:
        rng: Seeded generator fixture
    """
    states = random_atomic_states(4, 3, 2, rng, atoms=5)

    assert len(states) == 4
    for state in states:
        assert state.points.shape == (5, 6)
        assert check_normalization(state) < 1e-12
