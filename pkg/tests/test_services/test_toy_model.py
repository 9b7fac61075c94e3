"""Tests for the qubit-plus-particle model and its nonconservation of angular momentum."""

import math

import numpy as np
import pytest

from cqdyn.core.exceptions import DomainError
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.evolution import evolve_atomic_toy
from cqdyn.services.hybrid_state import HybridStateAtomic, atomic_difference, expectation, purity, reduce_quantum
from cqdyn.services.operator_algebra import haar_rotations
from cqdyn.services.phase_space import AtomicSupport
from cqdyn.services.toy_model import (
    angular_momentum_observable,
    metastable_pair_spec,
    nonconservation_demo,
    place_on_support,
    toy_analytic_state,
    toy_angular_momentum,
    toy_backreaction,
    toy_generator,
    toy_purity,
    toy_spin_expectation,
)


def test_analytic_angular_momentum_matches_exact_evolution(toy_params: ToyModelParams) -> None:
    """Test J_z = 1.5 e^{-kappa t} against the evolved point masses on 1000 times in [0, 10].

    Args:
        toy_params: Toy parameters fixture
    """
    j_z = angular_momentum_observable("z")

    for t in np.linspace(0.0, 10.0, 1000):
        record = toy_angular_momentum(toy_params, float(t))
        evolved = expectation(j_z, toy_analytic_state(toy_params, float(t)))
        assert record.J_total[2] == pytest.approx(1.5 * math.exp(-0.5 * t), abs=1e-12)
        assert abs(record.J_total[0]) <= 1e-12
        assert abs(record.J_total[1]) <= 1e-12
        assert abs(evolved - record.J_total[2]) <= 1e-12


def test_angular_momentum_record(toy_params: ToyModelParams) -> None:
    """Test the orbital and spin split at t = 0.

    Args:
        toy_params: Toy parameters fixture
    """
    record = toy_angular_momentum(toy_params, 0.0)

    assert record.L_orbital == (0.0, 0.0, 1.0)
    assert record.S_spin == (0.0, 0.0, 0.5)
    assert record.J_total == (0.0, 0.0, 1.5)


def test_spin_expectation_and_axes(toy_params: ToyModelParams) -> None:
    """Test <S_a> = (hbar/2) e^{-kappa t} Tr[sigma_a rho_i] and axis lookup.

    Args:
        toy_params: Toy parameters fixture
    """
    assert toy_spin_expectation(toy_params, 2.0, "z") == pytest.approx(0.5 * math.exp(-1.0))
    assert toy_spin_expectation(toy_params, 2.0, 2) == toy_spin_expectation(toy_params, 2.0, "z")
    assert toy_spin_expectation(toy_params, 2.0, "x") == 0.0
    with pytest.raises(DomainError):
        toy_spin_expectation(toy_params, 1.0, "w")
    with pytest.raises(DomainError):
        toy_spin_expectation(toy_params, -1.0, "z")


def test_purity_curve(toy_params: ToyModelParams) -> None:
    """Test (1 + e^{-2 kappa t})/2 against the purity of the evolved state.

    Args:
        toy_params: Toy parameters fixture
    """
    for t in (0.0, 0.5, 3.0, 20.0):
        expected = 0.5 * (1.0 + math.exp(-2 * 0.5 * t))
        assert toy_purity(toy_params, t) == pytest.approx(expected, abs=1e-14)
        assert purity(toy_analytic_state(toy_params, t)) == pytest.approx(expected, abs=1e-12)


def test_asymptotic_state(toy_params: ToyModelParams) -> None:
    """Test that all mass ends at the final point as I/2.

    Args:
        toy_params: Toy parameters fixture
    """
    state = toy_analytic_state(toy_params, math.inf)
    expected = HybridStateAtomic.single(np.zeros(6), 0.5 * np.eye(2))

    assert atomic_difference(state.merged(), expected) <= 1e-12
    with pytest.raises(DomainError):
        toy_analytic_state(toy_params, -0.1)


def test_rotated_parameters_rotate_angular_momentum(toy_params: ToyModelParams) -> None:
    """Test J(R z0, U rho_i U^dagger) = R J(z0, rho_i).

    Args:
        toy_params: Toy parameters fixture
    """
    before = np.array(toy_angular_momentum(toy_params, 1.3).J_total)

    for r, u in haar_rotations(10, seed=4):
        after = np.array(toy_angular_momentum(toy_params.rotated(r, u), 1.3).J_total)
        np.testing.assert_allclose(after, r @ before, atol=1e-12)


def test_channel_sum_collapses_to_trace(toy_params: ToyModelParams, rng: np.random.Generator) -> None:
    """Test that the explicit four-channel gain equals (kappa/2) Tr[rho] I.

    Args:
        toy_params: Toy parameters fixture
        rng: Seeded generator fixture
    """
    generator = toy_generator(toy_params)
    blocks = rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))
    state = HybridStateAtomic(points=rng.normal(size=(3, 6)), blocks=blocks)

    assert atomic_difference(generator.apply_atomic(state), generator.apply_collapsed(state)) <= 1e-12


def test_nonconservation_demo(toy_params: ToyModelParams) -> None:
    """Test: rotationally invariant equation of motion, J not conserved, residual kappa.

    Args:
        toy_params: Toy parameters fixture
    """
    report = nonconservation_demo(toy_params, np.linspace(0.0, 10.0, 101), grid_check=False, rotations=30)

    assert report.eom_rotationally_invariant
    assert not report.J_conserved
    assert report.symmetry_residual <= 1e-11
    assert report.conservation_residual == pytest.approx(0.5, abs=1e-9)
    assert report.max_deviation_atomic <= 1e-12
    assert report.max_deviation_grid is None
    assert report.max_drift == pytest.approx(1.5 * (1 - math.exp(-5.0)), rel=1e-9)


def test_nonconservation_demo_rejects_empty_grid(toy_params: ToyModelParams) -> None:
    """Test the empty time grid.

    Args:
        toy_params: Toy parameters fixture
    """
    with pytest.raises(DomainError):
        nonconservation_demo(toy_params, [], grid_check=False)


@pytest.mark.slow
def test_nonconservation_demo_fixed_step(toy_params: ToyModelParams) -> None:
    """Test RK4 at dt = 1e-3 up to t = 10 against the analytic J.

    Args:
        toy_params: Toy parameters fixture
    """
    report = nonconservation_demo(toy_params, np.linspace(0.0, 10.0, 11), dt=1e-3, rotations=5)

    assert report.max_deviation_grid is not None
    assert report.max_deviation_grid <= 1e-6


def test_backreaction_along_the_analytic_state(toy_params: ToyModelParams) -> None:
    """Test d0 = 3 kappa/4 at every time and d1 decaying with the initial mass.

    Args:
        toy_params: Toy parameters fixture
    """
    for t in (0.0, 1.0, 4.0):
        summary = toy_backreaction(toy_params, t)
        assert summary.d0 == pytest.approx(0.375)
        np.testing.assert_allclose(summary.d1, -0.375 * math.exp(-0.5 * t) * toy_params.z0, atol=1e-12)


def test_place_on_support(toy_params: ToyModelParams) -> None:
    """Test placement of atoms onto the two-atom support and rejection of strays.

    Args:
        toy_params: Toy parameters fixture
    """
    support = toy_generator(toy_params).discretization()
    placed = place_on_support(toy_analytic_state(toy_params, 1.0), support)

    assert support.size == 2
    assert complex(np.einsum("kaa->", placed.masses)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        place_on_support(HybridStateAtomic.single(np.full(6, 7.0), toy_params.rho_i), support)


def test_metastable_pair_support() -> None:
    """Test the four-atom line support of the metastable pair."""
    spec = metastable_pair_spec()

    assert isinstance(spec.support, AtomicSupport)
    assert spec.support.size == 4
    assert spec.size == 16
    assert spec.label == "metastable_pair"


def test_small_kappa_drift_stays_below_the_linear_bound() -> None:
    """Test |J(t) - J(0)| <= 1.5 kappa t on [0, 1] and its shrinking with kappa."""
    times = np.linspace(0.0, 1.0, 11)
    slow = nonconservation_demo(ToyModelParams(kappa=1e-8), times, grid_check=False, rotations=5)
    faster = nonconservation_demo(ToyModelParams(kappa=1e-6), times, grid_check=False, rotations=5)

    assert slow.max_drift <= 1.5e-8 * (1 + 1e-6)
    assert faster.max_drift <= 1.5e-6 * (1 + 1e-6)
    assert slow.max_drift < faster.max_drift
    assert faster.max_drift / slow.max_drift == pytest.approx(100.0, rel=1e-4)


def _block_at(state: HybridStateAtomic, point: np.ndarray) -> np.ndarray:
    found = [block for z, block in zip(state.points, state.blocks, strict=True) if np.allclose(z, point)]
    return sum(found, np.zeros((state.dim, state.dim), dtype=np.complex128))


@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
def test_toy_channel_is_completely_positive(toy_params: ToyModelParams, t: float) -> None:
    """Test that the Choi matrix of the channel onto each output atom is positive semidefinite.

    Args:
        toy_params: Toy parameters fixture
        t: Evolution time
    """
    start = toy_params.z0
    units = [[np.outer(np.eye(2)[i], np.eye(2)[j]).astype(np.complex128) for j in range(2)] for i in range(2)]
    outputs = [[evolve_atomic_toy(toy_params, HybridStateAtomic.single(start, units[i][j]), t) for j in range(2)]
               for i in range(2)]

    for point in (start, toy_params.final_state.point):
        choi = sum(np.kron(units[i][j], _block_at(outputs[i][j], point)) for i in range(2) for j in range(2))
        np.testing.assert_allclose(choi, choi.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(choi).min() >= -1e-10

    total = sum(np.kron(units[i][j], reduce_quantum(outputs[i][j])) for i in range(2) for j in range(2))
    np.testing.assert_allclose(np.trace(total.reshape(2, 2, 2, 2), axis1=1, axis2=3), np.eye(2), atol=1e-12)
