"""Tests for the master-equation generator, its adjoint and the moment expansion."""

import numpy as np
import pytest

from cqdyn.core.config import settings
from cqdyn.core.exceptions import (
    CapacityError,
    ResolutionError,
    ShapeError,
    SpecValidationError,
    UnsupportedOrderError,
)
from cqdyn.services.builtin_models import BuiltinModel, build_model
from cqdyn.services.conservation_audit import random_support_states
from cqdyn.services.generator import (
    CouplingSpec,
    apply_adjoint,
    apply_amplitude_generator,
    apply_generator,
    build_liouvillian_matrix,
    check_diffusion_decoherence,
    compute_moments,
    conjugated,
    uncoupled,
)
from cqdyn.services.hybrid_state import HybridObservable, HybridStateGrid, expectation, product_state
from cqdyn.services.operator_algebra import (
    PAULI_X,
    PAULI_Z,
    OperatorBasis,
    random_hermitian,
    random_unitary,
)
from cqdyn.services.phase_space import AtomicSupport, ScalarField, Support, field_from_function, integrate


def _constant(value: np.ndarray):
    return lambda points: np.broadcast_to(value, (points.shape[0], *value.shape))


def _total_trace(state: HybridStateGrid) -> complex:
    return complex(np.einsum("kaa->", state.masses))


def _random_field(support: Support, rng: np.random.Generator) -> np.ndarray:
    return np.stack([random_hermitian(2, rng) for _ in range(support.size)])


def _pairing(support: Support, field: np.ndarray, state: HybridStateGrid) -> complex:
    return complex(np.einsum("k,kab,kba->", support.weights, field, state.blocks))


@pytest.mark.parametrize("seed", range(50))
def test_random_generators_preserve_trace_and_hermiticity(seed: int) -> None:
    """Test that L rho is Hermitian and traceless for seeded random couplings.

    Args:
        seed: Model seed
    """
    model = build_model("random", seed=seed)
    rng = np.random.default_rng(seed)
    for state in [model.initial_state, *random_support_states(3, model.spec.support, 2, rng)]:
        derivative = apply_generator(model.spec, state)
        assert abs(_total_trace(derivative)) < 1e-11
        np.testing.assert_allclose(derivative.blocks, np.conj(np.swapaxes(derivative.blocks, 1, 2)), atol=1e-12)


@pytest.mark.parametrize("name", ["toy", "closed_qubit", "depolarizing", "metastable_pair", "gaussian_jump",
                                  "drift_diffusion"])
def test_builtin_generators_preserve_trace(name: str) -> None:
    """Test trace preservation of every shipped model on its default initial state.

    Args:
        name: Registry name
    """
    model = build_model(name)

    assert abs(_total_trace(apply_generator(model.spec, model.initial_state))) < 1e-11


@pytest.mark.parametrize("center", [5.0, -5.5, 5.875])
def test_drift_and_diffusion_keep_the_trace_at_the_edges(center: float, rng: np.random.Generator) -> None:
    """Test probability conservation for packets touching the closed grid ends.

    Args:
        center: Packet position on [-6, 6]
        rng: Seeded generator fixture
    """
    model = build_model("drift_diffusion")
    support = model.spec.support
    packet = field_from_function(support, lambda points: np.exp(-0.5 * ((points[:, 0] - center) / 0.3) ** 2))
    packet = ScalarField(support=support, values=packet.values / integrate(packet))
    states = [product_state(support, 0.5 * np.eye(2), packet), *random_support_states(2, support, 2, rng)]

    for state in states:
        assert abs(_total_trace(apply_generator(model.spec, state))) < 1e-12


@pytest.mark.parametrize("name", ["random", "drift_diffusion", "toy", "gaussian_jump"])
def test_adjoint_is_dual_under_the_pairing(name: str, rng: np.random.Generator) -> None:
    """Test int Tr[A (L rho)] = int Tr[(L^dagger A) rho] for random fields and states.

    Args:
        name: Registry name
        rng: Seeded generator fixture
    """
    spec = build_model(name).spec
    for state in random_support_states(3, spec.support, 2, rng):
        field = _random_field(spec.support, rng)
        lhs = _pairing(spec.support, field, apply_generator(spec, state))
        rhs = _pairing(spec.support, apply_adjoint(spec, field), state)
        assert lhs == pytest.approx(rhs, abs=1e-10, rel=1e-10)


def test_liouvillian_matrix_matches_generator(rng: np.random.Generator) -> None:
    """Test that the dense matrix reproduces apply_generator on vectorized states.

    Args:
        rng: Seeded generator fixture
    """
    spec = build_model("random", seed=7).spec
    matrix = build_liouvillian_matrix(spec)
    state = random_support_states(1, spec.support, 2, rng)[0]

    assert matrix.shape == (spec.size, spec.size)
    np.testing.assert_allclose(matrix @ state.vectorize(), apply_generator(spec, state).vectorize(), atol=1e-12)


def test_liouvillian_capacity_guard(toy_model: BuiltinModel, monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that the dense cap raises a capacity error.

    Args:
        toy_model: Toy model fixture
        monkeypatch: Pytest monkeypatch fixture
    """
    with pytest.raises(CapacityError):
        build_liouvillian_matrix(toy_model.spec, max_dim=4)

    monkeypatch.setattr(settings, "max_liouvillian_dim", 7)
    with pytest.raises(CapacityError):
        build_liouvillian_matrix(toy_model.spec)


def test_spec_validation(qubit_basis: OperatorBasis) -> None:
    """Test rejection of non-Hermitian H and indefinite rates.

    Args:
        qubit_basis: Qubit basis fixture
    """
    support = AtomicSupport(points=np.zeros((1, 2)))
    with pytest.raises(SpecValidationError):
        CouplingSpec(support=support, basis=qubit_basis, hamiltonian=_constant(np.array([[0, 1], [0, 0]])))
    with pytest.raises(SpecValidationError):
        CouplingSpec(support=support, basis=qubit_basis, lindblad=_constant(np.diag([0.0, 1.0, -0.5, 0.0])))


def test_apply_generator_checks_support(toy_model: BuiltinModel) -> None:
    """Test that a state on another support is rejected.

    Args:
        toy_model: Toy model fixture
    """
    other = AtomicSupport(points=np.ones((2, 6)))
    state = HybridStateGrid(grid=other, blocks=toy_model.initial_state.blocks)

    with pytest.raises(ShapeError):
        apply_generator(toy_model.spec, state)


def test_classical_moments_need_a_grid(qubit_basis: OperatorBasis) -> None:
    """Test that drift on an atomic support has no finite-difference stencil.

    Args:
        qubit_basis: Qubit basis fixture
    """
    support = AtomicSupport(points=np.zeros((3, 2)))
    spec = CouplingSpec(support=support, basis=qubit_basis, drift=_constant(np.array([1.0, 0.0])))
    state = HybridStateGrid(grid=support, blocks=np.stack([np.eye(2) / 6] * 3).astype(np.complex128))

    with pytest.raises(ResolutionError):
        apply_generator(spec, state)


def test_drift_moves_the_mean_position() -> None:
    """Test d<x>/dt = v for a packet far from the grid edges."""
    model = build_model("drift_diffusion", velocity=0.3)
    position = HybridObservable.product("x", np.eye(2), lambda points: points[:, 0])

    rate = expectation(position, apply_generator(model.spec, model.initial_state))

    assert rate == pytest.approx(0.3, abs=1e-9)


def test_diffusion_spreads_the_variance_at_twice_the_rate() -> None:
    """Test d Var(x)/dt = 2D for a centred packet without drift."""
    model = build_model("drift_diffusion", velocity=0.0, diffusion=0.05)
    position = HybridObservable.product("x", np.eye(2), lambda points: points[:, 0])
    square = HybridObservable.product("x2", np.eye(2), lambda points: points[:, 0] ** 2)
    derivative = apply_generator(model.spec, model.initial_state)

    mean = expectation(position, model.initial_state)
    rate = expectation(square, derivative) - 2 * mean * expectation(position, derivative)

    assert rate == pytest.approx(0.1, abs=1e-9)


def test_uncoupled_and_conjugated(rng: np.random.Generator) -> None:
    """Test the derived specs used by the consistency checklist.

    Args:
        rng: Seeded generator fixture
    """
    spec = build_model("random", seed=3).spec
    free = uncoupled(spec)
    u = random_unitary(2, rng)
    rotated = conjugated(free, u)

    assert free.lindblad is None
    assert free.kernel is None
    assert free.hamiltonian_field is not None
    assert rotated.hamiltonian_field is not None
    np.testing.assert_allclose(
        rotated.hamiltonian_field, u @ free.hamiltonian_field @ np.conj(u.T), atol=1e-12
    )


def test_amplitude_generator_preserves_trace(rng: np.random.Generator) -> None:
    """Test probability conservation of the amplitude form.

    Args:
        rng: Seeded generator fixture
    """
    model = build_model("gaussian_jump")
    assert model.amplitudes is not None
    state = random_support_states(1, model.spec.support, 2, rng)[0]

    assert abs(_total_trace(apply_amplitude_generator(model.amplitudes, state))) < 1e-11


def test_moment_order_guard(toy_model: BuiltinModel) -> None:
    """Test that moments above order two are rejected.

    Args:
        toy_model: Toy model fixture
    """
    assert toy_model.amplitudes is not None

    with pytest.raises(UnsupportedOrderError):
        compute_moments(toy_model.amplitudes, 3)


def test_toy_moments_at_the_initial_point(toy_model: BuiltinModel) -> None:
    """Test the toy summary at t = 0: d0 = 3k/4, d1 = -3k/4 z0, d2 = k/2 z0 z0^T.

    Args:
        toy_model: Toy model fixture
    """
    kappa = 0.5
    z0 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    summary = toy_model.backreaction(toy_model.initial_state)

    assert summary.d0 == pytest.approx(0.75 * kappa)
    np.testing.assert_allclose(summary.d1, -0.75 * kappa * z0, atol=1e-12)
    np.testing.assert_allclose(summary.d2, 0.5 * kappa * np.outer(z0, z0), atol=1e-12)
    assert check_diffusion_decoherence(summary).verdict == "PASS"


def test_toy_moments_at_the_asymptotic_state(toy_model: BuiltinModel) -> None:
    """Test that d1 and d2 vanish once all mass sits at the final point.

    Args:
        toy_model: Toy model fixture
    """
    summary = toy_model.backreaction()
    verdict = check_diffusion_decoherence(summary)

    assert summary.d0 == pytest.approx(0.375)
    np.testing.assert_allclose(summary.d1, 0.0, atol=1e-12)
    np.testing.assert_allclose(summary.d2, 0.0, atol=1e-12)
    assert verdict.verdict == "PASS"
    assert verdict.componentwise_verdict == "PASS"


def test_manufactured_violation_fails() -> None:
    """Test the FAIL branch: margin -2 at (x, x), both readings agreeing."""
    verdict = check_diffusion_decoherence(build_model("dd_violator").backreaction())

    assert verdict.verdict == "FAIL"
    assert verdict.componentwise_verdict == "FAIL"
    assert not verdict.disagreement
    assert verdict.worst_pair == ("x", "x")
    assert verdict.worst_margin == pytest.approx(-2.0)
    assert verdict.min_eigenvalue == pytest.approx(-2.0)
    assert verdict.summary.d0 == pytest.approx(1.0)


def test_gaussian_jumps_pass() -> None:
    """Test that amplitudes built from a PSD coupling satisfy the trade-off."""
    verdict = check_diffusion_decoherence(build_model("gaussian_jump").backreaction())

    assert verdict.passed
    assert verdict.summary.d0 > 0


@pytest.mark.parametrize("name", ["toy", "metastable_pair", "dd_violator", "gaussian_jump"])
def test_matrix_and_componentwise_readings_agree(name: str) -> None:
    """Test that the PSD and entrywise verdicts coincide on the shipped models.

    Args:
        name: Registry name
    """
    verdict = check_diffusion_decoherence(build_model(name).backreaction())

    assert not verdict.disagreement
    assert verdict.verdict == verdict.componentwise_verdict


def test_hamiltonian_only_generator_is_a_commutator(qubit_basis: OperatorBasis) -> None:
    """Test L rho = -i[H, rho] without dissipation.

    Args:
        qubit_basis: Qubit basis fixture
    """
    support = AtomicSupport(points=np.zeros((1, 2)))
    spec = CouplingSpec(support=support, basis=qubit_basis, hamiltonian=_constant(PAULI_Z.copy()))
    rho = 0.5 * (np.eye(2) + PAULI_X)
    state = HybridStateGrid(grid=support, blocks=rho[None].astype(np.complex128))

    np.testing.assert_allclose(
        apply_generator(spec, state).blocks[0], -1j * (PAULI_Z @ rho - rho @ PAULI_Z), atol=1e-15
    )
