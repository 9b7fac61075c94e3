"""Tests for hybrid states, reductions and expectations."""

import numpy as np
import pytest

from cqdyn.core.exceptions import ContractViolationError, ShapeError, UnsupportedSymmetryError
from cqdyn.services.hybrid_state import (
    HybridObservable,
    HybridStateAtomic,
    HybridStateGrid,
    atomic_difference,
    check_normalization,
    classical_quantum_covariance,
    expectation,
    positivity_report,
    product_state,
    purity,
    reduce_classical,
    reduce_quantum,
    rotate_state,
    state_from_json,
    state_to_json,
)
from cqdyn.services.operator_algebra import PAULI_X, PAULI_Y, PAULI_Z, haar_rotations, random_density
from cqdyn.services.phase_space import AtomicSupport, ScalarField, build_grid, field_from_function

UP = np.array([[1, 0], [0, 0]], dtype=np.complex128)
DOWN = np.array([[0, 0], [0, 1]], dtype=np.complex128)


@pytest.fixture(name="correlated")
def correlated_fixture() -> HybridStateAtomic:
    """Spin up at x = 1 and spin down at x = -1, equal weights.

    Returns:
        HybridStateAtomic instance
    """
    return HybridStateAtomic(points=np.array([[1.0, 0.0], [-1.0, 0.0]]), blocks=np.stack([UP / 2, DOWN / 2]))


def test_grid_state_shape_checks() -> None:
    """Test that blocks must match the support and be square."""
    grid = build_grid([(-1.0, 1.0, 4), (-1.0, 1.0, 4)])

    with pytest.raises(ShapeError):
        HybridStateGrid(grid=grid, blocks=np.zeros((15, 2, 2), dtype=np.complex128))
    with pytest.raises(ShapeError):
        HybridStateGrid(grid=grid, blocks=np.zeros((16, 2, 3), dtype=np.complex128))


def test_vectorization_is_cell_major() -> None:
    """Test the flattening order of the blocks."""
    support = AtomicSupport(points=np.zeros((2, 2)))
    blocks = np.arange(8, dtype=np.complex128).reshape(2, 2, 2)
    state = HybridStateGrid(grid=support, blocks=blocks)
    vec = state.vectorize()

    assert vec[4 + 2 * 1 + 0] == blocks[1, 1, 0]
    np.testing.assert_array_equal(HybridStateGrid.devectorize(support, vec, 2).blocks, blocks)


def test_product_state_reductions(rng: np.random.Generator) -> None:
    """Test the marginals of rho varrho(z).

    Args:
        rng: Seeded generator fixture
    """
    grid = build_grid([(-3.0, 3.0, 30), (-3.0, 3.0, 30)])
    gaussian = field_from_function(grid, lambda points: np.exp(-0.5 * np.sum(points**2, axis=1)))
    varrho = ScalarField(support=grid, values=gaussian.values / np.sum(gaussian.values * grid.weights))
    rho = random_density(2, rng)
    state = product_state(grid, rho, varrho)

    assert check_normalization(state) < 1e-12
    np.testing.assert_allclose(reduce_quantum(state), rho, atol=1e-12)
    marginal = reduce_classical(state)
    assert isinstance(marginal, ScalarField)
    np.testing.assert_allclose(marginal.values, varrho.values, atol=1e-12)
    assert classical_quantum_covariance(state, lambda points: points[:, 0], PAULI_Z) == pytest.approx(0.0, abs=1e-12)


def test_correlated_state(correlated: HybridStateAtomic) -> None:
    """Test covariance, expectations and purity of a correlated atomic state.

    Args:
        correlated: Correlated state fixture
    """
    x_sigma_z = HybridObservable.product("x sigma_z", PAULI_Z, lambda points: points[:, 0])

    assert expectation(x_sigma_z, correlated) == pytest.approx(1.0)
    assert classical_quantum_covariance(correlated, lambda points: points[:, 0], PAULI_Z) == pytest.approx(1.0)
    assert purity(correlated) == pytest.approx(0.5)
    np.testing.assert_allclose(reduce_classical(correlated), [0.5, 0.5])


def test_observable_sum_and_complex_expectation(correlated: HybridStateAtomic) -> None:
    """Test summed observables and the complex value of a non-Hermitian one.

    Args:
        correlated: Correlated state fixture
    """
    total = HybridObservable.product("x", np.eye(2), lambda points: points[:, 0]) + HybridObservable.product(
        "z", PAULI_Z
    )
    raising = HybridObservable.product("sigma+", 0.5 * (PAULI_X + 1j * PAULI_Y))

    assert expectation(total, correlated) == pytest.approx(0.0)
    assert total.label == "x+z"
    assert isinstance(expectation(raising, correlated), complex)


def test_hermitian_observable_on_non_hermitian_state() -> None:
    """Test that an imaginary expectation of a Hermitian observable is a contract violation."""
    state = HybridStateAtomic.single(np.zeros(2), np.array([[0.5, 0.5], [0.0, 0.5]]))

    with pytest.raises(ContractViolationError):
        expectation(HybridObservable.product("sigma_y", PAULI_Y), state)


def test_positivity_report_locates_negative_block() -> None:
    """Test that the worst cell is reported with its point."""
    points = np.array([[0.0, 0.0], [2.0, 1.0]])
    blocks = np.stack([UP, np.diag([0.7, -0.2]).astype(np.complex128)])
    report = positivity_report(HybridStateAtomic(points=points, blocks=blocks))

    assert report.min_eigenvalue == pytest.approx(-0.2)
    assert report.index == 1
    assert report.point == (2.0, 1.0)


def test_merged_and_difference() -> None:
    """Test merging of coincident atoms and the atomic difference norm."""
    state = HybridStateAtomic(
        points=np.array([[0.0, 0.0], [1e-12, 0.0], [1.0, 0.0]]), blocks=np.stack([UP, DOWN, UP])
    )
    merged = state.merged()

    assert merged.size == 2
    np.testing.assert_allclose(merged.blocks[0], np.eye(2))
    assert atomic_difference(merged, merged) == 0.0
    assert atomic_difference(merged, merged.scaled(0.5)) == pytest.approx(np.sqrt(2) / 2)


def test_rotate_state_covariance(rng: np.random.Generator) -> None:
    """Test that rotating (z, M) -> (Rz, U M U^dagger) keeps the spin expectations covariant.

    Args:
        rng: Seeded generator fixture
    """
    state = HybridStateAtomic(points=rng.normal(size=(3, 6)), blocks=np.stack([random_density(2, rng) / 3] * 3))
    spins = [HybridObservable.product(f"s{a}", sigma) for a, sigma in enumerate((PAULI_X, PAULI_Y, PAULI_Z))]
    before = np.array([expectation(s, state) for s in spins])

    for r, u in haar_rotations(5, seed=2):
        after = np.array([expectation(s, rotate_state(r, u, state)) for s in spins])
        np.testing.assert_allclose(after, r @ before, atol=1e-12)


def test_rotate_state_guards(correlated: HybridStateAtomic) -> None:
    """Test uniform-grid and non-unitary rejections.

    Args:
        correlated: Correlated state fixture
    """
    grid = build_grid([(-1.0, 1.0, 3)] * 6)
    grid_state = HybridStateGrid(grid=grid, blocks=np.zeros((grid.size, 2, 2), dtype=np.complex128))
    atoms = HybridStateAtomic(points=np.zeros((1, 6)), blocks=UP[None])

    with pytest.raises(UnsupportedSymmetryError):
        rotate_state(np.eye(3), np.eye(2), grid_state)
    with pytest.raises(ContractViolationError):
        rotate_state(np.eye(3), 2 * np.eye(2), atoms)


def test_state_json_layouts(correlated: HybridStateAtomic) -> None:
    """Test that the atomic, uniform-grid and point-support layouts decode to the same state.

    Args:
        correlated: Correlated state fixture
    """
    grid = build_grid([(-1.0, 1.0, 3), (-1.0, 1.0, 3)])
    grid_state = HybridStateGrid(grid=grid, blocks=np.stack([UP / grid.cell_volume / grid.size] * grid.size))

    for state in (correlated, grid_state, correlated.to_support_state()):
        decoded = state_from_json(state_to_json(state, t=0.25))
        assert type(decoded) is type(state)
        np.testing.assert_array_equal(decoded.blocks, state.blocks)
        np.testing.assert_array_equal(decoded.points, state.points)
