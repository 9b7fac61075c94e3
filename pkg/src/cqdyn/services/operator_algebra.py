"""Finite-dimensional operator algebra: bases, brackets, channels, rotations, spectra."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.spatial.transform import Rotation

from cqdyn.core.config import settings
from cqdyn.core.exceptions import (
    ContractViolationError,
    InvalidDimensionError,
    NormalizationError,
    ShapeError,
)

type Operator = npt.NDArray[np.complex128]
type RealArray = npt.NDArray[np.float64]

PAULI_X: Operator = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y: Operator = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z: Operator = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS: tuple[Operator, Operator, Operator] = (PAULI_X, PAULI_Y, PAULI_Z)

MAX_DIMENSION = 8


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Hilbert-Schmidt orthogonal operator set ``{L_0 = I, L_1, ..., L_{d^2-1}}``.

    Attributes:
        dim: Hilbert-space dimension d
        ops: Stacked operators, shape (d^2, d, d)
        hs_norm: Common value c of Tr[L_a^dagger L_a] for a >= 1
    """

    dim: int
    ops: Operator
    hs_norm: float

    @property
    def size(self) -> int:
        """Number of operators, d^2."""
        return int(self.ops.shape[0])

    @property
    def daggers(self) -> Operator:
        """Stacked adjoints L_mu^dagger."""
        return np.conj(np.swapaxes(self.ops, -1, -2))


@dataclass(frozen=True)
class DensityReport:
    """Validity report for a candidate density matrix."""

    hermiticity_residual: float
    min_eigenvalue: float
    trace_deviation: float
    valid: bool


def _as_operator(a: npt.ArrayLike) -> Operator:
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError("Operator must be a square matrix", details={"shape": list(arr.shape)})
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("Operator has non-finite entries")
    return arr


def dagger(a: Operator) -> Operator:
    """Conjugate transpose, acting on the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_residual(a: Operator) -> float:
    """Return max|A - A^dagger|."""
    return float(np.max(np.abs(a - dagger(a)))) if a.size else 0.0


def is_hermitian(a: Operator, tol: float | None = None) -> bool:
    """Check max|A - A^dagger| <= tol * max|A| (relative tolerance)."""
    tol = settings.hermitian_tol if tol is None else tol
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    return hermiticity_residual(a) <= tol * max(scale, np.finfo(float).tiny)


def hermitize(a: Operator) -> Operator:
    """Return (A + A^dagger)/2 over the last two axes."""
    return 0.5 * (a + dagger(a))


def make_su_basis(d: int) -> OperatorBasis:
    """Build the generalized Gell-Mann basis of su(d) with the identity prepended.

    Ordering is: identity, then for each pair j<k the symmetric and the
    antisymmetric generator, then the d-1 diagonal generators. For d=2
    this yields (I, sigma_x, sigma_y, sigma_z). All generators satisfy
    Tr[L_a L_b] = 2 delta_ab.

    Args:
        d: Hilbert-space dimension

    Returns:
        The operator basis

    Raises:
        InvalidDimensionError: If d < 2 or d exceeds the supported regime
    """
    if d < 2 or d > MAX_DIMENSION:
        raise InvalidDimensionError(
            f"Basis dimension must lie in [2, {MAX_DIMENSION}], got {d}", details={"dim": d}
        )
    ops: list[Operator] = [np.eye(d, dtype=np.complex128)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((d, d), dtype=np.complex128)
            anti[j, k] = -1j
            anti[k, j] = 1j
            ops.extend([sym, anti])
    for level in range(1, d):
        diag = np.zeros(d, dtype=np.complex128)
        diag[:level] = 1.0
        diag[level] = -level
        ops.append(np.sqrt(2.0 / (level * (level + 1))) * np.diag(diag))
    return OperatorBasis(dim=d, ops=np.stack(ops), hs_norm=2.0)


def hs_inner(a: Operator, b: Operator) -> complex:
    """Hilbert-Schmidt inner product Tr[A^dagger B]."""
    return complex(np.vdot(a, b))


def gram_matrix(basis: OperatorBasis) -> Operator:
    """Matrix of Tr[L_a^dagger L_b] over the whole basis."""
    flat = basis.ops.reshape(basis.size, -1)
    return np.conj(flat) @ flat.T


def _check_pair(a: Operator, b: Operator) -> None:
    if a.shape != b.shape:
        raise ShapeError(
            "Operator dimensions do not match",
            details={"left": list(a.shape), "right": list(b.shape)},
        )


def commutator(a: Operator, b: Operator) -> Operator:
    """Return AB - BA."""
    _check_pair(a, b)
    return a @ b - b @ a


def anticommutator(a: Operator, b: Operator) -> Operator:
    """Return AB + BA."""
    _check_pair(a, b)
    return a @ b + b @ a


def pauli_twirl(rho: npt.ArrayLike) -> Operator:
    """Return rho + sum_a sigma_a rho sigma_a, which equals 2 Tr[rho] I.

    Raises:
        InvalidDimensionError: If rho is not 2x2
    """
    arr = np.asarray(rho, dtype=np.complex128)
    if arr.shape != (2, 2):
        raise InvalidDimensionError("Pauli twirl is defined on 2x2 operators",
                                    details={"shape": list(arr.shape)})
    out = arr.copy()
    for sigma in PAULIS:
        out = out + sigma @ arr @ sigma
    return out


def _unit_axis(axis: npt.ArrayLike) -> RealArray:
    n = np.asarray(axis, dtype=np.float64)
    if n.shape != (3,):
        raise ShapeError("Rotation axis must be a 3-vector", details={"shape": list(n.shape)})
    if abs(float(np.linalg.norm(n)) - 1.0) > 1e-12:
        raise NormalizationError("Rotation axis must have unit length",
                                 details={"norm": float(np.linalg.norm(n))})
    return n


def rotation_unitary(axis: npt.ArrayLike, angle: float) -> Operator:
    """Spin-1/2 representation exp(-i angle (n . sigma) / 2).

    Args:
        axis: Unit 3-vector n
        angle: Rotation angle in radians

    Returns:
        The 2x2 unitary

    Raises:
        NormalizationError: If the axis is not of unit length
    """
    n = _unit_axis(axis)
    generator = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return np.cos(angle / 2.0) * np.eye(2, dtype=np.complex128) - 1j * np.sin(angle / 2.0) * generator


def rotation_matrix(axis: npt.ArrayLike, angle: float) -> RealArray:
    """Active SO(3) rotation matching :func:`rotation_unitary`.

    The pair satisfies U^dagger sigma_a U = R_ab sigma_b, so spin
    expectation values transform as <sigma> -> R <sigma>.
    """
    n = _unit_axis(axis)
    return np.asarray(Rotation.from_rotvec(angle * n).as_matrix(), dtype=np.float64)


def haar_rotations(count: int, seed: int) -> list[tuple[RealArray, Operator]]:
    """Draw Haar-random rotations with their spin-1/2 unitaries.

    Args:
        count: Number of rotations
        seed: Seed for the sampler

    Returns:
        List of (R, U) pairs
    """
    # normalized Gaussian quaternions are uniform on S^3, i.e. Haar on SO(3)
    quats = np.random.default_rng(seed).normal(size=(count, 4))
    pairs: list[tuple[RealArray, Operator]] = []
    for quat in quats:
        rotvec = Rotation.from_quat(quat / np.linalg.norm(quat)).as_rotvec()
        angle = float(np.linalg.norm(rotvec))
        axis = rotvec / angle if angle > 0 else np.array([0.0, 0.0, 1.0])
        axis = axis / np.linalg.norm(axis)
        pairs.append((rotation_matrix(axis, angle), rotation_unitary(axis, angle)))
    return pairs


def eig_hermitian(a: npt.ArrayLike, tol: float | None = None) -> tuple[RealArray, Operator]:
    """Eigendecomposition of a Hermitian operator.

    Args:
        a: Hermitian operator
        tol: Relative Hermiticity tolerance

    Returns:
        Ascending eigenvalues and the unitary matrix of eigenvectors (columns)

    Raises:
        ContractViolationError: If the input is not Hermitian within tolerance
    """
    arr = _as_operator(a)
    if not is_hermitian(arr, tol):
        raise ContractViolationError(
            "eig_hermitian requires a Hermitian operator",
            details={"residual": hermiticity_residual(arr)},
        )
    values, vectors = np.linalg.eigh(hermitize(arr))
    return np.asarray(values, dtype=np.float64), np.asarray(vectors, dtype=np.complex128)


def min_eigenvalue(a: Operator) -> float:
    """Smallest eigenvalue of the Hermitian part of ``a``."""
    return float(np.linalg.eigvalsh(hermitize(a))[0])


def validate_density(rho: npt.ArrayLike, tol: float = 1e-10) -> DensityReport:
    """Report Hermiticity residual, minimum eigenvalue and trace deviation.

    The matrix is valid iff its minimum eigenvalue is >= -tol and
    |Tr - 1| <= tol (and it is Hermitian within tol).
    """
    arr = np.asarray(rho, dtype=np.complex128)
    residual = hermiticity_residual(arr)
    lowest = min_eigenvalue(arr)
    deviation = abs(complex(np.trace(arr)) - 1.0)
    valid = residual <= tol and lowest >= -tol and deviation <= tol
    return DensityReport(
        hermiticity_residual=residual,
        min_eigenvalue=lowest,
        trace_deviation=deviation,
        valid=valid,
    )


def random_hermitian(d: int, rng: np.random.Generator) -> Operator:
    """Random Hermitian matrix with Gaussian entries."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return hermitize(g.astype(np.complex128))


def random_unitary(d: int, rng: np.random.Generator) -> Operator:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    g = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))).astype(np.complex128)
    q, r = np.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    return np.asarray(q * phases, dtype=np.complex128)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> Operator:
    """Random density matrix G G^dagger / Tr[G G^dagger]."""
    g = (rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))).astype(np.complex128)
    rho = g @ dagger(g)
    return np.asarray(rho / np.trace(rho).real, dtype=np.complex128)


def random_psd(size: int, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    """Random positive semidefinite matrix with trace ``scale``."""
    return random_density(size, rng) * scale
