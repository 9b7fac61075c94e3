"""Generator of the classical-quantum master equation.

The generator acting on a state rho(z) over a quadrature support is

    -i[H(z), rho(z)]
    + lambda^{mu nu}(z) (L_mu rho L_nu^dagger - 1/2 {L_nu^dagger L_mu, rho})
    + int W^{mu nu}(z|z') L_mu rho(z') L_nu^dagger dz'
    - 1/2 W^{mu nu}(z) {L_nu^dagger L_mu, rho(z)}

with W(z) = int W(z'|z) dz', plus optional classical drift and diffusion.
The same gain/loss machinery evaluates the amplitude form H^{mu nu}(z|z'),
whose displacement moments feed the backreaction summary and the
diffusion-decoherence check.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from functools import cached_property, reduce
from math import factorial
from operator import add

import numpy as np
import numpy.typing as npt

from cqdyn.core.concurrency import parallel_map
from cqdyn.core.config import settings
from cqdyn.core.exceptions import (
    CapacityError,
    ContractViolationError,
    ResolutionError,
    ShapeError,
    SpecValidationError,
    UnsupportedOrderError,
)
from cqdyn.core.logging import get_logger
from cqdyn.models.reports import BackreactionSummaryDocument, DiffusionDecoherenceVerdict
from cqdyn.services.hybrid_state import HybridObservable, HybridStateGrid
from cqdyn.services.operator_algebra import (
    Operator,
    OperatorBasis,
    RealArray,
    dagger,
    hermiticity_residual,
    hermitize,
)
from cqdyn.services.phase_space import (
    PhaseSpaceGrid,
    Support,
    apply_along_axis,
    flux_gradient_matrix,
    reflecting_laplacian,
    upwind_divergence,
    upwind_divergence_adjoint,
)

logger = get_logger(__name__)

type PointField = Callable[[RealArray], npt.ArrayLike]
type Kernel = Callable[[RealArray, RealArray], npt.ArrayLike]

PSD_TOL = 1e-10
MAX_MOMENT_ORDER = 2


def _evaluate(
    f: PointField, points: RealArray, trailing: tuple[int, ...], name: str, dtype: type = np.complex128
) -> npt.NDArray[np.generic]:
    values = np.asarray(f(points), dtype=dtype)
    try:
        return np.broadcast_to(values, (points.shape[0], *trailing)).copy()
    except ValueError as exc:
        raise ShapeError(
            f"{name} has the wrong shape",
            details={"shape": list(values.shape), "expected": [points.shape[0], *trailing]},
        ) from exc


def _loss_operators(basis: OperatorBasis) -> Operator:
    """L_nu^dagger L_mu indexed [mu, nu], shape (D, D, d, d)."""
    return np.einsum("nba,mbc->mnac", np.conj(basis.ops), basis.ops)


def _min_psd_eigenvalue(blocks: Operator) -> float:
    if blocks.size == 0:
        return 0.0
    return float(np.min(np.linalg.eigvalsh(hermitize(blocks))[..., 0]))


def _check_psd(blocks: Operator, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(blocks)))) if blocks.size else 1.0
    residual = hermiticity_residual(blocks)
    if residual > PSD_TOL * scale:
        raise SpecValidationError(f"{name} is not Hermitian", details={"residual": residual})
    lowest = _min_psd_eigenvalue(blocks)
    if lowest < -PSD_TOL * scale:
        raise SpecValidationError(f"{name} is not positive semidefinite", details={"min_eigenvalue": lowest})


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Two-point kernel K(z|z') over a support, materialized in row chunks.

    Rows index the first argument z. Small kernels are cached whole;
    larger ones are re-evaluated chunk by chunk on every use.
    """

    kernel: Kernel
    support: Support
    size: int

    def chunks(self) -> list[tuple[int, int]]:
        step = settings.kernel_chunk_rows
        m = self.support.size
        return [(start, min(start + step, m)) for start in range(0, m, step)]

    def rows(self, start: int, stop: int) -> Operator:
        """Evaluate K(z_k|z_j) for k in [start, stop) and all j."""
        points = self.support.points
        block = np.asarray(self.kernel(points[start:stop], points), dtype=np.complex128)
        expected = (stop - start, self.support.size, self.size, self.size)
        try:
            return np.broadcast_to(block, expected).copy()
        except ValueError as exc:
            raise ShapeError(
                "Kernel has the wrong shape",
                details={"shape": list(block.shape), "expected": list(expected)},
            ) from exc

    @cached_property
    def cached(self) -> Operator | None:
        m = self.support.size
        if m * m * self.size * self.size > settings.kernel_cache_entries:
            logger.debug("Kernel too large to cache", cells=m)
            return None
        return np.concatenate([self.rows(start, stop) for start, stop in self.chunks()])

    def chunk(self, start: int, stop: int) -> Operator:
        full = self.cached
        return full[start:stop] if full is not None else self.rows(start, stop)

    @cached_property
    def outflow(self) -> Operator:
        """K(z') = int K(z|z') dz, shape (m, D, D)."""
        weights = self.support.weights
        parts = [
            np.einsum("kjmn,k->jmn", self.chunk(start, stop), weights[start:stop])
            for start, stop in self.chunks()
        ]
        return np.asarray(reduce(add, parts), dtype=np.complex128)

    def check_psd(self, name: str) -> None:
        for start, stop in self.chunks():
            _check_psd(self.chunk(start, stop), name)

    def gain(self, basis: OperatorBasis, blocks: Operator) -> Operator:
        """int K^{mu nu}(z|z') L_mu rho(z') L_nu^dagger dz'."""
        ops = basis.ops
        sandwiched = np.einsum("mab,jbc,ndc->jmnad", ops, blocks, np.conj(ops), optimize=True)
        sandwiched *= self.support.weights[:, None, None, None, None]

        def rows(bounds: tuple[int, int]) -> Operator:
            return np.einsum("kjmn,jmnad->kad", self.chunk(*bounds), sandwiched, optimize=True)

        return np.concatenate(parallel_map(rows, self.chunks()))

    def gain_adjoint(self, basis: OperatorBasis, field: Operator) -> Operator:
        """Heisenberg dual of :meth:`gain` under the weighted pairing."""
        ops = basis.ops
        sandwiched = np.einsum("nba,kbc,mcd->kmnad", np.conj(ops), field, ops, optimize=True)
        sandwiched *= self.support.weights[:, None, None, None, None]

        def rows(bounds: tuple[int, int]) -> Operator:
            start, stop = bounds
            return np.einsum(
                "kjmn,kmnad->jad", self.chunk(start, stop), sandwiched[start:stop], optimize=True
            )

        return np.asarray(reduce(add, parallel_map(rows, self.chunks())), dtype=np.complex128)


def _anticommutator(k: Operator, blocks: Operator) -> Operator:
    return k @ blocks + blocks @ k


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Coupling data of the master equation, bound to a quadrature support.

    All fields are vectorized callables over the (m, 2n) point array:
    ``hamiltonian`` returns (m, d, d); ``lindblad`` returns the local rates
    lambda^{mu nu}(z) as (m, D, D); ``kernel(z, z')`` returns W^{mu nu}(z|z')
    as (m, m', D, D); ``drift`` returns (m, 2n); ``diffusion`` returns
    (m, 2n, 2n). Missing entries are zero.

    Raises:
        SpecValidationError: If H is not Hermitian or lambda, W or
            lambda + W(z) fail positive semidefiniteness at a support point
    """

    support: Support
    basis: OperatorBasis
    hamiltonian: PointField | None = None
    lindblad: PointField | None = None
    kernel: Kernel | None = None
    drift: PointField | None = None
    diffusion: PointField | None = None
    label: str = "custom"

    def __post_init__(self) -> None:
        if self.hamiltonian_field is not None:
            h = self.hamiltonian_field
            scale = max(1.0, float(np.max(np.abs(h))))
            if hermiticity_residual(h) > PSD_TOL * scale:
                raise SpecValidationError("Hamiltonian is not Hermitian",
                                          details={"residual": hermiticity_residual(h)})
        rates = np.zeros((self.support.size, self.basis.size, self.basis.size), dtype=np.complex128)
        if self.lindblad_field is not None:
            _check_psd(self.lindblad_field, "lambda(z)")
            rates = rates + self.lindblad_field
        if self.kernel_table is not None:
            self.kernel_table.check_psd("W(z|z')")
            rates = rates + self.kernel_table.outflow
        _check_psd(rates, "lambda(z) + W(z)")
        logger.debug("Coupling spec validated", label=self.label, cells=self.support.size, dim=self.dim)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def size(self) -> int:
        """Vectorized state length, cells x d^2."""
        return self.support.size * self.dim * self.dim

    @property
    def has_classical_moments(self) -> bool:
        return self.drift is not None or self.diffusion is not None

    @cached_property
    def hamiltonian_field(self) -> Operator | None:
        if self.hamiltonian is None:
            return None
        return _evaluate(self.hamiltonian, self.support.points, (self.dim, self.dim), "H(z)")

    @cached_property
    def lindblad_field(self) -> Operator | None:
        if self.lindblad is None:
            return None
        d2 = self.basis.size
        return _evaluate(self.lindblad, self.support.points, (d2, d2), "lambda(z)")

    @cached_property
    def kernel_table(self) -> KernelTable | None:
        if self.kernel is None:
            return None
        return KernelTable(kernel=self.kernel, support=self.support, size=self.basis.size)

    @cached_property
    def drift_field(self) -> RealArray | None:
        if self.drift is None:
            return None
        axes = 2 * self.support.n
        return _evaluate(self.drift, self.support.points, (axes,), "drift", np.float64)

    @cached_property
    def diffusion_field(self) -> RealArray | None:
        if self.diffusion is None:
            return None
        axes = 2 * self.support.n
        return _evaluate(self.diffusion, self.support.points, (axes, axes), "diffusion", np.float64)

    @cached_property
    def loss_operators(self) -> Operator:
        return _loss_operators(self.basis)

    def amplitudes(self) -> "AmplitudeSpec":
        """The kernel W(z|z') read as amplitudes for the moment expansion."""
        if self.kernel is None:
            raise ContractViolationError("Spec has no nonlocal kernel", details={"label": self.label})
        return AmplitudeSpec(support=self.support, basis=self.basis, amplitudes=self.kernel,
                             label=self.label)


@dataclass(frozen=True, eq=False)
class AmplitudeSpec:
    """Transition amplitudes H^{mu nu}(z|z') over a support.

    The amplitudes are accepted as given; no conversion to or from
    (H, lambda, W) is attempted.
    """

    support: Support
    basis: OperatorBasis
    amplitudes: Kernel
    label: str = "amplitudes"

    @cached_property
    def table(self) -> KernelTable:
        return KernelTable(kernel=self.amplitudes, support=self.support, size=self.basis.size)


@dataclass(frozen=True, eq=False)
class MomentTensor:
    """Moments D^{mu nu}_{(n) i_1..i_n}(z') at target points.

    ``values`` has shape (t, D, D), (t, 2n, D, D) or (t, 2n, 2n, D, D)
    for orders 0, 1, 2.
    """

    order: int
    points: RealArray
    values: Operator


@dataclass(frozen=True)
class BackreactionSummary:
    """Moment expectations <D_(0)>, <D_(1)>_i and <D_(2)>_ij."""

    d0: float
    d1: RealArray
    d2: RealArray

    def to_document(self) -> BackreactionSummaryDocument:
        return BackreactionSummaryDocument(
            d0=self.d0, d1=[float(x) for x in self.d1], d2=[[float(x) for x in row] for row in self.d2]
        )


def _check_state(spec: CouplingSpec, state: HybridStateGrid) -> None:
    if state.dim != spec.dim:
        raise ShapeError("State and spec dimensions differ", details={"state": state.dim, "spec": spec.dim})
    if state.grid is not spec.support and not np.array_equal(state.points, spec.support.points):
        raise ShapeError("State and spec live on different supports")


def _grid_for_differences(support: Support) -> PhaseSpaceGrid:
    if not isinstance(support, PhaseSpaceGrid):
        raise ResolutionError("Classical drift and diffusion need a uniform grid support")
    return support


def _quantum_part(spec: CouplingSpec, blocks: Operator) -> Operator:
    out = np.zeros_like(blocks)
    if spec.hamiltonian_field is not None:
        h = spec.hamiltonian_field
        out += -1j * (h @ blocks - blocks @ h)
    ops = spec.basis.ops
    if spec.lindblad_field is not None:
        lam = spec.lindblad_field
        out += np.einsum("kmn,mab,kbc,ndc->kad", lam, ops, blocks, np.conj(ops), optimize=True)
        k_local = np.einsum("kmn,mnac->kac", lam, spec.loss_operators)
        out -= 0.5 * _anticommutator(k_local, blocks)
    if spec.kernel_table is not None:
        out += spec.kernel_table.gain(spec.basis, blocks)
        k_out = np.einsum("kmn,mnac->kac", spec.kernel_table.outflow, spec.loss_operators)
        out -= 0.5 * _anticommutator(k_out, blocks)
    return out


def _classical_part(spec: CouplingSpec, blocks: Operator, adjoint: bool = False) -> Operator:
    out = np.zeros_like(blocks)
    if not spec.has_classical_moments:
        return out
    grid = _grid_for_differences(spec.support)

    def gradient(axis: int) -> RealArray:
        mat = flux_gradient_matrix(grid.shape[axis], grid.axes[axis].spacing)
        return mat.T if adjoint else mat

    if spec.drift_field is not None:
        for i in range(spec.drift_field.shape[1]):
            velocity = spec.drift_field[:, i]
            if not np.any(velocity):
                continue
            if adjoint:
                out += upwind_divergence_adjoint(blocks, velocity, grid, i)
            else:
                out += upwind_divergence(blocks, velocity, grid, i)
    if spec.diffusion_field is not None:
        axes = spec.diffusion_field.shape[1]
        for i in range(axes):
            for j in range(axes):
                coeff = spec.diffusion_field[:, i, j, None, None]
                if not np.any(coeff):
                    continue
                if i == j:
                    laplacian = reflecting_laplacian(grid.shape[i], grid.axes[i].spacing)
                    if adjoint:
                        out += coeff * apply_along_axis(laplacian, blocks, grid, i)
                    else:
                        out += apply_along_axis(laplacian, coeff * blocks, grid, i)
                elif adjoint:
                    moved = apply_along_axis(gradient(j), apply_along_axis(gradient(i), blocks, grid, i), grid, j)
                    out += coeff * moved
                else:
                    out += apply_along_axis(gradient(i), apply_along_axis(gradient(j), coeff * blocks, grid, j), grid, i)
    return out


def apply_classical_moments(spec: CouplingSpec, state: HybridStateGrid) -> HybridStateGrid:
    """Drift and diffusion contribution -d_i(D1_i rho) + d_i d_j(D2_ij rho).

    Written in flux form with closed boundary faces, so the total trace is
    kept. Drift uses upwind fluxes. Diagonal diffusion uses the [1, -2, 1]
    stencil with reflecting ends; mixed terms use the central flux difference.

    Raises:
        ResolutionError: If the support is not a uniform grid or an active
            axis has fewer than three cells
    """
    _check_state(spec, state)
    return state.with_blocks(_classical_part(spec, state.blocks))


def apply_generator(spec: CouplingSpec, state: HybridStateGrid) -> HybridStateGrid:
    """Time derivative of ``state`` under the master equation.

    Args:
        spec: Coupling data bound to the state's support
        state: Hybrid state on the same support

    Returns:
        The derivative, on the same support

    Raises:
        ShapeError: If spec and state do not share support and dimension
    """
    _check_state(spec, state)
    blocks = _quantum_part(spec, state.blocks) + _classical_part(spec, state.blocks)
    return state.with_blocks(blocks)


def apply_adjoint(spec: CouplingSpec, field: HybridObservable | npt.ArrayLike) -> Operator:
    """Heisenberg-picture generator acting on an operator field A(z).

    Satisfies int Tr[A (L rho)] dz = int Tr[(L^dagger A) rho] dz for
    every state rho on the spec's support.

    Args:
        spec: Coupling data
        field: Observable, or its values at the support points (m, d, d)

    Returns:
        L^dagger(A) at the support points, shape (m, d, d)
    """
    if isinstance(field, HybridObservable):
        values = field.operator_field(spec.support.points)
    else:
        values = np.asarray(field, dtype=np.complex128)
    if values.shape != (spec.support.size, spec.dim, spec.dim):
        raise ShapeError("Operator field does not match the spec",
                         details={"shape": list(values.shape)})
    out = np.zeros_like(values)
    if spec.hamiltonian_field is not None:
        h = spec.hamiltonian_field
        out += 1j * (h @ values - values @ h)
    ops = spec.basis.ops
    if spec.lindblad_field is not None:
        lam = spec.lindblad_field
        out += np.einsum("kmn,nba,kbc,mcd->kad", lam, np.conj(ops), values, ops, optimize=True)
        k_local = np.einsum("kmn,mnac->kac", lam, spec.loss_operators)
        out -= 0.5 * _anticommutator(k_local, values)
    if spec.kernel_table is not None:
        out += spec.kernel_table.gain_adjoint(spec.basis, values)
        k_out = np.einsum("kmn,mnac->kac", spec.kernel_table.outflow, spec.loss_operators)
        out -= 0.5 * _anticommutator(k_out, values)
    out += _classical_part(spec, values, adjoint=True)
    return out


def build_liouvillian_matrix(spec: CouplingSpec, max_dim: int | None = None) -> Operator:
    """Dense matrix of the generator over vectorized states.

    Columns are the images of the unit states, so the matrix reproduces
    :func:`apply_generator` on vectorized input (cell-major, then
    row-major block entries).

    Raises:
        CapacityError: If cells x d^2 exceeds the dense cap
    """
    cap = settings.max_liouvillian_dim if max_dim is None else max_dim
    size = spec.size
    if size > cap:
        raise CapacityError(
            "Liouvillian exceeds the dense size cap", details={"size": size, "cap": cap, "label": spec.label}
        )
    columns = np.empty((size, size), dtype=np.complex128)
    for c in range(size):
        unit = np.zeros(size, dtype=np.complex128)
        unit[c] = 1.0
        state = HybridStateGrid.devectorize(spec.support, unit, spec.dim)
        columns[:, c] = apply_generator(spec, state).vectorize()
    logger.info("Liouvillian assembled", label=spec.label, size=size)
    return columns


def apply_amplitude_generator(amplitudes: AmplitudeSpec, state: HybridStateGrid) -> HybridStateGrid:
    """Amplitude form of the master equation.

    Gain int H^{mu nu}(z|z') L_mu rho(z') L_nu^dagger dz' and loss
    -1/2 H^{mu nu}(z) {L_nu^dagger L_mu, rho(z)} with
    H(z) = int H(z'|z) dz', so probability is conserved.
    """
    if state.dim != amplitudes.basis.dim or state.grid.size != amplitudes.support.size:
        raise ShapeError("State and amplitudes live on different supports")
    table = amplitudes.table
    loss = np.einsum("kmn,mnac->kac", table.outflow, _loss_operators(amplitudes.basis))
    blocks = table.gain(amplitudes.basis, state.blocks) - 0.5 * _anticommutator(loss, state.blocks)
    return state.with_blocks(blocks)


def compute_moments(amplitudes: AmplitudeSpec, order: int, targets: RealArray | None = None) -> MomentTensor:
    """Displacement moments of the amplitudes.

    D_(n)(z') = (1/n!) int H(z|z') prod_k (z - z')_{i_k} dz, evaluated by
    quadrature over the amplitude support at each target point z'.

    Args:
        amplitudes: The amplitudes and their support
        order: Moment order n in {0, 1, 2}
        targets: Points z' (t, 2n); defaults to the support points

    Returns:
        The moment tensor at the targets

    Raises:
        UnsupportedOrderError: If order exceeds two
    """
    if order < 0 or order > MAX_MOMENT_ORDER:
        raise UnsupportedOrderError(f"Moment order must be 0, 1 or 2, got {order}", details={"order": order})
    support = amplitudes.support
    points = support.points
    targets = points if targets is None else np.atleast_2d(np.asarray(targets, dtype=np.float64))
    size = amplitudes.basis.size
    weights = support.weights
    step = settings.kernel_chunk_rows

    def partial(start: int) -> Operator:
        stop = min(start + step, support.size)
        block = np.asarray(amplitudes.amplitudes(points[start:stop], targets), dtype=np.complex128)
        block = np.broadcast_to(block, (stop - start, targets.shape[0], size, size))
        block = block * weights[start:stop, None, None, None]
        disp = points[start:stop, None, :] - targets[None, :, :]
        if order == 0:
            return np.einsum("ktmn->tmn", block)
        if order == 1:
            return np.einsum("ktmn,kti->timn", block, disp)
        return np.einsum("ktmn,kti,ktj->tijmn", block, disp, disp) / factorial(2)

    parts = parallel_map(partial, range(0, support.size, step))
    values = np.asarray(reduce(add, parts), dtype=np.complex128)
    return MomentTensor(order=order, points=targets, values=values)


def moments_from_tables(
    support: Support, d0: npt.ArrayLike, d1: npt.ArrayLike, d2: npt.ArrayLike
) -> tuple[MomentTensor, MomentTensor, MomentTensor]:
    """Spatially constant moment tensors from explicit (D, D) tables.

    Args:
        support: Points at which the moments are attached
        d0: Order-0 table, (D, D)
        d1: Order-1 table, (2n, D, D)
        d2: Order-2 table, (2n, 2n, D, D); symmetrized in its spatial indices
    """
    m = support.size
    t0 = np.asarray(d0, dtype=np.complex128)
    t1 = np.asarray(d1, dtype=np.complex128)
    t2 = np.asarray(d2, dtype=np.complex128)
    if t1.ndim != 3 or t2.ndim != 4 or t0.ndim != 2:
        raise ShapeError("Moment tables must be (D,D), (2n,D,D) and (2n,2n,D,D)")
    t2 = 0.5 * (t2 + np.swapaxes(t2, 0, 1))
    points = support.points
    return (
        MomentTensor(0, points, np.broadcast_to(t0, (m, *t0.shape)).copy()),
        MomentTensor(1, points, np.broadcast_to(t1, (m, *t1.shape)).copy()),
        MomentTensor(2, points, np.broadcast_to(t2, (m, *t2.shape)).copy()),
    )


def backreaction_summary(
    state: HybridStateGrid, moments: Sequence[MomentTensor], basis: OperatorBasis
) -> BackreactionSummary:
    """Expectations of the moments in ``state``.

    d0 sums alpha, beta >= 1; d1 sums mu over the whole basis and
    beta >= 1; d2 sums over the whole basis.

    Raises:
        ContractViolationError: If a moment order is missing or its
            points do not match the state
    """
    by_order = {moment.order: moment for moment in moments}
    missing = [n for n in range(MAX_MOMENT_ORDER + 1) if n not in by_order]
    if missing:
        raise ContractViolationError("Moments of orders 0, 1 and 2 are required", details={"missing": missing})
    for moment in by_order.values():
        if moment.points.shape[0] != state.grid.size:
            raise ContractViolationError("Moments are not attached to the state's points")
    ops = basis.ops
    # traces[k, mu, nu] = Tr[L_mu rho_k L_nu^dagger]
    traces = np.einsum("mab,kbc,nac->kmn", ops, state.masses, np.conj(ops))
    d0 = np.einsum("kmn,kmn->", by_order[0].values[:, 1:, 1:], traces[:, 1:, 1:])
    d1 = np.einsum("kimn,kmn->i", by_order[1].values[:, :, :, 1:], traces[:, :, 1:])
    d2 = np.einsum("kijmn,kmn->ij", by_order[2].values, traces)
    imag = max(abs(d0.imag), float(np.max(np.abs(d1.imag))), float(np.max(np.abs(d2.imag))))
    if imag > 1e-10:
        logger.warning("Backreaction summary has imaginary parts", imag=imag)
    d2_real = np.real(d2)
    return BackreactionSummary(
        d0=float(d0.real), d1=np.asarray(np.real(d1), dtype=np.float64),
        d2=np.asarray(0.5 * (d2_real + d2_real.T), dtype=np.float64),
    )


def axis_labels(count: int) -> list[str]:
    """Names of the phase-space axes used in verdicts."""
    if count == 1:
        return ["x"]
    if count == 2:
        return ["x", "p"]
    if count == 6:
        return ["qx", "qy", "qz", "px", "py", "pz"]
    return [f"z{i}" for i in range(count)]


def check_diffusion_decoherence(summary: BackreactionSummary, tol: float = 1e-10) -> DiffusionDecoherenceVerdict:
    """Check 2 <D2> <D0> >= <D1><D1>^T.

    The verdict uses positive semidefiniteness of the whole matrix; the
    worst entry of the componentwise form is reported next to it, and a
    disagreement between the two readings is flagged.
    """
    d1 = np.atleast_1d(summary.d1)
    d2 = np.atleast_2d(summary.d2)
    margins = 2.0 * d2 * summary.d0 - np.outer(d1, d1)
    margins = 0.5 * (margins + margins.T)
    lowest = float(np.linalg.eigvalsh(margins)[0])
    i, j = (int(x) for x in np.unravel_index(int(np.argmin(margins)), margins.shape))
    worst = float(margins[i, j])
    labels = axis_labels(margins.shape[0])
    matrix_pass = lowest >= -tol
    componentwise_pass = worst >= -tol
    if matrix_pass != componentwise_pass:
        logger.warning("Diffusion-decoherence readings disagree", min_eigenvalue=lowest, worst_margin=worst)
    return DiffusionDecoherenceVerdict(
        verdict="PASS" if matrix_pass else "FAIL",
        min_eigenvalue=lowest,
        componentwise_verdict="PASS" if componentwise_pass else "FAIL",
        worst_pair=(labels[i], labels[j]),
        worst_indices=(i, j),
        worst_margin=worst,
        disagreement=matrix_pass != componentwise_pass,
        summary=summary.to_document(),
    )


def uncoupled(spec: CouplingSpec) -> CouplingSpec:
    """The same spec with lambda = W = 0; H and classical moments are kept."""
    return replace(spec, lindblad=None, kernel=None, label=f"{spec.label}:uncoupled")


def conjugated(spec: CouplingSpec, u: npt.ArrayLike) -> CouplingSpec:
    """The same spec with H(z) replaced by U H(z) U^dagger."""
    unitary = np.asarray(u, dtype=np.complex128)
    base = spec.hamiltonian

    def rotated(points: RealArray) -> Operator:
        if base is None:
            return np.zeros((points.shape[0], spec.dim, spec.dim), dtype=np.complex128)
        h = _evaluate(base, points, (spec.dim, spec.dim), "H(z)")
        return np.asarray(unitary @ h @ dagger(unitary), dtype=np.complex128)

    return replace(spec, hamiltonian=rotated, label=f"{spec.label}:conjugated")
