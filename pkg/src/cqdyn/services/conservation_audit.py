"""Symmetry and conservation audits of hybrid generators.

A symmetry of the equation of motion is checked as covariance of the
generator on a finite family of test states; conservation of an
observable A is checked through the Heisenberg-picture generator,
L^dagger(A) = 0, and along trajectories through d<A>/dt.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np
import numpy.typing as npt
import scipy.linalg

from cqdyn.core.config import settings
from cqdyn.core.exceptions import ShapeError, UnsupportedSymmetryError
from cqdyn.core.logging import get_logger
from cqdyn.models.reports import AuditReport, ConsistencyEntry, ConsistencyReport
from cqdyn.services.evolution import evolve, evolve_exact
from cqdyn.services.generator import (
    CouplingSpec,
    apply_adjoint,
    apply_generator,
    build_liouvillian_matrix,
    conjugated,
    uncoupled,
)
from cqdyn.services.hybrid_state import (
    HybridObservable,
    HybridStateAtomic,
    HybridStateGrid,
    atomic_difference,
    expectation,
    purity,
    reduce_classical,
    reduce_quantum,
    rotate_state,
)
from cqdyn.services.operator_algebra import (
    Operator,
    RealArray,
    dagger,
    hermitize,
    min_eigenvalue,
    random_density,
    random_unitary,
)
from cqdyn.services.phase_space import AtomicSupport, Support, rotate_points
from cqdyn.services.spectral import adjoint_matrix

logger = get_logger(__name__)

type Transformation = tuple[RealArray | None, Operator]

RANDOM_TEST_STATES = 10
DADT_SAMPLES = 11
PURITY_CONSTANT_TOL = 1e-9


class AtomicGenerator(Protocol):
    """Generator that acts on point-mass states at arbitrary locations."""

    def apply_atomic(self, state: HybridStateAtomic) -> HybridStateAtomic: ...


@dataclass(frozen=True, eq=False)
class AuditSubject:
    """Everything an audit needs about one model.

    Attributes:
        spec: Coupling data on a fixed support
        initial_state: Canonical initial state on that support
        atomic: Optional generator acting on free point masses
        charge: Generator of the model's symmetry, audited for conservation
        purity_reference: Optional analytic purity curve of the reduced quantum state
    """

    spec: CouplingSpec
    initial_state: HybridStateGrid
    atomic: AtomicGenerator | None = None
    charge: HybridObservable | None = None
    purity_reference: Callable[[float], float] | None = None

    @property
    def label(self) -> str:
        return self.spec.label


def pairing_norm(support: Support, field: Operator) -> float:
    """sqrt(int ||A(z)||_F^2 dz) over the support."""
    return float(np.sqrt(np.sum(support.weights * np.sum(np.abs(field) ** 2, axis=(1, 2)))))


def conservation_check(spec: CouplingSpec, obs: HybridObservable | npt.ArrayLike) -> float:
    """Scale-normalized conservation residual ||L^dagger A|| / ||A||.

    Returns:
        Zero (within rounding) iff A is conserved by every trajectory
    """
    field = obs.operator_field(spec.support.points) if isinstance(obs, HybridObservable) else np.asarray(obs)
    norm = pairing_norm(spec.support, field)
    if norm == 0.0:
        return 0.0
    return pairing_norm(spec.support, apply_adjoint(spec, field)) / norm


def random_atomic_states(count: int, n: int, dim: int, rng: np.random.Generator,
                         atoms: int = 3) -> list[HybridStateAtomic]:
    """Random normalized point-mass states at Gaussian locations."""
    states: list[HybridStateAtomic] = []
    for _ in range(count):
        weights = rng.dirichlet(np.ones(atoms))
        blocks = np.stack([w * random_density(dim, rng) for w in weights])
        states.append(HybridStateAtomic(points=rng.normal(size=(atoms, 2 * n)), blocks=blocks))
    return states


def random_support_states(count: int, support: Support, dim: int,
                          rng: np.random.Generator) -> list[HybridStateGrid]:
    """Random normalized states on a fixed support."""
    states: list[HybridStateGrid] = []
    for _ in range(count):
        masses = rng.dirichlet(np.ones(support.size)) / support.weights
        blocks = np.stack([m * random_density(dim, rng) for m in masses])
        states.append(HybridStateGrid(grid=support, blocks=blocks))
    return states


def _support_permutation(support: Support, r: RealArray) -> npt.NDArray[np.intp]:
    if not isinstance(support, AtomicSupport):
        raise UnsupportedSymmetryError("Uniform grids are not closed under rotations")
    rotated = rotate_points(r, support.points)
    perm = []
    for z in rotated:
        k = support.index_of(z)
        if k is None:
            raise UnsupportedSymmetryError("Rotation maps a support point off the support")
        perm.append(k)
    return np.array(perm, dtype=np.intp)


def _transform_support_state(state: HybridStateGrid, r: RealArray | None, u: Operator) -> HybridStateGrid:
    blocks = np.einsum("ab,kbc,cd->kad", u, state.blocks, dagger(u))
    if r is None:
        return state.with_blocks(blocks)
    out = np.zeros_like(blocks)
    out[_support_permutation(state.grid, r)] = blocks
    return state.with_blocks(out)


def symmetry_check(
    generator: CouplingSpec | AtomicGenerator,
    r: RealArray | None,
    u: Operator,
    states: Sequence[HybridStateGrid | HybridStateAtomic],
) -> float:
    """Covariance defect max ||U(L rho) - L(U rho)|| over the test states.

    ``r=None`` acts on the quantum sector only. A spec on a fixed support
    is checked only for rotations that permute its points.

    Raises:
        UnsupportedSymmetryError: If the transformation leaves the support
    """
    residual = 0.0
    for state in states:
        if isinstance(generator, CouplingSpec):
            if not isinstance(state, HybridStateGrid):
                raise ShapeError("A coupling spec needs states on its support")
            lhs = _transform_support_state(apply_generator(generator, state), r, u)
            rhs = apply_generator(generator, _transform_support_state(state, r, u))
            residual = max(residual, float(np.max(np.abs(lhs.blocks - rhs.blocks))))
            continue
        atomic = state if isinstance(state, HybridStateAtomic) else HybridStateAtomic.from_support_state(state)
        rotation = np.eye(3) if r is None else r
        lhs_a = rotate_state(rotation, u, generator.apply_atomic(atomic))
        rhs_a = generator.apply_atomic(rotate_state(rotation, u, atomic))
        residual = max(residual, atomic_difference(lhs_a, rhs_a))
    return residual


def _dense_matrix(spec: CouplingSpec) -> Operator | None:
    if spec.size > settings.max_liouvillian_dim:
        return None
    return build_liouvillian_matrix(spec)


def _trajectory(spec: CouplingSpec, initial: HybridStateGrid, times: RealArray,
                matrix: Operator | None = None) -> list[HybridStateGrid]:
    """States at the given times, by matrix exponential when the dense cap allows."""
    matrix = _dense_matrix(spec) if matrix is None else matrix
    if matrix is not None:
        return [evolve_exact(matrix, initial, float(t)) for t in times]
    states = [initial]
    for t0, t1 in zip(times[:-1], times[1:], strict=True):
        dt = float(t1 - t0) / 100.0
        states.append(evolve(spec, states[-1], float(t1 - t0), dt).final_state)
    return states


def noether_audit(
    subject: AuditSubject,
    obs: HybridObservable,
    transformations: Sequence[Transformation],
    horizon: float = 1.0,
    seed: int = 0,
) -> AuditReport:
    """Four-way verdict: is the equation of motion symmetric, and is ``obs`` conserved?

    The symmetry residual is the worst covariance defect over the
    transformation family on 10 random states plus the canonical initial
    state. ``obs`` is conserved iff its scale-normalized residual and
    max |d<A>/dt| / ||A|| along a trajectory both stay within the
    conservation tolerance. d<A>/dt is computed both through the pairing
    with L^dagger(A) and by central finite differences; disagreement
    beyond the consistency tolerance is flagged.
    """
    spec = subject.spec
    rng = np.random.default_rng(seed)
    if subject.atomic is not None:
        states: list[HybridStateGrid | HybridStateAtomic] = [
            *random_atomic_states(RANDOM_TEST_STATES, spec.support.n, spec.dim, rng),
            HybridStateAtomic.from_support_state(subject.initial_state),
        ]
        generator: CouplingSpec | AtomicGenerator = subject.atomic
    else:
        states = [*random_support_states(RANDOM_TEST_STATES, spec.support, spec.dim, rng), subject.initial_state]
        generator = spec
    symmetry_residual = max(
        (symmetry_check(generator, r, u, states) for r, u in transformations), default=0.0
    )

    field = obs.operator_field(spec.support.points)
    scale = pairing_norm(spec.support, field)
    conservation_residual = conservation_check(spec, field)
    adjoint_field = apply_adjoint(spec, field)
    step = settings.finite_difference_step
    times = np.linspace(0.0, horizon, DADT_SAMPLES)
    samples: list[float] = []
    consistent = True
    matrix = _dense_matrix(spec)
    trajectory = _trajectory(spec, subject.initial_state, times, matrix)
    if matrix is not None:
        for state in trajectory:
            paired = float(np.real(np.einsum("kab,kba->", adjoint_field, state.masses)))
            forward = expectation(obs, evolve_exact(matrix, state, step))
            backward = expectation(obs, evolve_exact(matrix, state, -step))
            differenced = float(np.real(forward - backward)) / (2.0 * step)
            if abs(paired - differenced) > settings.dadt_consistency_tol * max(1.0, scale):
                consistent = False
            samples.append(paired)
    else:
        samples = [float(np.real(np.einsum("kab,kba->", adjoint_field, s.masses))) for s in trajectory]
    if not consistent:
        logger.warning("dA/dt estimators disagree", observable=obs.label)
    max_rate = max((abs(s) for s in samples), default=0.0)
    tol = settings.conservation_tol
    conserved = conservation_residual <= tol and max_rate <= tol * max(scale, np.finfo(float).tiny)
    symmetric = symmetry_residual <= settings.symmetry_tol
    logger.info("Noether audit finished", model=subject.label, observable=obs.label,
                symmetric=symmetric, conserved=conserved)
    return AuditReport(
        observable=obs.label,
        symmetric=symmetric,
        conserved=conserved,
        symmetry_residual=symmetry_residual,
        conservation_residual=conservation_residual,
        dJdt_samples=samples,
        dadt_consistent=consistent,
        transformations_tested=len(transformations),
    )


def _requirement_marginals(trajectory: Sequence[HybridStateGrid]) -> tuple[ConsistencyEntry, ConsistencyEntry]:
    classical_residual = 0.0
    quantum_residual = 0.0
    for state in trajectory:
        marginal = reduce_classical(state)
        values = marginal.values if not isinstance(marginal, np.ndarray) else marginal
        weights = state.grid.weights
        total = float(np.sum(np.real(values) * weights))
        classical_residual = max(classical_residual, abs(total - 1.0), max(0.0, -float(np.min(np.real(values)))))
        rho = reduce_quantum(state)
        quantum_residual = max(quantum_residual, max(0.0, -min_eigenvalue(rho)),
                               float(np.max(np.abs(rho - dagger(rho)))))
    classical = ConsistencyEntry(
        requirement="I",
        status="PASS" if classical_residual <= 1e-9 else "FAIL",
        residual=classical_residual,
        detail="classical marginal is a normalized non-negative density",
    )
    quantum = ConsistencyEntry(
        requirement="II",
        status="PASS" if quantum_residual <= 1e-10 else "FAIL",
        residual=quantum_residual,
        detail="quantum marginal is positive semidefinite",
    )
    return classical, quantum


def _requirement_uncoupled(spec: CouplingSpec, initial: HybridStateGrid, horizon: float) -> ConsistencyEntry:
    free = uncoupled(spec)
    evolved = _trajectory(free, initial, np.array([0.0, horizon]))[-1]
    classical_only = _trajectory(uncoupled(_without_hamiltonian(spec)), initial, np.array([0.0, horizon]))[-1]
    residual = float(np.max(np.abs(np.einsum("kaa->k", evolved.blocks) - np.einsum("kaa->k", classical_only.blocks))))
    detail = "classical marginal follows the classical law"
    if not spec.has_classical_moments:
        h = free.hamiltonian_field
        if h is None:
            expected = initial.blocks
        else:
            unitaries = np.stack([scipy.linalg.expm(-1j * horizon * hk) for hk in h])
            expected = np.einsum("kab,kbc,kdc->kad", unitaries, initial.blocks, np.conj(unitaries))
        residual = max(residual, float(np.max(np.abs(evolved.blocks - expected))))
        detail += "; each block evolves unitarily under H(z)"
    return ConsistencyEntry(requirement="III", status="PASS" if residual <= 1e-8 else "FAIL",
                            residual=residual, detail=detail)


def _without_hamiltonian(spec: CouplingSpec) -> CouplingSpec:
    return replace(spec, hamiltonian=None, label=f"{spec.label}:classical")


def _requirement_equivariance(spec: CouplingSpec, initial: HybridStateGrid, horizon: float,
                              rng: np.random.Generator) -> ConsistencyEntry:
    u = random_unitary(spec.dim, rng)
    free = uncoupled(spec)
    evolved = _trajectory(free, initial, np.array([0.0, horizon]))[-1]
    rotated_initial = _transform_support_state(initial, None, u)
    rotated = _trajectory(conjugated(free, u), rotated_initial, np.array([0.0, horizon]))[-1]
    residual = float(np.max(np.abs(_transform_support_state(evolved, None, u).blocks - rotated.blocks)))
    return ConsistencyEntry(requirement="IV", status="PASS" if residual <= 1e-8 else "FAIL",
                            residual=residual, detail="unitary conjugation commutes with uncoupled evolution")


def _requirement_conservation(subject: AuditSubject) -> ConsistencyEntry:
    if subject.charge is None:
        return ConsistencyEntry(requirement="V(a)", status="FLAG", residual=0.0,
                                detail="no symmetry charge supplied")
    residual = conservation_check(subject.spec, subject.charge)
    violated = residual > settings.conservation_tol
    return ConsistencyEntry(
        requirement="V(a)",
        status="VIOLATED" if violated else "PASS",
        residual=residual,
        detail=f"{subject.charge.label} {'is not' if violated else 'is'} conserved",
    )


def _requirement_purity(subject: AuditSubject, trajectory: Sequence[HybridStateGrid],
                        times: RealArray) -> ConsistencyEntry:
    series = np.array([purity(state) for state in trajectory])
    change = float(np.max(np.abs(series - series[0])))
    if change <= PURITY_CONSTANT_TOL:
        return ConsistencyEntry(requirement="VI", status="FLAG", residual=change,
                                detail="purity constant: no backreaction channel")
    detail = "purity decreasing" if np.all(np.diff(series) < 0) else "purity non-constant"
    if subject.purity_reference is None:
        return ConsistencyEntry(requirement="VI", status="PASS", residual=change, detail=detail)
    reference = np.array([subject.purity_reference(float(t)) for t in times])
    deviation = float(np.max(np.abs(series - reference)))
    return ConsistencyEntry(
        requirement="VI",
        status="PASS" if deviation <= 1e-9 else "FAIL",
        residual=deviation,
        detail=f"{detail}; max deviation from the analytic curve {deviation:.3g}",
    )


def consistency_suite(subject: AuditSubject, horizon: float, samples: int = 21, seed: int = 0) -> ConsistencyReport:
    """Run the consistency checklist for one model.

    Entries: I (classical marginal), II (quantum marginal), III
    (uncoupled limit), IV (equivariance), V(a) (conservation of the
    symmetry charge, reported VIOLATED as data) and VI (purity change,
    flagged when constant).
    """
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, horizon, samples)
    trajectory = _trajectory(subject.spec, subject.initial_state, times)
    classical, quantum = _requirement_marginals(trajectory)
    entries = [
        classical,
        quantum,
        _requirement_uncoupled(subject.spec, subject.initial_state, horizon),
        _requirement_equivariance(subject.spec, subject.initial_state, horizon, rng),
        _requirement_conservation(subject),
        _requirement_purity(subject, trajectory, times),
    ]
    logger.info("Consistency suite finished", model=subject.label,
                statuses={e.requirement: e.status for e in entries})
    return ConsistencyReport(model=subject.label, horizon=horizon, entries=entries)


def conserved_observable_search(spec: CouplingSpec, tol: float | None = None) -> list[Operator]:
    """Hermitian operator fields spanning the kernel of L^dagger.

    Returns:
        Orthonormal (in real coordinates) Hermitian fields, shape (m, d, d) each
    """
    tol = settings.zero_tol if tol is None else tol
    matrix = build_liouvillian_matrix(spec)
    kernel = scipy.linalg.null_space(adjoint_matrix(matrix, spec.support.weights, spec.dim), rcond=tol).T
    shape = (spec.support.size, spec.dim, spec.dim)
    candidates: list[npt.NDArray[np.float64]] = []
    for vec in kernel:
        field = vec.reshape(shape)
        for part in (hermitize(field), hermitize(-1j * field)):
            candidates.append(np.concatenate([part.real.ravel(), part.imag.ravel()]))
    if not candidates:
        return []
    basis = scipy.linalg.orth(np.stack(candidates, axis=1), rcond=tol)
    half = basis.shape[0] // 2
    fields = [(basis[:half, j] + 1j * basis[half:, j]).reshape(shape) for j in range(basis.shape[1])]
    logger.info("Conserved observables found", model=spec.label, count=len(fields))
    return fields
