"""Qubit coupled to a classical particle in three dimensions.

The model decoheres the qubit at rate kappa and relocates the decohered
mass into the final-state profile rho_f:

    d rho(z)/dt = -kappa rho(z) + (kappa/4) rho_f(z) int (rho + sum_a sigma_a rho sigma_a) dz'

Its equation of motion is rotationally invariant, yet total angular
momentum decays as e^{-kappa t}.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from cqdyn.core.config import settings
from cqdyn.core.exceptions import DomainError
from cqdyn.core.logging import get_logger
from cqdyn.models.reports import AngularMomentumRecord, NonconservationReport
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.conservation_audit import AuditSubject, noether_audit
from cqdyn.services.evolution import evolve, evolve_atomic_toy
from cqdyn.services.generator import (
    AmplitudeSpec,
    BackreactionSummary,
    CouplingSpec,
    Kernel,
    backreaction_summary,
    compute_moments,
)
from cqdyn.services.hybrid_state import (
    HybridObservable,
    HybridStateAtomic,
    HybridStateGrid,
    expectation,
    reduce_quantum,
)
from cqdyn.services.operator_algebra import (
    PAULIS,
    Operator,
    RealArray,
    haar_rotations,
    make_su_basis,
)
from cqdyn.services.phase_space import AtomicSupport, PhaseSpaceGrid, Support

logger = get_logger(__name__)

AXES = {"x": 0, "y": 1, "z": 2}
CHANNEL_WEIGHT = 0.25


def _axis_index(axis: int | str) -> int:
    index = AXES.get(axis, -1) if isinstance(axis, str) else axis
    if index not in (0, 1, 2):
        raise DomainError(f"Unknown axis {axis!r}")
    return index


def _check_time(t: float) -> None:
    if math.isnan(t) or t < 0:
        raise DomainError("Time must be non-negative", details={"t": t})


def _final_profile(params: ToyModelParams, support: Support) -> npt.NDArray[np.float64]:
    """rho_f at the support points, normalized so its quadrature sum is one."""
    final = params.final_state
    if final.kind == "gaussian":
        if not isinstance(support, PhaseSpaceGrid):
            raise DomainError("A Gaussian final state needs a uniform grid")
        values = final.gaussian_density(support.points)
    elif isinstance(support, AtomicSupport):
        index = support.index_of(final.point)
        if index is None:
            raise DomainError("The final-state location is not a support point")
        values = np.zeros(support.size)
        values[index] = 1.0
    elif isinstance(support, PhaseSpaceGrid):
        values = np.zeros(support.size)
        values[support.cell_index(final.point)] = 1.0
    else:
        raise DomainError("Unsupported support type for the toy model")
    total = float(np.sum(values * support.weights))
    return np.asarray(values / total, dtype=np.float64)


@dataclass(frozen=True)
class ToyGenerator:
    """Generator of the toy model, for atomic states and for supports."""

    params: ToyModelParams

    @property
    def final_point(self) -> RealArray:
        return self.params.final_state.point

    def apply_atomic(self, state: HybridStateAtomic) -> HybridStateAtomic:
        """Right-hand side on point masses, with the four channel terms summed explicitly."""
        if self.params.final_state.kind != "delta":
            raise DomainError("Atomic states need a delta final state")
        kappa = self.params.kappa
        total = reduce_quantum(state)
        channel = total.copy()
        for sigma in PAULIS:
            channel = channel + sigma @ total @ sigma
        gain = CHANNEL_WEIGHT * kappa * channel
        return HybridStateAtomic(
            points=np.concatenate([state.points, self.final_point[None, :]]),
            blocks=np.concatenate([-kappa * state.blocks, gain[None, :, :]]),
        ).merged()

    def apply_collapsed(self, state: HybridStateAtomic) -> HybridStateAtomic:
        """Right-hand side with the channel sum replaced by (kappa/2) Tr[total] I."""
        kappa = self.params.kappa
        trace = complex(np.trace(reduce_quantum(state)))
        gain = 0.5 * kappa * trace * np.eye(2, dtype=np.complex128)
        return HybridStateAtomic(
            points=np.concatenate([state.points, self.final_point[None, :]]),
            blocks=np.concatenate([-kappa * state.blocks, gain[None, :, :]]),
        ).merged()

    def discretization(self) -> AtomicSupport:
        """The two-atom support {z0, final point}; one atom when they coincide."""
        points = [self.params.z0]
        if np.linalg.norm(self.params.z0 - self.final_point) > 1e-9:
            points.append(self.final_point)
        return AtomicSupport(points=np.stack(points))

    def kernel(self, support: Support) -> Kernel:
        """W^{mu nu}(z|z') = rho_f(z) (kappa/4) delta^{mu nu} in the basis {I, sigma}."""
        profile = _final_profile(self.params, support)
        points = support.points
        weight = CHANNEL_WEIGHT * self.params.kappa

        def rho_f(z: RealArray) -> npt.NDArray[np.float64]:
            out = np.zeros(z.shape[0])
            for row, zk in enumerate(z):
                match = np.flatnonzero(np.all(np.abs(points - zk) <= 1e-12, axis=1))
                if match.size:
                    out[row] = profile[match[0]]
            return out

        def kernel(z: RealArray, zp: RealArray) -> Operator:
            values = rho_f(z)[:, None, None, None] * weight * np.eye(4)[None, None, :, :]
            return np.broadcast_to(values, (z.shape[0], zp.shape[0], 4, 4)).astype(np.complex128)

        return kernel

    def coupling_spec(self, support: Support | None = None) -> CouplingSpec:
        """The toy model as a generic coupling spec: basis {I, sigma}, lambda = 0, H = 0."""
        support = self.discretization() if support is None else support
        return CouplingSpec(support=support, basis=make_su_basis(2), kernel=self.kernel(support), label="toy")

    def initial_state(self, support: Support | None = None) -> HybridStateGrid:
        """delta(z - z0) rho_i on the given support (default: the two-atom discretization)."""
        support = self.discretization() if support is None else support
        blocks = np.zeros((support.size, 2, 2), dtype=np.complex128)
        if isinstance(support, AtomicSupport):
            index = support.index_of(self.params.z0)
            if index is None:
                raise DomainError("z0 is not a support point")
            blocks[index] = self.params.rho_i
        else:
            index = support.cell_index(self.params.z0)
            blocks[index] = self.params.rho_i / support.weights[index]
        return HybridStateGrid(grid=support, blocks=blocks)


def toy_generator(params: ToyModelParams) -> ToyGenerator:
    """Generator of the toy model."""
    return ToyGenerator(params=params)


def toy_analytic_state(params: ToyModelParams, t: float) -> HybridStateAtomic:
    """e^{-kappa t} delta(z - z0) rho_i + (1 - e^{-kappa t})/2 rho_f(z) I as point masses.

    Raises:
        DomainError: If t is negative
    """
    _check_time(t)
    initial = HybridStateAtomic.single(params.z0, params.rho_i)
    return evolve_atomic_toy(params, initial, t)


def toy_spin_expectation(params: ToyModelParams, t: float, axis: int | str) -> float:
    """(hbar/2) e^{-kappa t} Tr[sigma_a rho_i]."""
    _check_time(t)
    sigma = PAULIS[_axis_index(axis)]
    return 0.5 * params.hbar * math.exp(-params.kappa * t) * float(np.real(np.trace(sigma @ params.rho_i)))


def toy_angular_momentum(params: ToyModelParams, t: float) -> AngularMomentumRecord:
    """J_a(t) = e^{-kappa t} [(q0 x p0)_a + (hbar/2) Tr[sigma_a rho_i]]."""
    _check_time(t)
    decay = math.exp(-params.kappa * t)
    orbital = decay * np.cross(np.array(params.q0), np.array(params.p0))
    spin = np.array([toy_spin_expectation(params, t, a) for a in range(3)])
    total = orbital + spin
    return AngularMomentumRecord(
        t=t,
        L_orbital=(float(orbital[0]), float(orbital[1]), float(orbital[2])),
        S_spin=(float(spin[0]), float(spin[1]), float(spin[2])),
        J_total=(float(total[0]), float(total[1]), float(total[2])),
    )


def angular_momentum_observable(axis: int | str, hbar: float = 1.0) -> HybridObservable:
    """J_a = (q x p)_a I + (hbar/2) sigma_a on n=3 phase space."""
    index = _axis_index(axis)
    name = "xyz"[index]

    def orbital(points: RealArray) -> npt.NDArray[np.float64]:
        return np.asarray(np.cross(points[:, :3], points[:, 3:])[:, index], dtype=np.float64)

    orbital_part = HybridObservable.product(f"L_{name}", np.eye(2), orbital)
    spin_part = HybridObservable.product(f"S_{name}", 0.5 * hbar * PAULIS[index])
    return (orbital_part + spin_part).relabeled(f"J_{name}")


def toy_purity(params: ToyModelParams, t: float) -> float:
    """Tr[(e^{-kappa t} rho_i + (1 - e^{-kappa t}) I/2)^2]; equals (1 + e^{-2 kappa t})/2 for pure rho_i."""
    _check_time(t)
    decay = math.exp(-params.kappa * t)
    rho = decay * params.rho_i + 0.5 * (1.0 - decay) * np.eye(2)
    return float(np.real(np.trace(rho @ rho)))


def place_on_support(state: HybridStateAtomic, support: AtomicSupport) -> HybridStateGrid:
    blocks = np.zeros((support.size, state.dim, state.dim), dtype=np.complex128)
    for z, block in zip(state.points, state.blocks, strict=True):
        index = support.index_of(z)
        if index is None:
            raise DomainError("Atom is not a support point", details={"point": z.tolist()})
        blocks[index] += block
    return HybridStateGrid(grid=support, blocks=blocks)


def toy_backreaction(params: ToyModelParams, t: float) -> BackreactionSummary:
    """Backreaction summary of the analytic state, reading the toy kernel as amplitudes."""
    generator = toy_generator(params)
    support = generator.discretization()
    amplitudes = AmplitudeSpec(support=support, basis=make_su_basis(2), amplitudes=generator.kernel(support),
                               label="toy")
    moments = [compute_moments(amplitudes, n) for n in range(3)]
    return backreaction_summary(place_on_support(toy_analytic_state(params, t), support), moments, amplitudes.basis)


def _angular_momentum_vector(state: HybridStateAtomic | HybridStateGrid, hbar: float) -> RealArray:
    return np.array([float(np.real(expectation(angular_momentum_observable(a, hbar), state))) for a in range(3)])


def nonconservation_demo(
    params: ToyModelParams,
    t_grid: Sequence[float],
    *,
    dt: float = 1e-3,
    grid_check: bool = True,
    rotations: int = 30,
    seed: int = 0,
) -> NonconservationReport:
    """Rotational invariance of the equation of motion versus conservation of J.

    J(t) is computed from the exact atomic evolution and, optionally, from
    RK4 on the two-atom support, and compared with the analytic formula.
    The symmetry verdict comes from a Noether audit over Haar rotations;
    J counts as conserved when its expectation does not drift over the
    time grid.

    Raises:
        DomainError: If the time grid is empty or has negative times
    """
    times = sorted(float(t) for t in t_grid)
    if not times:
        raise DomainError("Time grid is empty")
    _check_time(times[0])
    initial = HybridStateAtomic.single(params.z0, params.rho_i)
    analytic = [np.array(toy_angular_momentum(params, t).J_total) for t in times]
    atomic = [_angular_momentum_vector(evolve_atomic_toy(params, initial, t), params.hbar) for t in times]
    deviation_atomic = max(float(np.max(np.abs(a - b))) for a, b in zip(atomic, analytic, strict=True))

    generator = toy_generator(params)
    spec = generator.coupling_spec()
    deviation_grid: float | None = None
    if grid_check and times[-1] > 0:
        observables = [angular_momentum_observable(a, params.hbar) for a in "xyz"]
        trajectory = evolve(spec, generator.initial_state(), times[-1], dt, observables)
        recorded = np.column_stack([trajectory.observables[f"J_{a}"] for a in "xyz"])
        indices = [round(t / dt) for t in times]
        deviation_grid = max(
            float(np.max(np.abs(recorded[i] - ref))) for i, ref in zip(indices, analytic, strict=True)
        )

    subject = AuditSubject(spec=spec, initial_state=generator.initial_state(), atomic=generator)
    charge = angular_momentum_observable("z", params.hbar)
    audit = noether_audit(subject, charge, haar_rotations(rotations, seed), seed=seed)
    j0 = analytic[0]
    drift = max(float(np.linalg.norm(j - j0)) for j in atomic)
    conserved = drift <= settings.conservation_tol * max(1.0, float(np.linalg.norm(j0)))
    logger.info("Nonconservation demo finished", max_drift=drift, symmetric=audit.symmetric)
    return NonconservationReport(
        eom_rotationally_invariant=audit.symmetric,
        J_conserved=conserved,
        max_deviation_atomic=deviation_atomic,
        max_deviation_grid=deviation_grid,
        symmetry_residual=audit.symmetry_residual,
        conservation_residual=audit.conservation_residual,
        max_drift=drift,
        times=times,
    )


def metastable_pair_spec(kappa_fast: float = 1.0, kappa_slow: float = 1e-3, leak: float = 1e-4) -> CouplingSpec:
    """Two toy blocks with very different rates, the fast one leaking into the slow one.

    Four atoms on the line: fast initial (1, 0), fast final (0, 0), slow
    initial (3, 0), slow final (2, 0). Each block relocates its mass into
    its own final atom as in the toy model; the fast initial atom also
    feeds the slow initial atom through the identity channel at rate
    ``leak``.
    """
    points = np.array([[1.0, 0.0], [0.0, 0.0], [3.0, 0.0], [2.0, 0.0]])
    fast_initial, fast_final, slow_initial, slow_final = points
    support = AtomicSupport(points=points)
    identity_channel = np.zeros((4, 4))
    identity_channel[0, 0] = 1.0

    def at(z: RealArray, target: RealArray) -> npt.NDArray[np.float64]:
        return np.asarray(np.all(np.abs(z - target) <= 1e-12, axis=1), dtype=np.float64)

    def kernel(z: RealArray, zp: RealArray) -> Operator:
        fast = at(z, fast_final)[:, None] * (at(zp, fast_initial) + at(zp, fast_final))[None, :]
        slow = at(z, slow_final)[:, None] * (at(zp, slow_initial) + at(zp, slow_final))[None, :]
        hop = at(z, slow_initial)[:, None] * at(zp, fast_initial)[None, :]
        values = (
            (CHANNEL_WEIGHT * kappa_fast * fast + CHANNEL_WEIGHT * kappa_slow * slow)[:, :, None, None]
            * np.eye(4)
            + leak * hop[:, :, None, None] * identity_channel
        )
        return np.asarray(values, dtype=np.complex128)

    return CouplingSpec(support=support, basis=make_su_basis(2), kernel=kernel, label="metastable_pair")
