"""Time propagation: fixed-step RK4, exact matrix exponential, and the exact atomic toy propagator."""

import io
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt
from scipy.linalg import expm

from cqdyn.core.config import settings
from cqdyn.core.exceptions import (
    CapacityError,
    ContractViolationError,
    DomainError,
    MonitorAbortError,
    NumericalBlowupError,
    ShapeError,
)
from cqdyn.core.logging import get_logger
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.generator import CouplingSpec, apply_generator
from cqdyn.services.hybrid_state import (
    HybridObservable,
    HybridStateAtomic,
    HybridStateGrid,
    check_normalization,
    expectation,
    positivity_report,
    reduce_classical,
    reduce_quantum,
)
from cqdyn.services.operator_algebra import Operator, hermitize, pauli_twirl
from cqdyn.services.phase_space import ScalarField, boundary_mass

logger = get_logger(__name__)

type FaultHook = Callable[[float, HybridStateGrid], HybridStateGrid]

BOUNDARY_MASS_WARNING = 1e-6


@dataclass
class Trajectory:
    """Monitor series and decimated snapshots of one integration.

    ``times``, ``trace_deviation``, ``min_eigenvalue`` and every
    observable series share one length; snapshots carry their own times.
    """

    times: list[float] = field(default_factory=list)
    trace_deviation: list[float] = field(default_factory=list)
    min_eigenvalue: list[float] = field(default_factory=list)
    observables: dict[str, list[float]] = field(default_factory=dict)
    snapshots: list[tuple[float, HybridStateGrid]] = field(default_factory=list)
    steps: int = 0
    boundary_mass: float = 0.0

    def record(self, t: float, state: HybridStateGrid, observables: Sequence[HybridObservable]) -> None:
        self.times.append(t)
        self.trace_deviation.append(check_normalization(state))
        self.min_eigenvalue.append(positivity_report(state).min_eigenvalue)
        for obs in observables:
            value = expectation(obs, state)
            self.observables.setdefault(obs.label, []).append(float(np.real(value)))

    @property
    def final_state(self) -> HybridStateGrid:
        return self.snapshots[-1][1]

    def as_table(self) -> npt.NDArray[np.float64]:
        columns = [self.times, self.trace_deviation, self.min_eigenvalue, *self.observables.values()]
        return np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])

    def csv_header(self) -> str:
        return ",".join(["t", "trace_dev", "min_eig", *self.observables])

    def to_csv(self) -> str:
        """CSV text with 17 significant digits and LF line endings."""
        buffer = io.StringIO()
        np.savetxt(buffer, self.as_table(), fmt="%.17g", delimiter=",", header=self.csv_header(),
                   comments="", newline="\n")
        return buffer.getvalue()

    def write_csv(self, path: Path) -> None:
        path.write_text(self.to_csv(), encoding="utf-8", newline="\n")


def step_rk4(spec: CouplingSpec, state: HybridStateGrid, dt: float, step: int | None = None) -> HybridStateGrid:
    """One classical Runge-Kutta step of d rho/dt = L rho, then re-Hermitize the blocks.

    Raises:
        ContractViolationError: If dt is not positive
        NumericalBlowupError: If the step produces non-finite values
    """
    if not dt > 0:
        raise ContractViolationError("Time step must be positive", details={"dt": dt})

    def rhs(blocks: Operator) -> Operator:
        return apply_generator(spec, state.with_blocks(blocks)).blocks

    b0 = state.blocks
    k1 = rhs(b0)
    k2 = rhs(b0 + 0.5 * dt * k1)
    k3 = rhs(b0 + 0.5 * dt * k2)
    k4 = rhs(b0 + dt * k3)
    blocks = hermitize(b0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    if not np.all(np.isfinite(blocks)):
        raise NumericalBlowupError(
            "Integration step produced non-finite values",
            details={"step": step, "dt": dt, "model": spec.label},
        )
    return state.with_blocks(blocks)


def _step_count(t_final: float, dt: float) -> int:
    if not t_final > 0:
        raise ContractViolationError("t_final must be positive", details={"t_final": t_final})
    if not dt > 0:
        raise ContractViolationError("Time step must be positive", details={"dt": dt})
    steps = round(t_final / dt)
    if steps < 1 or abs(steps * dt - t_final) > 1e-9 * t_final:
        raise ContractViolationError("dt must divide t_final", details={"t_final": t_final, "dt": dt})
    return steps


def evolve(
    spec: CouplingSpec,
    initial: HybridStateGrid,
    t_final: float,
    dt: float,
    observables: Sequence[HybridObservable] = (),
    *,
    snapshot_every: int | None = None,
    monitor_every: int = 1,
    trace_tol: float | None = None,
    positivity_tol: float | None = None,
    fault: FaultHook | None = None,
) -> Trajectory:
    """Integrate with fixed-step RK4 and monitor trace and positivity.

    Abort thresholds are checked after every step; monitor series are
    recorded every ``monitor_every`` steps and at the final step.

    Args:
        spec: Coupling data
        initial: Initial state on the spec's support
        t_final: Final time; must be a multiple of ``dt``
        dt: Step size
        observables: Observables recorded with the monitors
        snapshot_every: Keep every k-th state; the final state is always kept
        monitor_every: Monitor cadence in steps
        trace_tol: Trace deviation that aborts the run
        positivity_tol: Negative eigenvalue magnitude that aborts the run
        fault: Hook applied to the state after each step, for monitor tests

    Returns:
        The trajectory

    Raises:
        MonitorAbortError: If a monitor crosses its threshold
        NumericalBlowupError: If a step produces non-finite values
    """
    steps = _step_count(t_final, dt)
    if monitor_every < 1:
        raise ContractViolationError("monitor_every must be at least 1")
    trace_tol = settings.trace_abort_tol if trace_tol is None else trace_tol
    positivity_tol = settings.positivity_abort_tol if positivity_tol is None else positivity_tol
    trajectory = Trajectory()
    state = initial
    trajectory.record(0.0, state, observables)
    if snapshot_every:
        trajectory.snapshots.append((0.0, state))
    logger.info("Trajectory started", model=spec.label, steps=steps, dt=dt, t_final=t_final)
    for k in range(1, steps + 1):
        t = k * dt
        state = step_rk4(spec, state, dt, step=k)
        if fault is not None:
            state = fault(t, state)
        deviation = check_normalization(state)
        lowest = positivity_report(state).min_eigenvalue
        if deviation > trace_tol or lowest < -positivity_tol:
            logger.error("Monitor threshold crossed", t=t, trace_deviation=deviation, min_eigenvalue=lowest)
            raise MonitorAbortError(
                f"Monitor threshold crossed at t={t:.17g}",
                time=t,
                details={"step": k, "trace_deviation": deviation, "min_eigenvalue": lowest},
            )
        if k % monitor_every == 0 or k == steps:
            trajectory.record(t, state, observables)
        if (snapshot_every and k % snapshot_every == 0) or k == steps:
            if not trajectory.snapshots or trajectory.snapshots[-1][0] != t:
                trajectory.snapshots.append((t, state))
    trajectory.steps = steps
    marginal = reduce_classical(state)
    if isinstance(marginal, ScalarField):
        trajectory.boundary_mass = boundary_mass(marginal)
        if trajectory.boundary_mass > BOUNDARY_MASS_WARNING:
            logger.warning("Mass near the grid boundary", boundary_mass=trajectory.boundary_mass)
    logger.info("Trajectory finished", model=spec.label, steps=steps,
                max_trace_deviation=max(trajectory.trace_deviation))
    return trajectory


def propagator(matrix: Operator, t: float, max_dim: int | None = None) -> Operator:
    """expm(L t) by scaling and squaring with Pade approximation.

    Raises:
        CapacityError: If the matrix exceeds the dense cap
    """
    cap = settings.max_liouvillian_dim if max_dim is None else max_dim
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError("Liouvillian must be square", details={"shape": list(matrix.shape)})
    if matrix.shape[0] > cap:
        raise CapacityError("Liouvillian exceeds the dense size cap",
                            details={"size": matrix.shape[0], "cap": cap})
    if t == 0:
        return np.eye(matrix.shape[0], dtype=np.complex128)
    return np.asarray(expm(matrix * t), dtype=np.complex128)


def evolve_exact(matrix: Operator, initial: HybridStateGrid, t: float,
                 max_dim: int | None = None) -> HybridStateGrid:
    """vec(rho(t)) = expm(L t) vec(rho(0)).

    Raises:
        CapacityError: If the matrix exceeds the dense cap
        ShapeError: If the state length does not match the matrix
    """
    vec = initial.vectorize()
    if vec.shape[0] != matrix.shape[0]:
        raise ShapeError("State length does not match the Liouvillian",
                         details={"state": vec.shape[0], "matrix": list(matrix.shape)})
    out = propagator(matrix, t, max_dim) @ vec
    return HybridStateGrid.devectorize(initial.grid, out, initial.dim)


def evolve_atomic_toy(params: ToyModelParams, state: HybridStateAtomic, t: float) -> HybridStateAtomic:
    """Exact toy-model propagation of a point-mass state.

    Every atom decays as e^{-kappa t}; the final-state atom gains
    (1 - e^{-kappa t})/4 times the twirled total block, which equals
    (1 - e^{-kappa t})/2 Tr[total] I. Atoms whose block vanishes exactly
    are dropped.

    Raises:
        DomainError: If t is negative or the final state is not a delta
    """
    if math.isnan(t) or t < 0:
        raise DomainError("Time must be non-negative", details={"t": t})
    if params.final_state.kind != "delta":
        raise DomainError("The atomic propagator needs a delta final state")
    if t == 0:
        return state
    decay = math.exp(-params.kappa * t)
    gain = 0.25 * (1.0 - decay) * pauli_twirl(reduce_quantum(state))
    points = np.concatenate([state.points, params.final_state.point[None, :]])
    blocks = np.concatenate([decay * state.blocks, gain[None, :, :]])
    keep = np.any(blocks != 0, axis=(1, 2))
    return HybridStateAtomic(points=points[keep], blocks=blocks[keep]).merged()
