"""``simulate``: integrate a scenario and write its monitor series."""

from cqdyn.cli.commands import audit, check_dd, spectrum
from cqdyn.cli.context import RunContext
from cqdyn.cli.output import write_checkpoints, write_json, write_trajectory
from cqdyn.core.exceptions import EXIT_OK
from cqdyn.core.logging import get_logger
from cqdyn.models.reports import SimulationSummary
from cqdyn.services.evolution import FaultHook, Trajectory, evolve
from cqdyn.services.hybrid_state import HybridStateGrid

logger = get_logger(__name__)

FAULT_SCALE = 1.01


def fault_hook(at: float | None) -> FaultHook | None:
    """Hook that inflates the trace once model time reaches ``at``."""
    if at is None:
        return None

    def corrupt(t: float, state: HybridStateGrid) -> HybridStateGrid:
        if t >= at - 1e-12:
            logger.warning("Injecting a corrupted state", t=t)
            return state.scaled(FAULT_SCALE)
        return state

    return corrupt


def simulate(context: RunContext) -> Trajectory:
    """Integrate the scenario; write ``trajectory.csv``, ``summary.json`` and the checkpoints."""
    integration = context.config.integration
    model = context.model
    trajectory = evolve(
        model.spec,
        context.initial_state,
        integration.t_final,
        integration.dt,
        model.observables,
        snapshot_every=integration.snapshot_every,
        monitor_every=integration.monitor_every,
        fault=fault_hook(integration.inject_fault_at),
    )
    write_trajectory(context.out_dir / "trajectory.csv", trajectory)
    write_checkpoints(context.out_dir / "checkpoints", trajectory.snapshots)
    summary = SimulationSummary(
        model=model.spec.label,
        steps=trajectory.steps,
        t_final=integration.t_final,
        dt=integration.dt,
        snapshots=len(trajectory.snapshots),
        max_trace_deviation=max(trajectory.trace_deviation),
        final_min_eigenvalue=trajectory.min_eigenvalue[-1],
        boundary_mass=trajectory.boundary_mass,
        observables={label: series[-1] for label, series in trajectory.observables.items()},
    )
    write_json(context.out_dir / "summary.json", summary)
    return trajectory


def run(context: RunContext) -> int:
    """Integrate, then run the analyses listed in the scenario."""
    simulate(context)
    analyses = context.config.analyses
    if "spectrum" in analyses:
        spectrum.spectrum_report(context)
    if "audit" in analyses:
        audit.audit_report(context)
    if "consistency" in analyses:
        audit.consistency_report(context)
    if "dd_check" in analyses:
        check_dd.dd_verdict(context)
    return EXIT_OK
