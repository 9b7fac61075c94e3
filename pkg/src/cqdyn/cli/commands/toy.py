"""``toy``: one-shot reproduction of the rotationally symmetric, non-conserving qubit model.

Runs the simulation with J(t) columns, the symmetry-versus-conservation
verdict, the Noether audit, the consistency checklist, the spectrum and
the diffusion-decoherence check.
"""

import numpy as np

from cqdyn.cli.commands import audit, check_dd, spectrum
from cqdyn.cli.commands.simulate import simulate
from cqdyn.cli.context import RunContext
from cqdyn.cli.output import write_json
from cqdyn.core.exceptions import EXIT_OK, ConfigError
from cqdyn.core.logging import get_logger
from cqdyn.models.reports import NonconservationReport
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.evolution import Trajectory
from cqdyn.services.toy_model import nonconservation_demo, toy_angular_momentum

logger = get_logger(__name__)

DEFAULT_SAMPLES = 101


def _grid_deviation(params: ToyModelParams, trajectory: Trajectory) -> float:
    numeric = np.column_stack([trajectory.observables[f"J_{a}"] for a in "xyz"])
    analytic = np.array([toy_angular_momentum(params, t).J_total for t in trajectory.times])
    return float(np.max(np.abs(numeric - analytic)))


def toy_verdict(context: RunContext, trajectory: Trajectory) -> NonconservationReport:
    """Write ``verdict.json``."""
    params = context.toy_params
    if params is None:
        raise ConfigError("The toy command needs a toy model", key="model.kind")
    config = context.config
    t_grid = config.t_grid
    if t_grid is None:
        t_grid = np.linspace(0.0, config.integration.t_final, DEFAULT_SAMPLES).tolist()
    report = nonconservation_demo(params, t_grid, grid_check=False, rotations=config.rotations, seed=config.seed)
    report = report.model_copy(update={"max_deviation_grid": _grid_deviation(params, trajectory)})
    logger.info("Toy verdict", symmetric=report.eom_rotationally_invariant, conserved=report.J_conserved)
    return write_json(context.out_dir / "verdict.json", report)


def run(context: RunContext) -> int:
    if context.toy_params is None:
        raise ConfigError("The toy command needs a toy model", key="model.kind")
    trajectory = simulate(context)
    toy_verdict(context, trajectory)
    audit.audit_report(context)
    audit.consistency_report(context)
    spectrum.spectrum_report(context)
    check_dd.dd_verdict(context)
    return EXIT_OK
