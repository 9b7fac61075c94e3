"""Output files of the command line front end.

Every document is read back and validated against its schema before
the command returns.
"""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from cqdyn.core.exceptions import OutputValidationError
from cqdyn.core.logging import get_logger
from cqdyn.models.state import StateEnvelope
from cqdyn.services.evolution import Trajectory
from cqdyn.services.hybrid_state import HybridStateGrid, state_to_document

logger = get_logger(__name__)


def write_json[M: BaseModel](path: Path, document: M) -> M:
    """Write a pydantic document as indented JSON with a trailing newline, then re-validate it.

    Returns:
        The document parsed back from disk
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8", newline="\n")
    parsed = type(document).model_validate_json(path.read_text(encoding="utf-8"))
    logger.info("Report written", path=str(path), schema=type(document).__name__)
    return parsed


def write_trajectory(path: Path, trajectory: Trajectory) -> None:
    """Write the monitor CSV and check its header and shape."""
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.write_csv(path)
    header, *rows = path.read_text(encoding="utf-8").splitlines()
    columns = header.split(",")
    expected = trajectory.csv_header().split(",")
    if columns != expected or len(rows) != len(trajectory.times):
        raise OutputValidationError("Trajectory CSV does not match its header",
                                    details={"path": str(path), "rows": len(rows)})
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != len(expected) or not np.all(np.isfinite(table)):
        raise OutputValidationError("Trajectory CSV has malformed rows", details={"path": str(path)})
    logger.info("Trajectory written", path=str(path), rows=len(rows))


def write_checkpoints(directory: Path, snapshots: Sequence[tuple[float, HybridStateGrid]]) -> list[Path]:
    """Write ``state_<k>.json`` for every snapshot."""
    paths = []
    for k, (t, state) in enumerate(snapshots):
        path = directory / f"state_{k}.json"
        write_json(path, state_to_document(state, t))
        paths.append(path)
    return paths


def read_checkpoint(path: Path) -> StateEnvelope:
    return StateEnvelope.model_validate_json(path.read_text(encoding="utf-8"))
