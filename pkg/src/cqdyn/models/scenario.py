"""Scenario files: one JSON document fully determines a command line run."""

from pathlib import Path
from typing import Annotated, Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cqdyn.core.exceptions import ConfigError
from cqdyn.models.state import AxisDocument, ComplexMatrix
from cqdyn.models.toy import ToyModelParams

Analysis = Literal["spectrum", "audit", "dd_check", "consistency"]
MODEL_KINDS = ("toy", "builtin", "tables")


class ToyModelSection(BaseModel):
    """The qubit-plus-particle model with its parameters."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["toy"] = "toy"
    params: ToyModelParams = Field(default_factory=ToyModelParams, description="Toy-model parameters")


class BuiltinModelSection(BaseModel):
    """A model from the registry, with builder options."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["builtin"]
    name: str = Field(..., min_length=1, description="Registry name")
    options: dict[str, Any] = Field(default_factory=dict, description="Builder keyword arguments")


class MomentTablesSection(BaseModel):
    """Constant moment tables in the su(d) basis."""

    model_config = ConfigDict(extra="forbid")

    d0: list[list[float]]
    d1: list[list[list[float]]]
    d2: list[list[list[list[float]]]]


class TablesModelSection(BaseModel):
    """A model given by constant numeric tables.

    ``lindblad`` is the rate matrix lambda^{mu nu} over the su(d) basis
    (I first); ``drift`` and ``diffusion`` are constants per phase-space axis.
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["tables"]
    dim: int = Field(default=2, ge=2, le=8, description="Hilbert-space dimension")
    hamiltonian: ComplexMatrix | None = None
    lindblad: ComplexMatrix | None = None
    drift: list[float] | None = None
    diffusion: list[list[float]] | None = None
    moments: MomentTablesSection | None = None


ModelSection = Annotated[ToyModelSection | BuiltinModelSection | TablesModelSection, Field(discriminator="kind")]


class GridSection(BaseModel):
    """Support override: uniform grid axes or explicit atoms, not both."""

    model_config = ConfigDict(extra="forbid")

    axes: list[AxisDocument] | None = None
    points: list[list[float]] | None = None

    @model_validator(mode="after")
    def check_exclusive(self) -> Self:
        if (self.axes is None) == (self.points is None):
            raise ValueError("Give exactly one of axes or points")
        return self


class InitialStateSection(BaseModel):
    """Initial state: the model's default, a checkpoint file, or a single delta."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["default", "file", "delta"] = "default"
    path: Path | None = None
    point: list[float] | None = None
    rho: ComplexMatrix | None = None

    @model_validator(mode="after")
    def check_fields(self) -> Self:
        if self.kind == "file" and self.path is None:
            raise ValueError("A file initial state needs a path")
        if self.kind == "delta" and (self.point is None or self.rho is None):
            raise ValueError("A delta initial state needs point and rho")
        return self


class IntegrationSection(BaseModel):
    """Fixed-step integration settings."""

    model_config = ConfigDict(extra="forbid")

    t_final: float = Field(default=10.0, gt=0, description="Final model time")
    dt: float = Field(default=1e-3, gt=0, description="RK4 step")
    snapshot_every: int | None = Field(default=None, ge=1, description="Checkpoint cadence in steps")
    monitor_every: int = Field(default=1, ge=1, description="Monitor cadence in steps")
    inject_fault_at: float | None = Field(
        default=None, ge=0, description="Corrupt the state once this time is reached (monitor testing)"
    )

    @model_validator(mode="after")
    def check_divisible(self) -> Self:
        steps = round(self.t_final / self.dt)
        if steps < 1 or abs(steps * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ValueError("t_final must be a whole number of steps dt")
        return self


class ScenarioConfig(BaseModel):
    """Top-level scenario document."""

    model_config = ConfigDict(extra="forbid")

    model: ModelSection = Field(default_factory=ToyModelSection)
    grid: GridSection | None = None
    initial_state: InitialStateSection = Field(default_factory=InitialStateSection)
    integration: IntegrationSection = Field(default_factory=IntegrationSection)
    analyses: list[Analysis] = Field(default_factory=list)
    output_dir: Path = Field(default=Path("out"), description="Directory receiving all outputs")
    seed: int = Field(default=0, ge=0, description="Seed for randomized checks")
    t_grid: list[float] | None = Field(default=None, description="Times sampled by the toy verdict")
    rotations: int = Field(default=30, ge=1, description="Random transformations per audit")
    horizon: float = Field(default=1.0, gt=0, description="Trajectory horizon of the audits")


def _dotted(loc: tuple[int | str, ...]) -> str:
    parts = [str(p) for p in loc]
    if len(parts) > 1 and parts[0] == "model" and parts[1] in MODEL_KINDS:
        del parts[1]
    return ".".join(parts) or "config"


def parse_scenario(text: str, base_dir: Path | None = None) -> ScenarioConfig:
    """Validate scenario JSON.

    Relative file references are resolved against ``base_dir``.

    Raises:
        ConfigError: Naming the dotted key of the first offending entry
    """
    try:
        config = ScenarioConfig.model_validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], key=_dotted(tuple(first["loc"])),
                          details={"errors": exc.error_count()}) from exc
    path = config.initial_state.path
    if path is not None:
        resolved = path if path.is_absolute() or base_dir is None else base_dir / path
        if not resolved.is_file():
            raise ConfigError(f"File not found: {resolved}", key="initial_state.path")
        config = config.model_copy(
            update={"initial_state": config.initial_state.model_copy(update={"path": resolved})}
        )
    return config


def load_scenario(path: Path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises:
        ConfigError: If the file is missing or invalid
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read scenario file {path}: {exc.strerror}", key="config") from exc
    return parse_scenario(text, base_dir=path.parent)
