"""Resolve a scenario into the objects a sub-command works on."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cqdyn.core.config import settings
from cqdyn.core.exceptions import ConfigError, CQDynError, DomainError, ShapeError, SpecValidationError
from cqdyn.core.logging import get_logger
from cqdyn.models.scenario import (
    BuiltinModelSection,
    GridSection,
    InitialStateSection,
    ScenarioConfig,
    TablesModelSection,
    ToyModelSection,
    load_scenario,
)
from cqdyn.models.state import pairs_to_matrix
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.builtin_models import BuiltinModel, ModelTables, build_model, model_from_tables
from cqdyn.services.hybrid_state import HybridStateAtomic, HybridStateGrid, check_normalization, state_from_json
from cqdyn.services.phase_space import AtomicSupport, PhaseSpaceGrid, Support, build_grid
from cqdyn.services.toy_model import place_on_support

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class RunContext:
    """A validated scenario with its model and initial state built."""

    config: ScenarioConfig
    model: BuiltinModel
    initial_state: HybridStateGrid
    out_dir: Path

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def toy_params(self) -> ToyModelParams | None:
        section = self.config.model
        return section.params if isinstance(section, ToyModelSection) else None


def _support(section: GridSection | None) -> Support | None:
    if section is None:
        return None
    if section.axes is not None:
        return build_grid([(a.min, a.max, a.count) for a in section.axes])
    try:
        return AtomicSupport(points=np.array(section.points, dtype=np.float64))
    except (ShapeError, DomainError) as exc:
        raise ConfigError(exc.message, key="grid.points") from exc


def _tables(section: TablesModelSection) -> ModelTables:
    moments = None
    if section.moments is not None:
        moments = (
            np.asarray(section.moments.d0, dtype=np.complex128),
            np.asarray(section.moments.d1, dtype=np.complex128),
            np.asarray(section.moments.d2, dtype=np.complex128),
        )
    return ModelTables(
        dim=section.dim,
        hamiltonian=None if section.hamiltonian is None else pairs_to_matrix(section.hamiltonian),
        lindblad=None if section.lindblad is None else pairs_to_matrix(section.lindblad),
        drift=None if section.drift is None else np.asarray(section.drift, dtype=np.float64),
        diffusion=None if section.diffusion is None else np.asarray(section.diffusion, dtype=np.float64),
        moments=moments,
    )


def _model(config: ScenarioConfig) -> BuiltinModel:
    support = _support(config.grid)
    section = config.model
    try:
        if isinstance(section, ToyModelSection):
            return build_model("toy", seed=config.seed, support=support, params=section.params)
        if isinstance(section, BuiltinModelSection):
            return build_model(section.name, seed=config.seed, support=support, **section.options)
        default = AtomicSupport(points=np.zeros((1, 2)))
        return model_from_tables(_tables(section), default if support is None else support)
    except (SpecValidationError, ShapeError, DomainError) as exc:
        raise ConfigError(exc.message, key="model", details=exc.details) from exc


def _on_model_support(state: HybridStateGrid | HybridStateAtomic, support: Support, key: str) -> HybridStateGrid:
    if isinstance(state, HybridStateAtomic):
        if isinstance(support, AtomicSupport):
            try:
                return place_on_support(state, support)
            except DomainError as exc:
                raise ConfigError(exc.message, key=key) from exc
        if not isinstance(support, PhaseSpaceGrid):
            raise ConfigError("Unsupported model support", key=key)
        blocks = np.zeros((support.size, state.dim, state.dim), dtype=np.complex128)
        for z, block in zip(state.points, state.blocks, strict=True):
            try:
                index = support.cell_index(z)
            except (ShapeError, DomainError) as exc:
                raise ConfigError(exc.message, key=key) from exc
            blocks[index] += block / support.weights[index]
        return HybridStateGrid(grid=support, blocks=blocks)
    if state.grid.size != support.size or not np.allclose(state.points, support.points):
        raise ConfigError("State support does not match the model support", key=key)
    return HybridStateGrid(grid=support, blocks=state.blocks)


def _initial_state(section: InitialStateSection, model: BuiltinModel) -> HybridStateGrid:
    support = model.spec.support
    if section.kind == "default":
        state = model.initial_state
    elif section.kind == "file":
        if section.path is None:
            raise ConfigError("A file initial state needs a path", key="initial_state.path")
        try:
            loaded = state_from_json(section.path.read_text(encoding="utf-8"))
        except (ValueError, CQDynError) as exc:
            raise ConfigError(f"Unreadable state file: {exc}", key="initial_state.path") from exc
        state = _on_model_support(loaded, support, "initial_state.path")
    else:
        if section.point is None or section.rho is None:
            raise ConfigError("A delta initial state needs point and rho", key="initial_state")
        atom = HybridStateAtomic.single(np.asarray(section.point, dtype=np.float64), pairs_to_matrix(section.rho))
        state = _on_model_support(atom, support, "initial_state.point")
    if state.dim != model.spec.dim:
        raise ConfigError("Initial state dimension does not match the model", key="initial_state")
    deviation = check_normalization(state)
    if deviation > settings.trace_abort_tol:
        raise ConfigError("Initial state is not normalized", key="initial_state",
                          details={"trace_deviation": deviation})
    return state


def build_context(config: ScenarioConfig, out: Path | None = None, seed: int | None = None) -> RunContext:
    """Apply command line overrides and build the model and initial state.

    Raises:
        ConfigError: If any part of the scenario cannot be realized
    """
    updates: dict[str, object] = {}
    if out is not None:
        updates["output_dir"] = out
    if seed is not None:
        updates["seed"] = seed
    config = config.model_copy(update=updates) if updates else config
    model = _model(config)
    state = _initial_state(config.initial_state, model)
    logger.info("Scenario resolved", model=model.name, cells=model.spec.support.size, seed=config.seed)
    return RunContext(config=config, model=model, initial_state=state, out_dir=config.output_dir)


def load_context(path: Path | None, out: Path | None = None, seed: int | None = None) -> RunContext:
    """Load a scenario file, or the default toy scenario when no path is given."""
    config = ScenarioConfig() if path is None else load_scenario(path)
    return build_context(config, out=out, seed=seed)
