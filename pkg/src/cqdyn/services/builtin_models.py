"""Named models shipped with the toolkit.

Each builder returns a :class:`BuiltinModel`: coupling data on a support,
a default initial state, the observables worth monitoring, and whatever
the audits need (symmetry family, charge, amplitudes or moments).
"""

import inspect
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

from cqdyn.core.exceptions import ConfigError, ContractViolationError
from cqdyn.core.logging import get_logger
from cqdyn.models.toy import ToyModelParams
from cqdyn.services.conservation_audit import AtomicGenerator, AuditSubject, Transformation
from cqdyn.services.generator import (
    AmplitudeSpec,
    BackreactionSummary,
    CouplingSpec,
    MomentTensor,
    backreaction_summary,
    compute_moments,
    moments_from_tables,
)
from cqdyn.services.hybrid_state import HybridObservable, HybridStateGrid, product_state
from cqdyn.services.operator_algebra import (
    PAULI_X,
    PAULI_Z,
    Operator,
    RealArray,
    haar_rotations,
    make_su_basis,
    random_hermitian,
    random_psd,
    rotation_unitary,
)
from cqdyn.services.phase_space import AtomicSupport, Support, build_grid, field_from_function
from cqdyn.services.toy_model import (
    angular_momentum_observable,
    metastable_pair_spec,
    place_on_support,
    toy_analytic_state,
    toy_generator,
    toy_purity,
)

logger = get_logger(__name__)

type Symmetry = Literal["so3", "u1"]

PLUS_STATE: Operator = 0.5 * np.array([[1, 1], [1, 1]], dtype=np.complex128)
GROUND_STATE: Operator = np.array([[1, 0], [0, 0]], dtype=np.complex128)
MAXIMALLY_MIXED: Operator = 0.5 * np.eye(2, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class BuiltinModel:
    """A named model with everything the CLI analyses need.

    Attributes:
        name: Registry name
        spec: Coupling data on its support
        initial_state: Default initial state
        observables: Observables recorded along trajectories
        charge: Symmetry generator audited for conservation
        atomic: Generator acting on free point masses, if the model has one
        symmetry: Symmetry family of the equation of motion
        amplitudes: Transition amplitudes for the moment expansion
        moments: Explicit moment tensors, used instead of ``amplitudes``
        summary_state: State at which the backreaction summary is evaluated
        purity_reference: Analytic purity of the reduced quantum state
    """

    name: str
    spec: CouplingSpec
    initial_state: HybridStateGrid
    observables: tuple[HybridObservable, ...] = ()
    charge: HybridObservable | None = None
    atomic: AtomicGenerator | None = None
    symmetry: Symmetry | None = None
    amplitudes: AmplitudeSpec | None = None
    moments: tuple[MomentTensor, ...] | None = None
    summary_state: HybridStateGrid | None = None
    purity_reference: Callable[[float], float] | None = None

    def audit_subject(self, initial_state: HybridStateGrid | None = None) -> AuditSubject:
        return AuditSubject(
            spec=self.spec,
            initial_state=self.initial_state if initial_state is None else initial_state,
            atomic=self.atomic,
            charge=self.charge,
            purity_reference=self.purity_reference,
        )

    def transformations(self, count: int, seed: int) -> list[Transformation]:
        """Random members of the model's symmetry family."""
        if self.symmetry == "so3":
            return list(haar_rotations(count, seed))
        if self.symmetry == "u1":
            angles = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi, size=count)
            return [(None, rotation_unitary([0.0, 0.0, 1.0], float(a))) for a in angles]
        return []

    @property
    def has_moments(self) -> bool:
        return self.moments is not None or self.amplitudes is not None

    def backreaction(self, state: HybridStateGrid | None = None) -> BackreactionSummary:
        """Backreaction summary at ``state``, defaulting to the model's summary state.

        Raises:
            ContractViolationError: If the model has neither amplitudes nor moments
        """
        if self.moments is not None:
            moments: Sequence[MomentTensor] = self.moments
        elif self.amplitudes is not None:
            moments = [compute_moments(self.amplitudes, n) for n in range(3)]
        else:
            raise ContractViolationError("Model has no amplitudes or moments", details={"model": self.name})
        if state is None:
            state = self.initial_state if self.summary_state is None else self.summary_state
        return backreaction_summary(state, moments, self.spec.basis)


type Builder = Callable[..., BuiltinModel]

_REGISTRY: dict[str, Builder] = {}


def register(name: str) -> Callable[[Builder], Builder]:
    def decorator(builder: Builder) -> Builder:
        _REGISTRY[name] = builder
        return builder

    return decorator


def model_names() -> list[str]:
    return sorted(_REGISTRY)


def build_model(name: str, *, seed: int = 0, support: Support | None = None, **options: Any) -> BuiltinModel:
    """Build a registered model.

    Args:
        name: Registry name
        seed: Seed for randomized models
        support: Support overriding the model's default, where the model allows it
        **options: Model-specific parameters

    Raises:
        ConfigError: If the name is unknown or the options do not fit the model
    """
    builder = _REGISTRY.get(name)
    if builder is None:
        raise ConfigError(f"Unknown model {name!r}; choose one of {model_names()}", key="model.name")
    try:
        inspect.signature(builder).bind(seed=seed, support=support, **options)
    except TypeError as exc:
        raise ConfigError(f"Invalid options for model {name!r}: {exc}", key="model.options") from exc
    model = builder(seed=seed, support=support, **options)
    logger.info("Model built", model=name, cells=model.spec.support.size, dim=model.spec.dim)
    return model


def _single_atom(n: int = 1) -> AtomicSupport:
    return AtomicSupport(points=np.zeros((1, 2 * n)))


def _atom_state(support: Support, rho: Operator) -> HybridStateGrid:
    """rho spread uniformly over the support with unit total mass."""
    density = np.asarray(rho, dtype=np.complex128) / float(np.sum(support.weights))
    blocks = np.broadcast_to(density, (support.size, *density.shape))
    return HybridStateGrid(grid=support, blocks=blocks.copy())


def _constant(value: npt.ArrayLike) -> Callable[[RealArray], Operator]:
    arr = np.asarray(value, dtype=np.complex128)

    def evaluate(points: RealArray) -> Operator:
        return np.broadcast_to(arr, (points.shape[0], *arr.shape)).copy()

    return evaluate


def _gaussian_state(support: Support, rho: Operator, center: Sequence[float], width: float) -> HybridStateGrid:
    c = np.asarray(center, dtype=np.float64)

    def density(points: RealArray) -> npt.NDArray[np.float64]:
        return np.asarray(np.exp(-0.5 * np.sum((points - c) ** 2, axis=1) / width**2), dtype=np.float64)

    varrho = field_from_function(support, density)
    total = float(np.sum(varrho.values * support.weights))
    varrho = field_from_function(support, lambda points: density(points) / total)
    return product_state(support, rho, varrho)


def _spin(label: str, sigma: Operator) -> HybridObservable:
    return HybridObservable.product(label, sigma)


def _position(label: str = "x") -> HybridObservable:
    return HybridObservable.product(label, np.eye(2), lambda points: points[:, 0])


@register("toy")
def toy(*, seed: int = 0, support: Support | None = None,
        params: ToyModelParams | None = None) -> BuiltinModel:
    """The qubit-plus-particle model on its two-atom discretization (or a given support)."""
    params = ToyModelParams() if params is None else params
    generator = toy_generator(params)
    spec = generator.coupling_spec(support)
    atomic = generator if params.final_state.kind == "delta" else None
    summary_state = None
    if isinstance(spec.support, AtomicSupport):
        summary_state = place_on_support(toy_analytic_state(params, math.inf), spec.support)
    return BuiltinModel(
        name="toy",
        spec=spec,
        initial_state=generator.initial_state(spec.support),
        observables=tuple(angular_momentum_observable(a, params.hbar) for a in "xyz"),
        charge=angular_momentum_observable("z", params.hbar),
        atomic=atomic,
        symmetry="so3" if isinstance(spec.support, AtomicSupport) else None,
        amplitudes=spec.amplitudes(),
        summary_state=summary_state,
        purity_reference=lambda t: toy_purity(params, t),
    )


@register("closed_qubit")
def closed_qubit(*, seed: int = 0, support: Support | None = None, omega: float = 1.0) -> BuiltinModel:
    """H = omega sigma_z on one cell; no dissipation."""
    support = _single_atom() if support is None else support
    spec = CouplingSpec(support=support, basis=make_su_basis(2), hamiltonian=_constant(omega * PAULI_Z),
                        label="closed_qubit")
    return BuiltinModel(
        name="closed_qubit",
        spec=spec,
        initial_state=_atom_state(support, PLUS_STATE),
        observables=(_spin("sigma_x", PAULI_X), _spin("sigma_z", PAULI_Z)),
        charge=_spin("sigma_z", PAULI_Z),
        symmetry="u1",
        purity_reference=lambda t: 1.0,
    )


@register("depolarizing")
def depolarizing(*, seed: int = 0, support: Support | None = None, gamma: float = 0.25) -> BuiltinModel:
    """Single-cell depolarizing channel with rate gamma on each Pauli; fixed point I/2."""
    support = _single_atom(n=3) if support is None else support
    rates = np.diag([0.0, gamma, gamma, gamma])
    spec = CouplingSpec(support=support, basis=make_su_basis(2), lindblad=_constant(rates), label="depolarizing")

    def purity(t: float) -> float:
        return 0.5 * (1.0 + math.exp(-8.0 * gamma * t))

    return BuiltinModel(
        name="depolarizing",
        spec=spec,
        initial_state=_atom_state(support, GROUND_STATE),
        observables=(_spin("sigma_z", PAULI_Z),),
        charge=_spin("S_z", 0.5 * PAULI_Z),
        symmetry="so3" if support.size == 1 else None,
        purity_reference=purity if support.size == 1 else None,
    )


@register("zero")
def zero_model(*, seed: int = 0, support: Support | None = None) -> BuiltinModel:
    """The zero generator."""
    support = _single_atom() if support is None else support
    spec = CouplingSpec(support=support, basis=make_su_basis(2), label="zero")
    return BuiltinModel(
        name="zero",
        spec=spec,
        initial_state=_atom_state(support, MAXIMALLY_MIXED),
        observables=(_spin("sigma_z", PAULI_Z),),
    )


@register("metastable_pair")
def metastable_pair(*, seed: int = 0, support: Support | None = None, kappa_fast: float = 1.0,
                    kappa_slow: float = 1e-3, leak: float = 1e-4) -> BuiltinModel:
    """Two toy blocks with rates kappa_fast and kappa_slow and a weak leak between them."""
    if support is not None:
        raise ConfigError("The metastable pair lives on its own four-atom support", key="grid")
    spec = metastable_pair_spec(kappa_fast, kappa_slow, leak)
    blocks = np.zeros((spec.support.size, 2, 2), dtype=np.complex128)
    blocks[0] = GROUND_STATE
    return BuiltinModel(
        name="metastable_pair",
        spec=spec,
        initial_state=HybridStateGrid(grid=spec.support, blocks=blocks),
        observables=(_position(), _spin("sigma_z", PAULI_Z)),
        amplitudes=spec.amplitudes(),
    )


def _line_grid(cells: int, half_width: float) -> Support:
    return build_grid([(-half_width, half_width, cells), (-1.0, 1.0, 1)])


@register("drift_diffusion")
def drift_diffusion(*, seed: int = 0, support: Support | None = None, velocity: float = 0.2,
                    diffusion: float = 0.05, dephasing: float = 0.1, omega: float = 0.5,
                    cells: int = 48, half_width: float = 6.0) -> BuiltinModel:
    """Qubit precessing and dephasing on a particle that drifts and diffuses along x."""
    support = _line_grid(cells, half_width) if support is None else support
    axes = 2 * support.n
    drift = np.zeros(axes)
    drift[0] = velocity
    spread = np.zeros((axes, axes))
    spread[0, 0] = diffusion
    rates = np.zeros((4, 4))
    rates[3, 3] = dephasing
    spec = CouplingSpec(
        support=support,
        basis=make_su_basis(2),
        hamiltonian=_constant(0.5 * omega * PAULI_Z),
        lindblad=_constant(rates),
        drift=lambda points: np.broadcast_to(drift, (points.shape[0], axes)),
        diffusion=lambda points: np.broadcast_to(spread, (points.shape[0], axes, axes)),
        label="drift_diffusion",
    )
    return BuiltinModel(
        name="drift_diffusion",
        spec=spec,
        initial_state=_gaussian_state(support, PLUS_STATE, np.zeros(axes), 0.5),
        observables=(_position(), _spin("sigma_x", PAULI_X), _spin("sigma_z", PAULI_Z)),
        charge=_spin("sigma_z", PAULI_Z),
    )


@register("random")
def random_model(*, seed: int = 0, support: Support | None = None, cells: int = 8,
                 rate: float = 0.5) -> BuiltinModel:
    """Seeded random valid coupling on a small line grid.

    H(z) = H0 + x H1, a constant PSD rate matrix lambda, and a kernel
    W(z|z') = exp(-(x - x')^2) C with C PSD.
    """
    rng = np.random.default_rng(seed)
    support = _line_grid(cells, 1.0) if support is None else support
    h0 = random_hermitian(2, rng)
    h1 = random_hermitian(2, rng)
    rates = random_psd(4, rng, scale=rate)
    jumps = random_psd(4, rng, scale=rate / support.size)

    def hamiltonian(points: RealArray) -> Operator:
        return np.asarray(h0[None] + points[:, 0, None, None] * h1[None], dtype=np.complex128)

    def kernel(z: RealArray, zp: RealArray) -> Operator:
        profile = np.exp(-((z[:, None, 0] - zp[None, :, 0]) ** 2))
        return np.asarray(profile[:, :, None, None] * jumps, dtype=np.complex128)

    spec = CouplingSpec(support=support, basis=make_su_basis(2), hamiltonian=hamiltonian,
                        lindblad=_constant(rates), kernel=kernel, label=f"random:{seed}")
    masses = rng.dirichlet(np.ones(support.size)) / support.weights
    blocks = np.stack([m * GROUND_STATE for m in masses])
    return BuiltinModel(
        name="random",
        spec=spec,
        initial_state=HybridStateGrid(grid=support, blocks=blocks),
        observables=(_spin("sigma_z", PAULI_Z),),
        amplitudes=spec.amplitudes(),
    )


@register("gaussian_jump")
def gaussian_jump(*, seed: int = 0, support: Support | None = None, gamma: float = 1.0,
                  width: float = 1.0, shift: Sequence[float] = (0.3, 0.0), mixing: float = 0.5,
                  cells: int = 8) -> BuiltinModel:
    """Gaussian jump amplitudes H(z|z') = g(z - z' - s) c with c = v v^dagger, v = (1, mixing, 0, 0)."""
    support = build_grid([(-4.0, 4.0, cells), (-4.0, 4.0, cells)]) if support is None else support
    s = np.asarray(shift, dtype=np.float64)
    v = np.array([1.0, mixing, 0.0, 0.0])
    coupling = np.outer(v, v).astype(np.complex128)
    norm = gamma / (2.0 * math.pi * width**2) ** support.n

    def amplitude(z: RealArray, zp: RealArray) -> Operator:
        disp = z[:, None, :] - zp[None, :, :] - s
        profile = norm * np.exp(-0.5 * np.sum(disp**2, axis=-1) / width**2)
        return np.asarray(profile[:, :, None, None] * coupling, dtype=np.complex128)

    spec = CouplingSpec(support=support, basis=make_su_basis(2), kernel=amplitude, label="gaussian_jump")
    return BuiltinModel(
        name="gaussian_jump",
        spec=spec,
        initial_state=_gaussian_state(support, MAXIMALLY_MIXED, np.zeros(2 * support.n), 1.0),
        observables=(_position(), _spin("sigma_x", PAULI_X)),
        amplitudes=spec.amplitudes(),
    )


@register("dd_violator")
def dd_violator(*, seed: int = 0, support: Support | None = None) -> BuiltinModel:
    """Manufactured constant moments with <D0> = 1, <D1>_x = 2, <D2>_xx = 1 at I/2.

    The tables are not derived from any amplitudes; they exist to
    exercise the FAIL branch of the diffusion-decoherence check.
    """
    support = _single_atom() if support is None else support
    d0 = np.diag([0.0, 1.0, 1.0, 1.0]) / 3.0
    d1 = np.zeros((2, 4, 4))
    d1[0] = np.diag([0.0, 2.0, 2.0, 2.0]) / 3.0
    d2 = np.zeros((2, 2, 4, 4))
    d2[0, 0] = np.diag([1.0, 0.0, 0.0, 0.0])
    spec = CouplingSpec(support=support, basis=make_su_basis(2), label="dd_violator")
    return BuiltinModel(
        name="dd_violator",
        spec=spec,
        initial_state=_atom_state(support, MAXIMALLY_MIXED),
        observables=(_spin("sigma_z", PAULI_Z),),
        moments=moments_from_tables(support, d0, d1, d2),
    )


@dataclass(frozen=True)
class ModelTables:
    """Constant coupling tables for a model given numerically.

    ``lindblad`` is lambda^{mu nu} in the su(d) basis; drift and
    diffusion are per-axis constants; moment tables, when present, are
    (D, D), (2n, D, D) and (2n, 2n, D, D).
    """

    dim: int
    hamiltonian: Operator | None = None
    lindblad: Operator | None = None
    drift: RealArray | None = None
    diffusion: RealArray | None = None
    moments: tuple[Operator, Operator, Operator] | None = None
    observables: tuple[HybridObservable, ...] = field(default_factory=tuple)


def model_from_tables(tables: ModelTables, support: Support, initial_state: HybridStateGrid | None = None,
                      label: str = "tables") -> BuiltinModel:
    """Wrap constant numeric tables as a model on ``support``."""
    axes = 2 * support.n
    drift = tables.drift
    diffusion = tables.diffusion
    spec = CouplingSpec(
        support=support,
        basis=make_su_basis(tables.dim),
        hamiltonian=None if tables.hamiltonian is None else _constant(tables.hamiltonian),
        lindblad=None if tables.lindblad is None else _constant(tables.lindblad),
        drift=None if drift is None else (lambda points: np.broadcast_to(drift, (points.shape[0], axes))),
        diffusion=None if diffusion is None else (
            lambda points: np.broadcast_to(diffusion, (points.shape[0], axes, axes))
        ),
        label=label,
    )
    if initial_state is None:
        initial_state = _atom_state(support, np.eye(tables.dim, dtype=np.complex128) / tables.dim)
    moments = None if tables.moments is None else moments_from_tables(support, *tables.moments)
    observables = tables.observables or (HybridObservable.product("trace", np.eye(tables.dim)),)
    return BuiltinModel(name=label, spec=spec, initial_state=initial_state, observables=observables,
                        moments=moments)
