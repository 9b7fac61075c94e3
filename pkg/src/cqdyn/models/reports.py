"""Report documents written by the analyses and the command line front end."""

from typing import Literal, Self

from pydantic import BaseModel, Field, model_validator

from cqdyn.models.state import ComplexPair

Verdict = Literal["PASS", "FAIL"]
Vector3 = tuple[float, float, float]
SpectralClass = Literal["stationary", "rotating", "decaying_real", "decaying_spiral"]


class AngularMomentumRecord(BaseModel):
    """Orbital, spin and total angular momentum expectations at one time."""

    t: float
    L_orbital: Vector3
    S_spin: Vector3
    J_total: Vector3

    @model_validator(mode="after")
    def check_total(self) -> Self:
        for orbital, spin, total in zip(self.L_orbital, self.S_spin, self.J_total, strict=True):
            if abs(orbital + spin - total) > 1e-12 * max(1.0, abs(total)):
                raise ValueError("J_total must equal L_orbital + S_spin componentwise")
        return self


class BackreactionSummaryDocument(BaseModel):
    """Expectation values of the order 0, 1 and 2 moments."""

    d0: float
    d1: list[float]
    d2: list[list[float]]


class DiffusionDecoherenceVerdict(BaseModel):
    """Outcome of the diffusion-decoherence trade-off check.

    ``verdict`` uses the matrix form 2 d2 d0 - d1 d1^T >= 0; the
    componentwise form is reported alongside and disagreements flagged.
    """

    verdict: Verdict
    min_eigenvalue: float
    componentwise_verdict: Verdict
    worst_pair: tuple[str, str]
    worst_indices: tuple[int, int]
    worst_margin: float
    disagreement: bool
    summary: BackreactionSummaryDocument

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


class MetastableDocument(BaseModel):
    """Detected separation of decay rates."""

    m: int = Field(..., ge=1)
    ratio: float
    timescale: float = Field(..., description="1/|Re lambda_m|")
    lifetime: float = Field(..., description="1/|Re lambda_{m-1}|")


class SpectralReportDocument(BaseModel):
    """Classified Liouvillian spectrum."""

    eigenvalues: list[ComplexPair]
    classes: list[SpectralClass]
    zero_multiplicity: int = Field(..., ge=0)
    metastable: MetastableDocument | None = None
    near_defective: bool = False
    condition_number: float

    @model_validator(mode="after")
    def check_lengths(self) -> Self:
        if len(self.eigenvalues) != len(self.classes):
            raise ValueError("Every eigenvalue needs exactly one class")
        return self


class AuditReport(BaseModel):
    """Symmetry and conservation verdict for one observable."""

    observable: str
    symmetric: bool
    conserved: bool
    symmetry_residual: float
    conservation_residual: float
    dJdt_samples: list[float]
    dadt_consistent: bool = True
    transformations_tested: int = 0


class ConsistencyEntry(BaseModel):
    """One requirement of the hybrid-dynamics consistency checklist."""

    requirement: str
    status: Literal["PASS", "FAIL", "VIOLATED", "FLAG"]
    residual: float
    detail: str = ""


class ConsistencyReport(BaseModel):
    """Checklist of the consistency requirements for one model."""

    model: str
    horizon: float
    entries: list[ConsistencyEntry]

    def entry(self, requirement: str) -> ConsistencyEntry:
        """Look up an entry by requirement label."""
        for item in self.entries:
            if item.requirement == requirement:
                return item
        raise KeyError(requirement)


class NonconservationReport(BaseModel):
    """Rotational symmetry of the toy equation of motion versus conservation of J."""

    eom_rotationally_invariant: bool
    J_conserved: bool
    max_deviation_atomic: float
    max_deviation_grid: float | None = None
    symmetry_residual: float
    conservation_residual: float
    max_drift: float
    times: list[float]


class SimulationSummary(BaseModel):
    """Outcome of one integrated trajectory."""

    model: str
    steps: int = Field(..., ge=0)
    t_final: float
    dt: float
    snapshots: int = Field(..., ge=0)
    max_trace_deviation: float
    final_min_eigenvalue: float
    boundary_mass: float = 0.0
    observables: dict[str, float] = Field(default_factory=dict)
