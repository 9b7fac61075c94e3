"""Parameters of the qubit-plus-particle toy model."""

from typing import Annotated, Any, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator, field_validator

from cqdyn.models.state import matrix_to_pairs, pairs_to_matrix
from cqdyn.services.operator_algebra import validate_density


def parse_density_matrix(value: Any) -> npt.NDArray[np.complex128]:
    """Accept a complex array, real nested lists, or nested ``[re, im]`` pairs."""
    if isinstance(value, np.ndarray):
        arr = value.astype(np.complex128)
    else:
        raw = np.asarray(value)
        if raw.ndim == 3 and raw.shape[-1] == 2 and not np.iscomplexobj(raw):
            arr = pairs_to_matrix(value)
        else:
            arr = np.asarray(value, dtype=np.complex128)
    if arr.shape != (2, 2):
        raise ValueError(f"rho_i must be a 2x2 matrix, got shape {arr.shape}")
    return arr


DensityMatrix = Annotated[
    np.ndarray,  # type: ignore[type-arg]
    PlainValidator(parse_density_matrix),
    PlainSerializer(matrix_to_pairs, return_type=list),
]

Vector3 = tuple[float, float, float]


def _ground_state() -> npt.NDArray[np.complex128]:
    return np.array([[1, 0], [0, 0]], dtype=np.complex128)


class FinalStateSpec(BaseModel):
    """Classical profile rho_f(z) receiving the decohered mass.

    ``delta`` places a point mass at ``location``; ``gaussian`` is an
    isotropic Gaussian in q and p centered there (grid supports only).
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["delta", "gaussian"] = "delta"
    location: tuple[float, float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    sigma_q: float = Field(default=1.0, gt=0)
    sigma_p: float = Field(default=1.0, gt=0)

    @property
    def point(self) -> npt.NDArray[np.float64]:
        return np.array(self.location, dtype=np.float64)

    def gaussian_density(self, points: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Unnormalized Gaussian profile evaluated at (m, 6) points."""
        shifted = points - self.point
        q2 = np.sum(shifted[:, :3] ** 2, axis=1) / self.sigma_q**2
        p2 = np.sum(shifted[:, 3:] ** 2, axis=1) / self.sigma_p**2
        return np.asarray(np.exp(-0.5 * (q2 + p2)), dtype=np.float64)


class ToyModelParams(BaseModel):
    """Parameters of the toy model.

    Attributes:
        kappa: Decoherence rate (1/time)
        q0: Initial position
        p0: Initial momentum
        rho_i: Initial qubit density matrix
        hbar: Reduced Planck constant entering the spin angular momentum
        final_state: Classical profile of the final state
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kappa: float = Field(default=0.5, gt=0)
    q0: Vector3 = (1.0, 0.0, 0.0)
    p0: Vector3 = (0.0, 1.0, 0.0)
    rho_i: DensityMatrix = Field(default_factory=_ground_state)
    hbar: float = Field(default=1.0, gt=0)
    final_state: FinalStateSpec = Field(default_factory=FinalStateSpec)

    @field_validator("rho_i")
    @classmethod
    def validate_rho_i(cls, v: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        """Require a valid density matrix at 1e-10."""
        report = validate_density(v, tol=1e-10)
        if not report.valid:
            raise ValueError(
                "rho_i is not a density matrix "
                f"(hermiticity {report.hermiticity_residual:.3g}, "
                f"min eigenvalue {report.min_eigenvalue:.3g}, "
                f"trace deviation {report.trace_deviation:.3g})"
            )
        return v

    @property
    def z0(self) -> npt.NDArray[np.float64]:
        """Initial phase-space point (q0, p0)."""
        return np.array([*self.q0, *self.p0], dtype=np.float64)

    def rotated(self, r: npt.ArrayLike, u: npt.ArrayLike) -> "ToyModelParams":
        """Parameters with (q0, p0, rho_i) -> (R q0, R p0, U rho_i U^dagger); rho_f is kept."""
        mat = np.asarray(r, dtype=np.float64)
        unitary = np.asarray(u, dtype=np.complex128)
        q = mat @ np.array(self.q0)
        p = mat @ np.array(self.p0)
        rho = unitary @ self.rho_i @ unitary.conj().T
        return self.model_copy(
            update={
                "q0": (float(q[0]), float(q[1]), float(q[2])),
                "p0": (float(p[0]), float(p[1]), float(p[2])),
                "rho_i": rho,
            }
        )
