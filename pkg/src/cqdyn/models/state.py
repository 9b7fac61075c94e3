"""JSON documents for hybrid-state checkpoints and fixtures.

Complex numbers are written as ``[re, im]`` pairs; a d x d matrix is a
list of d rows of d pairs.
"""

from typing import Annotated, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field

ComplexPair = Annotated[list[float], Field(min_length=2, max_length=2)]
ComplexMatrix = list[list[ComplexPair]]


def matrix_to_pairs(matrix: npt.ArrayLike) -> ComplexMatrix:
    """Encode a complex matrix as nested ``[re, im]`` pairs."""
    arr = np.asarray(matrix, dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in arr]


def pairs_to_matrix(pairs: ComplexMatrix) -> npt.NDArray[np.complex128]:
    """Decode nested ``[re, im]`` pairs into a complex matrix."""
    arr = np.asarray(pairs, dtype=np.float64)
    return np.asarray(arr[..., 0] + 1j * arr[..., 1], dtype=np.complex128)


class AxisDocument(BaseModel):
    """One uniform grid axis."""

    min: float
    max: float
    count: int = Field(..., ge=1)


class GridStateDocument(BaseModel):
    """Grid state: support metadata plus one block per cell.

    Exactly one of ``axes`` (uniform grid) or ``points`` (atomic support)
    describes the support.
    """

    kind: Literal["grid"] = "grid"
    dim: int = Field(..., ge=1)
    axes: list[AxisDocument] | None = None
    points: list[list[float]] | None = None
    blocks: list[ComplexMatrix]


class AtomDocument(BaseModel):
    """One point mass."""

    z: list[float]
    M: ComplexMatrix


class AtomicStateDocument(BaseModel):
    """Atomic state: a list of point masses."""

    kind: Literal["atomic"] = "atomic"
    dim: int = Field(..., ge=1)
    atoms: list[AtomDocument]


StateDocument = Annotated[GridStateDocument | AtomicStateDocument, Field(discriminator="kind")]


class StateEnvelope(BaseModel):
    """Top-level checkpoint file."""

    t: float = 0.0
    state: StateDocument
