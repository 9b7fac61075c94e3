"""Spectral analysis of the Liouvillian: classification, steady states, asymptotics and metastability."""

from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg

from cqdyn.core.config import settings
from cqdyn.core.exceptions import GeneratorValidityError, ShapeError
from cqdyn.core.logging import get_logger
from cqdyn.models.reports import MetastableDocument, SpectralReportDocument
from cqdyn.services.evolution import evolve_exact
from cqdyn.services.hybrid_state import HybridStateGrid
from cqdyn.services.operator_algebra import Operator, RealArray, hermiticity_residual, hermitize
from cqdyn.services.phase_space import Support

logger = get_logger(__name__)

STATIONARY = "stationary"
ROTATING = "rotating"
DECAYING_REAL = "decaying_real"
DECAYING_SPIRAL = "decaying_spiral"

LEVEL_SEPARATION = 1e-6
STATE_TOL = 1e-8


@dataclass(frozen=True)
class MetastableGap:
    """Separation between consecutive distinct decay rates.

    Attributes:
        m: Index of the fast level in the ascending list of distinct rates
        ratio: |Re lambda_m| / |Re lambda_{m-1}|
        timescale: 1/|Re lambda_m|, after which only the slow levels remain
        lifetime: 1/|Re lambda_{m-1}|, the lifetime of the slowest metastable level
    """

    m: int
    ratio: float
    timescale: float
    lifetime: float


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Eigen-decomposition of a Liouvillian with its physical classification.

    Eigenvalues are sorted by descending real part; ``right`` holds the
    matching eigenvectors as columns.
    """

    eigenvalues: npt.NDArray[np.complex128]
    classes: tuple[str, ...]
    zero_multiplicity: int
    steady_basis: Operator
    right: Operator
    condition_number: float
    near_defective: bool
    scale: float
    metastable: MetastableGap | None = None

    @property
    def has_rotating(self) -> bool:
        return ROTATING in self.classes

    def count(self, label: str) -> int:
        return sum(1 for c in self.classes if c == label)


def _spectral_scale(eigenvalues: npt.NDArray[np.complex128]) -> float:
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return scale if scale > 0 else 1.0


def classify_spectrum(
    matrix: Operator, tol_zero: float | None = None, ratio_threshold: float | None = None
) -> SpectralReport:
    """Diagonalize L and tag every eigenvalue.

    With threshold tau = tol_zero * max|lambda|: stationary if |lambda| <= tau;
    rotating if |Re| <= tau < |Im|; decaying_real if Re < 0 and |Im| <= tau;
    decaying_spiral otherwise.

    Raises:
        GeneratorValidityError: If an eigenvalue has Re > tau
    """
    mat = np.asarray(matrix, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeError("Liouvillian must be square", details={"shape": list(mat.shape)})
    tol_zero = settings.zero_tol if tol_zero is None else tol_zero
    values, vectors = scipy.linalg.eig(mat)
    order = np.lexsort((-values.imag, -values.real))
    values = np.asarray(values[order], dtype=np.complex128)
    vectors = np.asarray(vectors[:, order], dtype=np.complex128)
    scale = _spectral_scale(values)
    threshold = tol_zero * scale
    classes: list[str] = []
    for value in values:
        if value.real > threshold:
            raise GeneratorValidityError(
                "Eigenvalue with positive real part: generator is not contractive",
                details={"eigenvalue": [float(value.real), float(value.imag)], "threshold": threshold},
            )
        if abs(value) <= threshold:
            classes.append(STATIONARY)
        elif abs(value.real) <= threshold:
            classes.append(ROTATING)
        elif abs(value.imag) <= threshold:
            classes.append(DECAYING_REAL)
        else:
            classes.append(DECAYING_SPIRAL)
    condition = float(np.linalg.cond(vectors))
    if not np.isfinite(condition):
        condition = float(np.finfo(np.float64).max)
    near_defective = condition > settings.defective_condition
    if near_defective:
        logger.warning("Eigenvectors are near-defective", condition_number=condition)
    steady = scipy.linalg.null_space(mat, rcond=tol_zero).T if mat.size else np.zeros((0, 0))
    return SpectralReport(
        eigenvalues=values,
        classes=tuple(classes),
        zero_multiplicity=classes.count(STATIONARY),
        steady_basis=np.asarray(steady, dtype=np.complex128),
        right=vectors,
        condition_number=condition,
        near_defective=near_defective,
        scale=scale,
        metastable=metastable_gap(values, ratio_threshold, tol_zero),
    )


def metastable_gap(
    eigenvalues: npt.ArrayLike, ratio_threshold: float | None = None, tol_zero: float | None = None
) -> MetastableGap | None:
    """First large ratio between consecutive distinct decay rates.

    Rates |Re lambda| at or below tol_zero * max|lambda| are stationary or
    rotating and excluded; the remaining rates are merged into distinct
    levels in ascending order.

    Returns:
        The gap, or None when no ratio reaches the threshold
    """
    ratio_threshold = settings.metastable_ratio if ratio_threshold is None else ratio_threshold
    tol_zero = settings.zero_tol if tol_zero is None else tol_zero
    values = np.asarray(eigenvalues, dtype=np.complex128)
    if values.size == 0:
        return None
    rates = np.sort(np.abs(values.real))
    rates = rates[rates > tol_zero * _spectral_scale(values)]
    levels: list[float] = []
    for rate in rates:
        if not levels or rate > levels[-1] * (1.0 + LEVEL_SEPARATION):
            levels.append(float(rate))
    for m in range(1, len(levels)):
        ratio = levels[m] / levels[m - 1]
        if ratio >= ratio_threshold:
            logger.info("Metastable gap detected", m=m, ratio=ratio)
            return MetastableGap(m=m, ratio=ratio, timescale=1.0 / levels[m], lifetime=1.0 / levels[m - 1])
    return None


def steady_states(matrix: Operator, support: Support, dim: int,
                  report: SpectralReport | None = None) -> list[HybridStateGrid]:
    """Kernel vectors of L that devectorize to normalized positive states.

    Returns:
        The qualifying states, each with unit total trace; may be empty
    """
    report = classify_spectrum(matrix) if report is None else report
    states: list[HybridStateGrid] = []
    for vec in report.steady_basis:
        state = HybridStateGrid.devectorize(support, vec, dim)
        total = complex(np.einsum("kaa->", state.masses))
        if abs(total) <= STATE_TOL:
            continue
        state = state.scaled(1.0 / total)
        if hermiticity_residual(state.blocks) > STATE_TOL:
            continue
        lowest = float(np.min(np.linalg.eigvalsh(hermitize(state.blocks))))
        if lowest < -STATE_TOL:
            continue
        states.append(state)
    if not states:
        logger.warning("No normalizable positive steady state in the kernel",
                       kernel_dimension=int(report.steady_basis.shape[0]))
    return states


@dataclass(frozen=True, eq=False)
class AsymptoticResult:
    """Long-time behaviour of one initial state.

    ``kind`` is ``limit`` when the state converges and ``orbit`` when
    rotating modes persist; ``state`` is then the t=0 point of the
    asymptotic orbit and ``frequencies`` its angular frequencies.
    """

    kind: Literal["limit", "orbit"]
    state: HybridStateGrid
    method: Literal["projector", "long_time"]
    frequencies: RealArray


def asymptotic_projection(matrix: Operator, initial: HybridStateGrid,
                          report: SpectralReport | None = None) -> AsymptoticResult:
    """Project a state onto the non-decaying eigenspace of L.

    Uses the spectral projector V_S (V^{-1})_S; when the eigenvectors are
    near-defective the limit is taken by long-time exact evolution instead.
    """
    report = classify_spectrum(matrix) if report is None else report
    keep = np.array([c in (STATIONARY, ROTATING) for c in report.classes])
    rotating = np.array([c == ROTATING for c in report.classes], dtype=bool)
    frequencies = np.asarray(report.eigenvalues.imag[rotating], dtype=np.float64)
    kind: Literal["limit", "orbit"] = "orbit" if report.has_rotating else "limit"
    if report.near_defective and not report.has_rotating:
        decays = np.abs(report.eigenvalues.real[~keep])
        horizon = 50.0 / float(np.min(decays)) if decays.size else 100.0
        logger.info("Asymptotic limit by long-time evolution", t=horizon)
        state = evolve_exact(matrix, initial, horizon)
        return AsymptoticResult(kind=kind, state=state, method="long_time", frequencies=frequencies)
    coefficients = np.linalg.solve(report.right, initial.vectorize())
    projected = report.right[:, keep] @ coefficients[keep]
    state = HybridStateGrid.devectorize(initial.grid, projected, initial.dim)
    return AsymptoticResult(kind=kind, state=state, method="projector", frequencies=frequencies)


def adjoint_matrix(matrix: Operator, weights: npt.ArrayLike, dim: int) -> Operator:
    """Matrix of L^dagger under the weighted pairing: W^{-1} L^H W.

    Args:
        matrix: Liouvillian over vectorized states
        weights: Quadrature weight per cell
        dim: Hilbert-space dimension
    """
    w = np.repeat(np.asarray(weights, dtype=np.float64), dim * dim)
    if w.shape[0] != matrix.shape[0]:
        raise ShapeError("Weights do not match the Liouvillian", details={"cells": len(np.atleast_1d(weights))})
    return np.asarray((np.conj(matrix.T) * w[None, :]) / w[:, None], dtype=np.complex128)


def spectral_report_document(report: SpectralReport) -> SpectralReportDocument:
    """JSON document for a spectral report."""
    metastable = None
    if report.metastable is not None:
        metastable = MetastableDocument(
            m=report.metastable.m,
            ratio=report.metastable.ratio,
            timescale=report.metastable.timescale,
            lifetime=report.metastable.lifetime,
        )
    return SpectralReportDocument(
        eigenvalues=[[float(v.real), float(v.imag)] for v in report.eigenvalues],
        classes=list(report.classes),  # type: ignore[arg-type]
        zero_multiplicity=report.zero_multiplicity,
        metastable=metastable,
        near_defective=report.near_defective,
        condition_number=report.condition_number,
    )
