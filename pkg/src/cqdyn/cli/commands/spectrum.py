"""``spectrum``: diagonalize the Liouvillian and classify its eigenvalues."""

from cqdyn.cli.context import RunContext
from cqdyn.cli.output import write_json
from cqdyn.core.exceptions import EXIT_OK
from cqdyn.models.reports import SpectralReportDocument
from cqdyn.services.generator import build_liouvillian_matrix
from cqdyn.services.spectral import classify_spectrum, spectral_report_document, steady_states


def spectrum_report(context: RunContext) -> SpectralReportDocument:
    """Write ``spectrum.json``.

    Raises:
        CapacityError: If the model exceeds the dense size cap
    """
    spec = context.model.spec
    matrix = build_liouvillian_matrix(spec)
    report = classify_spectrum(matrix)
    steady_states(matrix, spec.support, spec.dim, report)
    return write_json(context.out_dir / "spectrum.json", spectral_report_document(report))


def run(context: RunContext) -> int:
    spectrum_report(context)
    return EXIT_OK
