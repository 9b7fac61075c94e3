"""``check-dd``: the diffusion-decoherence trade-off of the model's moments."""

from cqdyn.cli.context import RunContext
from cqdyn.cli.output import write_json
from cqdyn.core.exceptions import EXIT_OK, ConfigError
from cqdyn.models.reports import DiffusionDecoherenceVerdict
from cqdyn.services.generator import check_diffusion_decoherence


def dd_verdict(context: RunContext) -> DiffusionDecoherenceVerdict:
    """Write ``dd_check.json``; a FAIL verdict is data, not an error.

    Raises:
        ConfigError: If the model has neither amplitudes nor moments
    """
    model = context.model
    if not model.has_moments:
        raise ConfigError(f"Model {model.name!r} has no amplitudes or moments", key="model")
    verdict = check_diffusion_decoherence(model.backreaction())
    return write_json(context.out_dir / "dd_check.json", verdict)


def run(context: RunContext) -> int:
    dd_verdict(context)
    return EXIT_OK
