"""``audit``: Noether audit of the model's charge and the consistency checklist."""

from cqdyn.cli.context import RunContext
from cqdyn.cli.output import write_json
from cqdyn.core.exceptions import EXIT_OK, ConfigError
from cqdyn.models.reports import AuditReport, ConsistencyReport
from cqdyn.services.conservation_audit import consistency_suite, noether_audit


def audit_report(context: RunContext) -> AuditReport:
    """Write ``audit.json``.

    Raises:
        ConfigError: If the model has no charge to audit
    """
    model = context.model
    if model.charge is None:
        raise ConfigError(f"Model {model.name!r} has no charge to audit", key="model")
    config = context.config
    report = noether_audit(
        model.audit_subject(context.initial_state),
        model.charge,
        model.transformations(config.rotations, config.seed),
        horizon=config.horizon,
        seed=config.seed,
    )
    return write_json(context.out_dir / "audit.json", report)


def consistency_report(context: RunContext) -> ConsistencyReport:
    """Write ``consistency.json``."""
    config = context.config
    report = consistency_suite(context.model.audit_subject(context.initial_state), config.horizon,
                               seed=config.seed)
    return write_json(context.out_dir / "consistency.json", report)


def run(context: RunContext) -> int:
    audit_report(context)
    consistency_report(context)
    return EXIT_OK
