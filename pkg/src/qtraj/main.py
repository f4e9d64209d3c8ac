import argparse
import logging
import sys

from pydantic import ValidationError

from qtraj.commands import basis, mixture, synthesize, target, two_particle, verify, wigner
from qtraj.commands.common import common_parser, overrides_from_args
from qtraj.config import load_run_config, settings
from qtraj.exceptions import ConfigError, QTrajError
from qtraj.services.manifest_service import record_report, write_manifest
from qtraj.states.run_state import new_run_state

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_ERROR = 2

COMMANDS = (basis, wigner, target, synthesize, verify, mixture, two_particle)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtraj", description="Quantum trajectories and quantum-matrix phase space")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    parents = [common_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def _config_error(e: ValidationError) -> ConfigError:
    fields = "; ".join(
        f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}" for error in e.errors()
    )
    return ConfigError(f"invalid run configuration ({fields})")


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand. Returns 0 when every check passes, 1 on failed checks, 2 on errors."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if (args.verbose or settings.debug) else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )

    try:
        try:
            config = load_run_config(args.config, overrides_from_args(args))
        except ValidationError as e:
            raise _config_error(e) from e
    except QTrajError as e:
        logger.error("[Config] %s", e)
        return EXIT_ERROR

    state = new_run_state(config.model_dump(mode="json"), str(config.output_dir))
    logger.info("[Run] %s -> %s", config.subcommand.value, config.output_dir)
    try:
        report = args.handler(config, state)
    except QTrajError as e:
        logger.error("[Run] %s failed: %s", config.subcommand.value, e)
        state["errors"].append(f"{type(e).__name__}: {e}")
        write_manifest(state)
        return EXIT_ERROR

    record_report(state, report)
    manifest = write_manifest(state)
    for artifact in state["artifacts"]:
        print(f"{state['run_dir']}/{artifact['name']}  sha256={artifact['sha256']}")
    print(manifest)

    if not report.passed:
        logger.warning("[Run] failed checks: %s", ", ".join(report.failures()))
        return EXIT_CHECKS_FAILED
    return EXIT_OK


def start() -> None:
    sys.exit(main())


if __name__ == "__main__":
    start()
