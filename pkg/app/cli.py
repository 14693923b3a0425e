"""
Command-line front door: python -m app <command> [options]

Exit codes: 0 success or accept, 1 semantic reject (Weil failure, atlas
violation), 2 parse error, 3 input-validity error.
"""
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.core.config import get_settings
from app.core.errors import (
    AtlasRejection,
    InvalidParameterError,
    PrequantError,
    RejectionError,
    WeilRejection,
)
from app.core.logger import log, setup_logger
from app.models.schemas_api import Command, OutputFormat, RunConfig
from app.services.orchestrator import QuantizationOrchestrator

settings = get_settings()

COMMAND_HELP = {
    Command.CLASSIFY: "classify prequantizations of a presentation or complex",
    Command.CHECK_WEIL: "Weil integrality of a 2-form over every 2-cycle",
    Command.HOLONOMY: "holonomy of a connection around listed loops",
    Command.PROPAGATE: "homology-sector propagator of a complex",
    Command.DEMO_AB: "Aharonov-Bohm flux scan (CSV)",
    Command.DEMO_EXCHANGE: "boson/fermion propagators of two identical particles",
    Command.CHECK_ATLAS: "chart atlas consistency, glued factors and lift invariance",
}

DEFAULT_FORMATS = {Command.DEMO_AB: OutputFormat.CSV}

REJECTIONS = {Command.CHECK_WEIL: WeilRejection, Command.CHECK_ATLAS: AtlasRejection}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", help="structured input file (JSON)")
    common.add_argument("--hbar", type=float, help=f"reduced Planck constant (default {settings.HBAR})")
    common.add_argument("--tol", type=float, help="tolerance override")
    common.add_argument("--seed", type=int, help=f"random seed (default {settings.SEED})")
    common.add_argument("--steps", type=int, help="number of time steps")
    common.add_argument("--flux-grid", help="start:stop:count, e.g. 0:4pi:25 (pi tokens are scaled by hbar)")
    common.add_argument("--output", "-o", help="write output here instead of stdout")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="output format")
    common.add_argument("--engine", choices=["cover", "enumerate"], default="cover", help="sector engine")
    common.add_argument("--source", type=int, help="source vertex for demo-ab")
    common.add_argument("--detector", type=int, help="detector vertex for demo-ab")
    common.add_argument("--hopping", type=float, help=f"step-rule hopping (default {settings.DEFAULT_HOPPING})")
    common.add_argument("--lifts", type=int, default=10, help="random lifts per path for check-atlas")
    common.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG level")

    parser = argparse.ArgumentParser(
        prog="prequant",
        description="Classify prequantizations of multiply-connected spaces and simulate their propagators",
    )
    parser.add_argument("--version", action="version", version=f"{settings.APP_NAME} {settings.APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, text in COMMAND_HELP.items():
        sub.add_parser(command.value, parents=[common], help=text)
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(
            command=args.command,
            input=args.input,
            hbar=args.hbar,
            tol=args.tol,
            seed=args.seed,
            steps=args.steps,
            flux_grid=args.flux_grid,
            output=args.output,
            format=args.format,
            engine=args.engine,
            source=args.source,
            detector=args.detector,
            hopping=args.hopping,
            lifts=args.lifts,
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise InvalidParameterError(f"--{first['loc'][0]}: {first['msg']}") from e


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        setup_logger("DEBUG")

    orchestrator = QuantizationOrchestrator()
    try:
        config = make_config(args)
        result = orchestrator.run(config)
        fmt = config.format or DEFAULT_FORMATS.get(config.command, OutputFormat.TEXT)
        text = orchestrator.reports.render(result, fmt)
        if config.output is not None:
            orchestrator.reports.save(text, str(config.output))
        else:
            sys.stdout.write(text)
            sys.stdout.flush()
        if not result.accepted:
            raise REJECTIONS.get(config.command, RejectionError)(result.rejection or "rejected")
    except PrequantError as e:
        log.debug(f"{type(e).__name__}: {e.message}")
        prefix = "rejected" if isinstance(e, RejectionError) else "error"
        print(f"{prefix}: {e.message}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        # a model built inside an engine refused the derived values
        first = e.errors()[0]
        log.debug(f"ValidationError: {e}")
        print(f"error: {e.title}: {first['msg']}", file=sys.stderr)
        return InvalidParameterError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
