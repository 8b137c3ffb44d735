"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterator

from pydantic import ValidationError

from pdmeta.config import get_settings
from pdmeta.logging import bind_model, bind_run_context, configure_logging, get_logger
from pdmeta.schemas import GeneratorSpecPayload, spec_fingerprint
from pdmeta.services import catalog, discrete, export
from pdmeta.services.catalog import CatalogEntry
from pdmeta.services.discrete import DimensionMismatchError, RadialGrid, make_grid
from pdmeta.services.eigensolve import EigenConvergenceError, qr_eigenvalues, spectrum_classify
from pdmeta.services.funcspace import Domain, DomainError
from pdmeta.services.generator import ConstructionError, GeneratorSpec, construct
from pdmeta.services.quadrature import QuadratureAccuracyError
from pdmeta.services.validators import ValidationException, validate_positive
from pdmeta.services.verifier import ReportOptions, full_report


logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERICAL = 4

MODES = {"half": Domain.HALF_LINE, "full": Domain.FULL_LINE}
OPERATORS = ("H", "O", "O_dagger", "eta_factored", "eta_direct")


@dataclass(frozen=True)
class RunConfig:
    """Parsed command-line options shared by the model commands."""

    command: str
    spec_path: Path | None = None
    catalog_id: str | None = None
    r_min: float | None = None
    r_max: float | None = None
    n: int | None = None
    mode: Domain | None = None
    beta: float | None = None
    tol: float | None = None
    output_format: str = "csv"
    out: Path | None = None
    perturb_W: float = 0.0
    spectral: bool = False
    operator: str = "H"

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        tol = getattr(args, "tol", None)
        if tol is not None:
            validate_positive("--tol", tol)
        mode = getattr(args, "mode", None)
        return cls(
            command=args.command,
            spec_path=Path(args.spec) if getattr(args, "spec", None) else None,
            catalog_id=getattr(args, "catalog", None),
            r_min=getattr(args, "rmin", None),
            r_max=getattr(args, "rmax", None),
            n=getattr(args, "n", None),
            mode=MODES[mode] if mode else None,
            beta=getattr(args, "beta", None),
            tol=tol,
            output_format=getattr(args, "format", "csv"),
            out=Path(args.out) if getattr(args, "out", None) else None,
            perturb_W=getattr(args, "perturb_W", 0.0) or 0.0,
            spectral=getattr(args, "spectral", False),
            operator=getattr(args, "operator", "H"),
        )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", metavar="PATH", help="JSON generator spec file.")
    source.add_argument("--catalog", metavar="ID", help="Catalog entry id, see 'catalog list'.")
    parser.add_argument("--rmin", type=float, help="Left grid endpoint.")
    parser.add_argument("--rmax", type=float, help="Right grid endpoint.")
    parser.add_argument("-n", type=int, help="Number of grid nodes.")
    parser.add_argument("--mode", choices=sorted(MODES), help="Half-line or symmetric full-line grid.")
    parser.add_argument("--beta", type=float, help="Override the eigenvalue shift beta.")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format.")
    parser.add_argument("--out", metavar="PATH", help="Output file (default: stdout).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmeta",
        description="Pseudo-Hermitian position-dependent-mass Hamiltonians: construction and checks.",
    )
    parser.add_argument("--log-level", help="Logging level (default from PDM_LOG_LEVEL).")
    commands = parser.add_subparsers(dest="command", required=True)

    construct_cmd = commands.add_parser("construct", help="Sample the constructed fields on a grid.")
    _add_model_options(construct_cmd)

    verify_cmd = commands.add_parser("verify", help="Run the residual checks and write a report.")
    _add_model_options(verify_cmd)
    verify_cmd.add_argument("--perturb-W", dest="perturb_W", type=float, default=0.0, help="Add a constant to W.")
    verify_cmd.add_argument("--spectral", action="store_true", help="Also run the eta-orthogonality check.")
    verify_cmd.set_defaults(format="json")

    spectrum_cmd = commands.add_parser("spectrum", help="Eigenvalues of the discretized H.")
    _add_model_options(spectrum_cmd)
    spectrum_cmd.add_argument("--tol", type=float, help="Classification tolerance.")

    matrix_cmd = commands.add_parser("matrix", help="Dump a discretized operator.")
    _add_model_options(matrix_cmd)
    matrix_cmd.add_argument("--operator", choices=OPERATORS, default="H")

    crosscheck_cmd = commands.add_parser("crosscheck", help="Compare catalog closed forms with the pipeline.")
    crosscheck_cmd.add_argument("id", nargs="?", help="Catalog entry id.")
    crosscheck_cmd.add_argument("--all", action="store_true", help="Check every worked example.")
    crosscheck_cmd.add_argument("--probes", type=int, help="Number of probe points.")
    crosscheck_cmd.add_argument("--format", choices=["csv", "json"], default="json")
    crosscheck_cmd.add_argument("--out", metavar="PATH")

    catalog_cmd = commands.add_parser("catalog", help="Inspect catalog entries.")
    catalog_sub = catalog_cmd.add_subparsers(dest="catalog_command", required=True)
    catalog_sub.add_parser("list", help="List entry ids.")
    show = catalog_sub.add_parser("show", help="Show one entry and its spec.")
    show.add_argument("id")
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def load_spec(path: Path) -> GeneratorSpec:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationException(f"Cannot read spec file {str(path)!r}: {exc.strerror}.") from exc
    return GeneratorSpecPayload.model_validate_json(text).to_spec()


def resolve_spec(config: RunConfig) -> tuple[GeneratorSpec, CatalogEntry | None]:
    entry = catalog.get_example(config.catalog_id) if config.catalog_id else None
    spec = entry.spec if entry is not None else load_spec(config.spec_path)
    if config.beta is not None:
        spec = replace(spec, beta=config.beta)
    bind_model(spec_fingerprint(spec))
    return spec, entry


def default_grid(domain: Domain) -> RadialGrid:
    settings = get_settings()
    if domain is Domain.FULL_LINE:
        width = settings.full_line_half_width
        return RadialGrid(-width, width, settings.grid_points, Domain.FULL_LINE)
    return RadialGrid(settings.half_line_rmin, settings.half_line_rmax, settings.grid_points, Domain.HALF_LINE)


def resolve_grid(
    config: RunConfig,
    spec: GeneratorSpec,
    entry: CatalogEntry | None,
    default_n: int | None = None,
) -> RadialGrid:
    """Catalog or settings grid, overridden flag by flag."""

    base = entry.grid if entry is not None else default_grid(spec.domain)
    mode = config.mode or base.mode
    if mode is not base.mode:
        base = default_grid(mode)
    n = config.n if config.n is not None else (default_n or base.n)
    r_min = config.r_min if config.r_min is not None else base.r_min
    r_max = config.r_max if config.r_max is not None else base.r_max
    return make_grid(r_min, r_max, n, mode)


@contextmanager
def open_output(path: Path | None) -> Iterator[IO[str]]:
    if path is None:
        yield sys.stdout
        return
    with path.open("w", encoding="utf-8", newline="") as stream:
        yield stream


def exit_code_for(exc: BaseException) -> int | None:
    if isinstance(exc, ConstructionError):
        return exit_code_for(exc.cause)
    if isinstance(exc, (ValidationException, ValidationError, DimensionMismatchError)):
        return EXIT_USAGE
    if isinstance(exc, DomainError):
        return EXIT_DOMAIN
    if isinstance(exc, (QuadratureAccuracyError, EigenConvergenceError)):
        return EXIT_NUMERICAL
    return None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_construct(config: RunConfig) -> int:
    spec, entry = resolve_spec(config)
    grid = resolve_grid(config, spec, entry)
    model = construct(spec)
    with open_output(config.out) as stream:
        if config.output_format == "json":
            export.write_fields_json(stream, model, grid)
        else:
            export.write_fields_csv(stream, model, grid)
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    spec, entry = resolve_spec(config)
    grid = resolve_grid(config, spec, entry)
    spectrum_grid = None
    if config.spectral:
        spectrum_grid = make_grid(grid.r_min, grid.r_max, get_settings().spectrum_points, grid.mode)
    options = ReportOptions(
        perturb_W=config.perturb_W,
        spectral=config.spectral,
        spectrum_grid=spectrum_grid,
        normalization_constant=entry.psi_constant if entry is not None else None,
        decay=entry.decay if entry is not None else None,
    )
    report = full_report(spec, grid, options)
    with open_output(config.out) as stream:
        if config.output_format == "json":
            stream.write(report.to_payload().dump_json())
            stream.write("\n")
        else:
            stream.write("name,residual,threshold,pass,report_only\n")
            for check in report.checks:
                threshold = "" if check.threshold is None else export.FLOAT_FORMAT % check.threshold
                stream.write(
                    f"{check.name},{export.FLOAT_FORMAT % check.residual},{threshold},"
                    f"{str(check.passed).lower()},{str(check.report_only).lower()}\n"
                )
    return EXIT_OK if report.passed else EXIT_VERIFICATION_FAILED


def cmd_spectrum(config: RunConfig) -> int:
    spec, entry = resolve_spec(config)
    grid = resolve_grid(config, spec, entry, default_n=get_settings().spectrum_points)
    model = construct(spec)
    H = discrete.discretize_H(model, grid)
    classification = spectrum_classify(qr_eigenvalues(H), config.tol)
    summary = export.spectrum_summary(classification, H, with_eigenvalues=config.output_format == "json")
    logger.info(
        "spectrum_classified",
        n=summary.n,
        counts=summary.counts,
        unpaired_fraction=summary.unpaired_fraction,
        trace_error=summary.trace_error,
    )
    with open_output(config.out) as stream:
        if config.output_format == "json":
            stream.write(summary.model_dump_json(indent=2))
            stream.write("\n")
        else:
            export.write_spectrum_csv(stream, classification)
    return EXIT_OK


def cmd_matrix(config: RunConfig) -> int:
    spec, entry = resolve_spec(config)
    grid = resolve_grid(config, spec, entry)
    model = construct(spec)
    builders = {
        "H": lambda: discrete.discretize_H(model, grid),
        "O": lambda: discrete.discretize_O(model, grid),
        "O_dagger": lambda: discrete.discretize_O_dagger(model, grid).formula,
        "eta_factored": lambda: discrete.discretize_eta(model, grid, "factored"),
        "eta_direct": lambda: discrete.discretize_eta(model, grid, "direct"),
    }
    matrix = builders[config.operator]()
    with open_output(config.out) as stream:
        if config.output_format == "json":
            export.write_matrix_json(stream, matrix, grid, config.operator)
        else:
            export.write_matrix_csv(stream, matrix, grid, config.operator)
    return EXIT_OK


def cmd_crosscheck(args: argparse.Namespace) -> int:
    if args.all:
        ids = list(catalog.EXAMPLE_IDS)
    elif args.id:
        ids = [args.id]
    else:
        raise ValidationException("crosscheck needs an entry id or --all.")
    if args.probes is not None and args.probes < 2:
        raise ValidationException(f"--probes must be at least 2, got {args.probes}.")

    records = [catalog.crosscheck(entry_id, args.probes) for entry_id in ids]
    out = Path(args.out) if args.out else None
    with open_output(out) as stream:
        if args.format == "json":
            for record in records:
                stream.write(record.model_dump_json(by_alias=True))
                stream.write("\n")
        else:
            stream.write("entry,field,deviation,tolerance,pass\n")
            for record in records:
                for name, value in record.deviations.items():
                    ok = str(value <= record.tolerance).lower()
                    stream.write(f"{record.entry},{name},{export.FLOAT_FORMAT % value},{record.tolerance!r},{ok}\n")
    for record in records:
        for note in record.notes:
            logger.info("crosscheck_note", entry=record.entry, note=note)
    return EXIT_OK if all(record.passed for record in records) else EXIT_VERIFICATION_FAILED


def cmd_catalog(args: argparse.Namespace) -> int:
    if args.catalog_command == "list":
        for entry_id in catalog.list_ids():
            sys.stdout.write(f"{entry_id}\t{catalog.get_example(entry_id).title}\n")
        return EXIT_OK

    entry = catalog.get_example(args.id)
    summary = entry.summary().model_dump(mode="json")
    summary["spec"] = GeneratorSpecPayload.from_spec(entry.spec).model_dump(mode="json", exclude_none=True)
    sys.stdout.write(json.dumps(summary, indent=2))
    sys.stdout.write("\n")
    return EXIT_OK


MODEL_COMMANDS = {
    "construct": cmd_construct,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "matrix": cmd_matrix,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.log_level or get_settings().log_level)
    bind_run_context(command=args.command)
    try:
        if args.command in MODEL_COMMANDS:
            return MODEL_COMMANDS[args.command](RunConfig.from_args(args))
        if args.command == "crosscheck":
            return cmd_crosscheck(args)
        return cmd_catalog(args)
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        logger.error(
            "command_failed",
            command=args.command,
            error_type=type(exc).__name__,
            error=getattr(exc, "message", str(exc)),
            exit_code=code,
        )
        return code


if __name__ == "__main__":
    sys.exit(main())
