#!/usr/bin/env python3
# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command-line front end for the state and unitary compilers.

Usage:
    snapsynth prepare-state uniform:3            Compile a state preparation
    snapsynth prepare-fock 16 --scheme auto      Prepare a number state
    snapsynth synthesize-unitary fourier:4       Compile a unitary
    snapsynth verify plan.json                   Re-simulate a sequence or report
    snapsynth sweep spec.json --out counts.csv   Compare SNAP counts of both schemes

Exit codes: 0 success, 1 quality below threshold or failed compile, 2 bad input.
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from exceptions import InvalidArgumentError, OptimizationError, SynthesisError
from fock_core import (
    apply_sequence,
    basis_state,
    displacement_operator,
    sequence_unitary,
    state_fidelity,
    unitary_fidelity,
)
from optimizer import OptimizerConfig
from state_prep import (
    PrepPlan,
    SweepRow,
    TargetState,
    compile_fock_state,
    compile_state_prep,
    fit_power_law,
    gate_count_sweep,
)
from unitary_synth import (
    TargetUnitary,
    compile_unitary,
    fourier_unitary,
    kerr_unitary,
    permutation_unitary,
    random_unitary,
)
from wire import (
    SWEEP_COLUMNS,
    coefficients_from_list,
    document_sequence,
    document_target,
    dumps,
    matrix_from_dict,
    plan_to_dict,
    report_to_dict,
    sweep_row_to_dict,
    sweep_spec_from_dict,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_QUALITY = 1
EXIT_USAGE = 2
ENV_PREFIX = "SNAPSYNTH_"
INPUT_UNITARITY_TOLERANCE = 1e-8
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
TEMPLATE_DIR_PATH = Path(__file__).parent / "templates"
SWEEP_LOG_TEMPLATE_NAME = "sweep_log.txt.j2"


class RunConfig(BaseModel):
    """Settings of one CLI run, merged from flags, environment and defaults."""

    model_config = ConfigDict(frozen=True, extra="ignore")

    cutoff: Optional[int] = Field(
        default=None, ge=2, description="Cutoff override; derived from the target when unset"
    )
    max_evals: int = Field(default=4000, ge=1, description="Evaluations per optimization run")
    xtol: float = Field(default=1e-8, gt=0, description="Parameter tolerance of every run")
    ftol: float = Field(default=1e-12, gt=0, description="Objective tolerance of every run")
    seed: int = Field(default=0, ge=0, description="Seed for every randomized start")
    fidelity: float = Field(
        default=0.999, gt=0.0, le=1.0, description="Threshold for a successful exit"
    )
    scheme: Literal["linear", "sublinear", "auto"] = Field(
        default="auto", description="Fock preparation scheme"
    )
    out: Optional[str] = Field(default=None, description="Output path; stdout when unset")
    verbosity: int = Field(default=0, ge=0)
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="WARNING", description="Log level when -v is not given", examples=["INFO"]
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_case_level(cls, value: Any) -> Any:
        return value.upper() if isinstance(value, str) else value

    @classmethod
    def from_sources(cls, flags: Mapping[str, Any], environ: Mapping[str, str]) -> "RunConfig":
        """Merge flags over ``SNAPSYNTH_*`` environment variables over defaults."""
        values: Dict[str, Any] = {}
        for name in cls.model_fields:
            raw = environ.get(ENV_PREFIX + name.upper())
            if raw not in (None, ""):
                values[name] = raw
        values.update({name: value for name, value in flags.items() if value is not None})
        return cls(**values)

    def optimizer_config(self) -> OptimizerConfig:
        """Return the optimizer settings of this run."""
        return OptimizerConfig(
            max_evals=self.max_evals, xtol=self.xtol, ftol=self.ftol, seed=self.seed
        )


def _configure_logging(config: RunConfig) -> None:
    level = "DEBUG" if config.verbosity else config.log_level
    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT)


def _load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).write_text(text, encoding="utf-8")


def parse_state_spec(spec: str) -> TargetState:
    """Return the target named by ``fock:n``, ``uniform:N``, a JSON list or a JSON file.

    Explicit coefficient lists are normalized.

    Raises:
        InvalidArgumentError: on a malformed spec.
    """
    kind, _, argument = spec.partition(":")
    if kind in ("fock", "uniform") and argument:
        try:
            level = int(argument)
        except ValueError as e:
            raise InvalidArgumentError(f"Bad level in target spec {spec!r}") from e
        return TargetState.fock(level) if kind == "fock" else TargetState.uniform(level)
    data = json.loads(spec) if spec.lstrip().startswith("[") else _load_json(spec)
    coeffs = coefficients_from_list(data)
    norm = float(np.linalg.norm(coeffs))
    if norm == 0.0:
        raise InvalidArgumentError("Target coefficients are all zero")
    if norm != 1.0:
        logger.info("Normalizing target coefficients (norm %.15g)", norm)
    return TargetState(coeffs / norm)


def parse_unitary_spec(spec: str, seed: int = 0) -> np.ndarray:
    """Return the matrix named by a preset or stored in a JSON file.

    Presets are ``fourier:d``, ``permutation:d``, ``random:d`` and ``kerr:d``.

    Raises:
        InvalidArgumentError: on a malformed spec.
    """
    presets = {
        "fourier": fourier_unitary,
        "permutation": permutation_unitary,
        "kerr": kerr_unitary,
    }
    kind, _, argument = spec.partition(":")
    if kind in ("fourier", "permutation", "random", "kerr") and argument:
        try:
            dim = int(argument)
        except ValueError as e:
            raise InvalidArgumentError(f"Bad dimension in unitary spec {spec!r}") from e
        if dim < 1:
            raise InvalidArgumentError(f"Unitary dimension must be positive, got {dim}")
        return random_unitary(dim, seed) if kind == "random" else presets[kind](dim)
    return matrix_from_dict(_load_json(spec))


def _failure_document(error: SynthesisError, seed: int) -> Dict[str, Any]:
    best = error.best
    return {
        "kind": "failure",
        "seed": seed,
        "error": str(error),
        "best": dataclasses.asdict(best) if dataclasses.is_dataclass(best) else None,
    }


def _emit_plan(plan: PrepPlan, config: RunConfig) -> int:
    _write(dumps(plan_to_dict(plan, config.seed)), config.out)
    if plan.fidelity < config.fidelity:
        logger.warning("Plan fidelity %.12g below threshold %s", plan.fidelity, config.fidelity)
        return EXIT_QUALITY
    return EXIT_OK


def _emit_failure(error: SynthesisError, config: RunConfig) -> int:
    logger.error("%s", error)
    if isinstance(error.best, PrepPlan):
        _write(dumps(plan_to_dict(error.best, config.seed)), config.out)
    else:
        _write(dumps(_failure_document(error, config.seed)), config.out)
    return EXIT_QUALITY


def cmd_prepare_state(args: argparse.Namespace, config: RunConfig) -> int:
    """Compile a state preparation and write its plan."""
    target = parse_state_spec(args.target)
    try:
        plan = compile_state_prep(target, config.cutoff, config.optimizer_config())
    except SynthesisError as e:
        return _emit_failure(e, config)
    return _emit_plan(plan, config)


def cmd_prepare_fock(args: argparse.Namespace, config: RunConfig) -> int:
    """Prepare a number state with the configured scheme and write its plan."""
    if args.n < 0:
        raise InvalidArgumentError(f"Fock level must be non-negative, got {args.n}")
    try:
        plan = compile_fock_state(
            args.n, config.fidelity, config.scheme, config.cutoff, config.optimizer_config()
        )
    except SynthesisError as e:
        return _emit_failure(e, config)
    logger.info("Prepared |%d⟩ with the %s scheme", args.n, plan.scheme)
    return _emit_plan(plan, config)


def cmd_synthesize_unitary(args: argparse.Namespace, config: RunConfig) -> int:
    """Compile a unitary and write its report."""
    target = TargetUnitary(
        parse_unitary_spec(args.matrix, config.seed),
        config.cutoff,
        tolerance=INPUT_UNITARITY_TOLERANCE,
    )
    try:
        report = compile_unitary(target, config.optimizer_config())
    except SynthesisError as e:
        logger.error("%s", e)
        if e.best is not None:
            _write(dumps(report_to_dict(e.best)), config.out)
        return EXIT_QUALITY
    _write(dumps(report_to_dict(report)), config.out)
    if report.f_unitary_full < config.fidelity:
        logger.warning(
            "Unitary fidelity %.12g below threshold %s", report.f_unitary_full, config.fidelity
        )
        return EXIT_QUALITY
    return EXIT_OK


def _parse_alpha(text: str) -> complex:
    try:
        re, im = (float(part) for part in text.split(","))
    except ValueError as e:
        raise InvalidArgumentError(f"Displacement must be given as RE,IM, got {text!r}") from e
    return complex(re, im)


def cmd_verify(args: argparse.Namespace, config: RunConfig) -> int:
    """Re-simulate a sequence against an expectation and print the fidelity."""
    document = _load_json(args.sequence)
    seq = document_sequence(document)
    nc = seq.cutoff
    if args.displacement is not None:
        ideal = displacement_operator(_parse_alpha(args.displacement), nc)
        fidelity = unitary_fidelity(sequence_unitary(seq), ideal)
    elif args.unitary is not None:
        block = parse_unitary_spec(args.unitary, config.seed)
        target = TargetUnitary(block, nc, tolerance=INPUT_UNITARITY_TOLERANCE)
        fidelity = unitary_fidelity(sequence_unitary(seq), target.embedded())
    else:
        expected: Any = parse_state_spec(args.target) if args.target else document_target(document)
        if expected is None:
            raise InvalidArgumentError("No expectation given and none embedded in the document")
        if isinstance(expected, TargetState):
            final = apply_sequence(seq, basis_state(0, nc))
            fidelity = state_fidelity(final, expected.as_state(nc))
        else:
            target = TargetUnitary(expected, nc, tolerance=INPUT_UNITARITY_TOLERANCE)
            fidelity = unitary_fidelity(sequence_unitary(seq), target.embedded())
    print(f"{fidelity:.12g}")
    if fidelity < config.fidelity:
        logger.warning(
            "Fidelity %.12g is %.3e below threshold %s",
            fidelity,
            config.fidelity - fidelity,
            config.fidelity,
        )
        return EXIT_QUALITY
    return EXIT_OK


def _sweep_fits(rows: Sequence[SweepRow], fidelities: Sequence[float]) -> List[Dict[str, Any]]:
    fits = []
    for target_fidelity in fidelities:
        cells = [row for row in rows if row.target_fidelity == target_fidelity and not row.missing]
        folded = {row.n: row.snap_count for row in cells if row.scheme == "sublinear"}
        linear = {row.n: row.snap_count for row in cells if row.scheme == "linear"}
        points = sorted(n for n in folded if n > 0)
        exponent = prefactor = None
        if len(points) >= 2:
            exponent, prefactor = fit_power_law(points, [folded[n] for n in points])
        crossover = next((n for n in points if n in linear and folded[n] < linear[n]), None)
        fits.append(
            {
                "target_fidelity": target_fidelity,
                "exponent": exponent,
                "prefactor": prefactor,
                "crossover": crossover,
            }
        )
    return fits


def render_sweep_log(
    rows: Sequence[SweepRow], n_values: Sequence[int], fidelities: Sequence[float], seed: int
) -> str:
    """Render the companion log of a sweep: missing cells, power-law fit and crossover."""
    jinja2_environment = Environment(
        loader=FileSystemLoader(TEMPLATE_DIR_PATH), trim_blocks=True, lstrip_blocks=True
    )
    template = jinja2_environment.get_template(SWEEP_LOG_TEMPLATE_NAME)
    return template.render(
        seed=seed,
        n_values=n_values,
        fidelities=fidelities,
        cells=len(rows),
        missing=[row for row in rows if row.missing],
        fits=_sweep_fits(rows, fidelities),
    )


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    """Run the gate-count sweep and write the CSV and its companion log."""
    spec = sweep_spec_from_dict(_load_json(args.spec))
    rows = list(
        gate_count_sweep(spec.n_values, spec.fidelities, config.cutoff, config.optimizer_config())
    )
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(sweep_row_to_dict(row))
    _write(buffer.getvalue(), config.out)
    log = render_sweep_log(rows, spec.n_values, spec.fidelities, config.seed)
    if config.out is None:
        sys.stderr.write(log)
    else:
        Path(f"{config.out}.log").write_text(log, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser with every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cutoff", type=int, help="Cutoff dimension override")
    common.add_argument("--max-evals", type=int, dest="max_evals", help="Evaluations per run")
    common.add_argument("--xtol", type=float, help="Parameter tolerance (default 1e-8)")
    common.add_argument("--ftol", type=float, help="Objective tolerance (default 1e-12)")
    common.add_argument("--seed", type=int, help="Seed for randomized starts")
    common.add_argument("--fidelity", type=float, help="Success threshold (default 0.999)")
    common.add_argument("--out", help="Output path (default stdout)")
    common.add_argument(
        "-v", "--verbose", action="count", dest="verbosity", help="Log at DEBUG level"
    )
    common.add_argument("--log-level", dest="log_level", help="Log level (default WARNING)")

    parser = argparse.ArgumentParser(
        prog="snapsynth", description="Displacement and SNAP gate synthesis"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    prepare_state = commands.add_parser(
        "prepare-state", parents=[common], help="Compile a state preparation"
    )
    prepare_state.add_argument(
        "target", help="fock:n, uniform:N, a JSON coefficient list or a JSON file"
    )
    prepare_state.set_defaults(handler=cmd_prepare_state)

    prepare_fock = commands.add_parser(
        "prepare-fock", parents=[common], help="Prepare a number state"
    )
    prepare_fock.add_argument("n", type=int, help="Fock level")
    prepare_fock.add_argument("--scheme", choices=["linear", "sublinear", "auto"])
    prepare_fock.set_defaults(handler=cmd_prepare_fock)

    synthesize = commands.add_parser(
        "synthesize-unitary", parents=[common], help="Compile a unitary"
    )
    synthesize.add_argument(
        "matrix", help="Matrix JSON file, or fourier:d, permutation:d, random:d, kerr:d"
    )
    synthesize.set_defaults(handler=cmd_synthesize_unitary)

    verify = commands.add_parser("verify", parents=[common], help="Re-simulate a sequence")
    verify.add_argument("sequence", help="Sequence, plan or report JSON file")
    expectation = verify.add_mutually_exclusive_group()
    expectation.add_argument("--target", help="Expected state (same forms as prepare-state)")
    expectation.add_argument("--unitary", help="Expected unitary (same forms as synthesize)")
    expectation.add_argument("--displacement", metavar="RE,IM", help="Expected D(α)")
    verify.set_defaults(handler=cmd_verify)

    sweep = commands.add_parser("sweep", parents=[common], help="Compare SNAP counts")
    sweep.add_argument("spec", help='JSON file {"n_values": [...], "fidelities": [...]}')
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None, environ: Optional[Mapping[str, str]] = None) -> int:
    """Run the CLI and return its exit code."""
    environ = os.environ if environ is None else environ
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    flags = {name: getattr(args, name, None) for name in RunConfig.model_fields}
    try:
        config = RunConfig.from_sources(flags, environ)
    except ValidationError as e:
        print(f"error: invalid settings: {e}", file=sys.stderr)
        return EXIT_USAGE
    _configure_logging(config)
    try:
        return args.handler(args, config)
    except (InvalidArgumentError, ValidationError, OSError, json.JSONDecodeError) as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OptimizationError as e:
        logger.error("%s: %s", e, "; ".join(e.diagnostics))
        return EXIT_QUALITY


if __name__ == "__main__":  # pragma: nocover
    sys.exit(main())
