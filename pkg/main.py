#!/usr/bin/env python3
"""
CHR Confluence Checker - Command-line interface
Confluence (modulo equivalence) of CHR programs under invariants, with an interpreter
and a ground-instance oracle
"""

import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path
from typing import List, Optional, Tuple

import click
from tqdm import tqdm

from core.builtins import default_table
from core.corners import (
    CONFLUENT,
    NOT_CONFLUENT,
    CheckOptions,
    JoinSearch,
    build_solver,
    builtin_templates,
    check,
    generate,
    validate_result,
)
from core.errors import ChrError
from core.parser import parse_analysis_spec, parse_program, parse_query
from core.program import Program
from core.report import oracle_row, render_corners, render_oracle, render_text, to_json
from core.semantics import explore, render_state, render_trace
from core.solver import Solver, load_modal_table
from core.specs import AnalysisSpec
from core.terms import make_state
from utils.config import RunConfig, env_defaults, parse_builtins, parse_universe
from utils.logger import set_level, setup_logger
from utils.validators import validate_run_config, validate_source_file

EXIT_CONFLUENT = 0
EXIT_NOT_CONFLUENT = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3

SUMMARY_EXIT = {CONFLUENT: EXIT_CONFLUENT, NOT_CONFLUENT: EXIT_NOT_CONFLUENT}

DEFAULTS = env_defaults()
logger = setup_logger(log_level=DEFAULTS["log_level"])


class ChrGroup(click.Group):
    """Click group whose usage errors exit with status 3"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(result if isinstance(result, int) else 0)


def _fail(message: str) -> int:
    logger.error(message)
    click.echo(f"Error: {message}", err=True)
    return EXIT_USAGE


def _read(path: str, extension: str) -> str:
    result = validate_source_file(path, extension)
    if not result["is_valid"]:
        raise ChrError(result["error"])
    return result["text"]


def load_inputs(config: RunConfig) -> Tuple[Program, AnalysisSpec]:
    program = parse_program(_read(config.program_path, ".chr"))
    spec = AnalysisSpec()
    if config.spec_path:
        spec = parse_analysis_spec(_read(config.spec_path, ".cspec"))
    logger.info("Loaded %s: %d rule(s)", config.program_path, len(program.rules))
    return program, spec


def make_options(config: RunConfig, spec: AnalysisSpec) -> CheckOptions:
    return CheckOptions(
        fuel=config.fuel,
        split_budget=config.split_budget,
        object_fuel=config.object_fuel,
        oracle_limit=config.oracle_limit,
        universe=config.universe,
        templates=config.builtins,
        modulo_equivalence=config.modulo_equivalence,
        invariant_only=config.invariant_only,
        assume_termination=config.assume_termination,
        observable=not spec.invariant.trivial,
    )


def prepare(config: RunConfig) -> Tuple[Program, Solver, CheckOptions]:
    validation = validate_run_config(config)
    if not validation["is_valid"]:
        raise ChrError(validation["error"])
    if config.trace:
        set_level("DEBUG")
    program, spec = load_inputs(config)
    options = make_options(config, spec)
    solver = build_solver(spec, default_table(), options, load_modal_table(config.modal_table))
    return program, solver, options


def _progress(config: RunConfig):
    if config.structured or not sys.stdout.isatty():
        return None
    return lambda iterable, total: tqdm(iterable, total=total, desc="Analyzing corners")


def _executor(config: RunConfig):
    if config.jobs > 1:
        return ThreadPoolExecutor(max_workers=config.jobs)
    return nullcontext(None)


def analysis_options(function):
    """Flags shared by check, oracle and corners"""
    options = [
        click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), help="Analysis spec (.cspec)"),
        click.option("--modulo-equivalence", is_flag=True, help="Check confluence modulo the equivalence of --spec"),
        click.option("--invariant-only", is_flag=True, help="Ignore the equivalence of --spec"),
        click.option("--builtins", "builtins", default=None, help="Built-in templates, e.g. is,="),
        click.option("--fuel", type=int, default=DEFAULTS["fuel"], show_default=True, help="Meta-level steps per wing"),
        click.option("--split-budget", type=int, default=DEFAULTS["split_budget"], show_default=True),
        click.option("--oracle-universe", default=None, help="e.g. ints=-2..2;consts=a,b;vars=X,Y"),
        click.option("--format", "output_format", type=click.Choice(["text", "structured"]), default="text"),
        click.option("--jobs", type=int, default=DEFAULTS["jobs"], show_default=True),
        click.option("--assume-observable-termination", "assume_termination", is_flag=True),
        click.option("--trace", is_flag=True, help="Debug logging"),
    ]
    for option in reversed(options):
        function = option(function)
    return function


def build_config(program_path: str, **flags) -> RunConfig:
    return RunConfig(
        program_path=program_path,
        spec_path=flags.get("spec_path"),
        modulo_equivalence=flags.get("modulo_equivalence", False),
        invariant_only=flags.get("invariant_only", False),
        assume_termination=flags.get("assume_termination", False),
        fuel=flags.get("fuel", DEFAULTS["fuel"]),
        split_budget=flags.get("split_budget", DEFAULTS["split_budget"]),
        object_fuel=DEFAULTS["object_fuel"],
        oracle_limit=DEFAULTS["oracle_limit"],
        universe=parse_universe(flags.get("oracle_universe")),
        output_format=flags.get("output_format", "text"),
        jobs=flags.get("jobs", DEFAULTS["jobs"]),
        builtins=parse_builtins(flags.get("builtins")),
        trace=flags.get("trace", False),
        modal_table=DEFAULTS["modal_table"],
    )


@click.group(cls=ChrGroup)
def cli():
    """Confluence analysis for Constraint Handling Rules programs"""


@cli.command("check")
@click.argument("program_path", type=click.Path(exists=True, dir_okay=False))
@analysis_options
def check_command(program_path, **flags):
    """Decide (observable) confluence, optionally modulo equivalence"""
    try:
        config = build_config(program_path, **flags)
        program, solver, options = prepare(config)
        with _executor(config) as executor:
            analysis = check(program, solver, options, _progress(config), executor)
    except ChrError as e:
        return _fail(str(e))
    except Exception as e:
        logger.exception("Unexpected failure")
        return _fail(f"unexpected failure: {e}")

    program_id = Path(program_path).name
    if config.structured:
        click.echo(to_json(analysis, program_id))
    else:
        click.echo(render_text(analysis, program_id))
    logger.info("Summary for %s: %s", program_id, analysis.summary)
    return SUMMARY_EXIT.get(analysis.summary, EXIT_UNKNOWN)


@cli.command("corners")
@click.argument("program_path", type=click.Path(exists=True, dir_okay=False))
@analysis_options
def corners_command(program_path, **flags):
    """List the generated critical corners without searching for joins"""
    try:
        config = build_config(program_path, **flags)
        program, solver, options = prepare(config)
        corners = generate(program, solver, builtin_templates(solver.builtins, options.templates))
    except ChrError as e:
        return _fail(str(e))
    except Exception as e:
        logger.exception("Unexpected failure")
        return _fail(f"unexpected failure: {e}")
    click.echo(render_corners(corners, config.structured))
    return 0


@cli.command("oracle")
@click.argument("program_path", type=click.Path(exists=True, dir_okay=False))
@analysis_options
def oracle_command(program_path, **flags):
    """Compare every corner verdict with the ground-instance oracle"""
    try:
        config = build_config(program_path, **flags)
        program, solver, options = prepare(config)
        with _executor(config) as executor:
            rows = run_oracle(program, solver, options, _progress(config), executor)
    except ChrError as e:
        return _fail(str(e))
    except Exception as e:
        logger.exception("Unexpected failure")
        return _fail(f"unexpected failure: {e}")

    click.echo(render_oracle(rows, config.structured))
    mismatches = sum(1 for row in rows if not row["agreement"])
    if mismatches:
        logger.warning("%d corner(s) disagree with the oracle", mismatches)
        return 1
    return 0


@cli.command("run")
@click.argument("program_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("query", default="")
@click.option("--fuel", type=int, default=DEFAULTS["object_fuel"], show_default=True, help="Derivation depth bound")
@click.option("--trace", is_flag=True, help="Print the explored transition graph")
def run_command(program_path, query, fuel, trace):
    """Run a query and print every normal form"""
    try:
        if fuel <= 0:
            raise ChrError("Fuel must be positive")
        program = parse_program(_read(program_path, ".chr"))
        derivation = run_query(program, query, fuel)
    except ChrError as e:
        return _fail(str(e))
    except Exception as e:
        logger.exception("Unexpected failure")
        return _fail(f"unexpected failure: {e}")

    if trace:
        click.echo(render_trace(derivation))
        click.echo("")
    for state in sorted(derivation.normal_forms(), key=render_state):
        click.echo(render_state(state))
    if derivation.exhausted:
        click.echo("(exhausted)")
    return 0


def run_oracle(program: Program, solver: Solver, options: CheckOptions, progress=None, executor=None) -> List[dict]:
    """Analyze every corner, then compare each verdict with the ground-instance oracle"""
    analysis = check(program, solver, options, progress, executor)
    search = JoinSearch(
        program,
        solver,
        options.fuel,
        options.split_budget,
        analysis.universe,
        options.object_fuel,
        options.oracle_limit,
    )
    return [oracle_row(result, validate_result(result, search)) for result in analysis.results]


def run_query(program: Program, query: str, fuel: int):
    """Explore every derivation of a query up to fuel steps"""
    return explore(program, make_state(parse_query(query)), fuel)


def main(argv: Optional[list] = None):
    """Main function to run the application"""
    cli.main(args=argv, prog_name="chr-confluence")


if __name__ == "__main__":
    main()
