import functools
import logging
from typing import Any, Dict, Optional, Sequence

import click
from click.core import ParameterSource
from dotenv import load_dotenv
from pydantic import ValidationError

from casimir_qi.config_loader import load_config
from casimir_qi.errors import OutputError
from casimir_qi.pipeline import run
from casimir_qi.report_io import emit
from casimir_qi.run_config import RunConfig, build_run_config, is_positive, parse_float_list

load_dotenv()

logger = logging.getLogger(__name__)

# option name -> key in the flat config space
FLAG_KEYS = {
    "lambda_": "lambda",
    "coupling": "coupling",
    "a": "a",
    "output": "output",
    "fmt": "format",
    "normalize_a": "normalize_a",
    "rel_tol": "rel_tol",
    "abs_tol": "abs_tol",
    "max_iter": "max_iter",
    "with_beta": "with_beta",
    "tau": "tau",
    "over": "over",
    "box_lengths": "L",
    "x": "x",
    "n_max": "n_max",
}
POSITIVE = ("a", "rel_tol", "abs_tol")
NON_NEGATIVE = ("lambda", "coupling")


def _float_list(ctx, param, value):
    if value is None:
        return None
    try:
        values = parse_float_list(value)
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}", ctx=ctx, param=param)
    if not values:
        raise click.BadParameter("expected at least one number", ctx=ctx, param=param)
    return values


def common_options(func):
    options = [
        click.option("--lambda", "lambda_", type=float, help="Delta strength lambda (1/length)."),
        click.option("--coupling", type=float, help="Dimensionless coupling Lambda = lambda*a/2."),
        click.option("--a", type=float, help="Delta separation (length)."),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="Flat YAML or TOML file of option values."),
        click.option("--output", "-o", type=click.Path(dir_okay=False), help="Report path (stdout if absent)."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), help="Report format."),
        click.option("--normalize-a", is_flag=True, help="Report in units where a = 1."),
        click.option("--rel-tol", type=float, help="Relative quadrature tolerance."),
        click.option("--abs-tol", type=float, help="Absolute quadrature tolerance."),
        click.option("--max-iter", type=click.IntRange(min=1), help="Iteration / panel budget."),
        click.option("--verbose", "-v", is_flag=True, help="Debug logging."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _given(ctx: click.Context) -> Dict[str, Any]:
    """Options that were actually typed on the command line, keyed like the config file."""
    flags = {}
    for name, key in FLAG_KEYS.items():
        if name in ctx.params and ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
            flags[key] = ctx.params[name]
    return flags


def _check_flags(flags: Dict[str, Any]) -> None:
    if flags.get("lambda") is not None and flags.get("coupling") is not None:
        raise click.UsageError("give either --lambda or --coupling, not both")
    for key in POSITIVE:
        if key in flags and not is_positive(flags[key]):
            raise click.BadParameter(f"{key} must be positive, got {flags[key]!r}", param_hint=f"'--{key.replace('_', '-')}'")
    for key in NON_NEGATIVE:
        if key in flags and not flags[key] >= 0:
            raise click.BadParameter(f"{key} must be non-negative, got {flags[key]!r}", param_hint=f"'--{key}'")
    for key, hint in (("tau", "--tau"), ("L", "--L")):
        if key in flags and not all(is_positive(v) for v in flags[key]):
            raise click.BadParameter(f"{key} values must be positive, got {list(flags[key])!r}", param_hint=f"'{hint}'")


def resolve(ctx: click.Context, command: str) -> RunConfig:
    params = ctx.params
    logging.basicConfig(level=logging.DEBUG if params.get("verbose") else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    flags = _given(ctx)
    _check_flags(flags)
    file_values = load_config(params["config_path"]) if params.get("config_path") else {}
    try:
        config = build_run_config(command, flags, file_values)
    except ValidationError as e:
        names = ", ".join(".".join(str(p) for p in err["loc"]) or "value" for err in e.errors())
        raise click.BadParameter(f"invalid value for {names}: {e.errors()[0]['msg']}")
    except ValueError as e:
        raise click.UsageError(str(e))
    if command == "qi" and not config.tau_list:
        raise click.UsageError("qi needs at least one --tau value")
    if any(not is_positive(t) for t in config.tau_list):
        raise click.BadParameter("tau values must be positive", param_hint="'--tau'")
    if any(not is_positive(L) for L in config.box_sizes):
        raise click.BadParameter("box lengths must be positive", param_hint="'--L'")
    return config


def execute(ctx: click.Context, config: RunConfig) -> Optional[RunConfig]:
    if (ctx.obj or {}).get("parse_only"):
        return config
    code, report = run(config)
    try:
        emit(report, config.format, config.output_path)
    except OutputError as e:
        logger.error("Error in emit: %s", str(e))
        click.echo(str(e), err=True)
        code = 1
    ctx.exit(code)


def command(name: str):
    def decorate(func):
        @functools.wraps(func)
        @click.pass_context
        def callback(ctx, **kwargs):
            return execute(ctx, resolve(ctx, name))
        return cli.command(name)(common_options(callback))
    return decorate


@click.group()
def cli():
    """Renormalized vacuum energy between two delta plates and spatial quantum inequalities."""


@command("density")
@click.option("--with-beta/--without-beta", default=True, help="Compute the region-II coefficient beta.")
def density(**kwargs):
    """Continuum region-I density, beta and the total-energy check."""


@command("qi")
@click.option("--tau", callback=_float_list, help="Comma-separated Lorentzian widths.")
def qi(**kwargs):
    """Lorentzian-averaged density against both QI bounds."""


@command("sweep")
@click.option("--over", type=click.Choice(["lambda", "tau"]), help="Sweep variable.")
@click.option("--tau", callback=_float_list, help="Comma-separated widths (tau sweeps).")
@click.option("--with-beta/--without-beta", default=True, help="Compute beta at each coupling.")
def sweep(**kwargs):
    """One row per coupling or per sampling width."""


@command("oracle")
@click.option("--L", "box_lengths", callback=_float_list, help="Comma-separated box lengths.")
@click.option("--x", callback=_float_list, help="Comma-separated evaluation points.")
@click.option("--n-max", type=click.IntRange(min=1), help="Modes per parity for the jump and flatness run.")
@click.option("--with-beta/--without-beta", default=True, help="Compare the region-II slope with beta.")
def oracle(**kwargs):
    """Finite-box sums, 1/L extrapolation, jump identities and the shooting cross-check."""


@command("modes")
@click.option("--L", "box_lengths", callback=_float_list, help="Box length (first value is used).")
@click.option("--n-max", type=click.IntRange(min=1), help="Modes per parity.")
def modes(**kwargs):
    """Spectrum table with per-mode residuals."""


def parse_config(argv: Sequence[str]) -> RunConfig:
    """Resolve argv into a RunConfig without running it; usage errors raise click exceptions."""
    return cli.main(args=list(argv), prog_name="casimir-qi", standalone_mode=False, obj={"parse_only": True})


if __name__ == "__main__":
    cli()
