"""
Command-line entry point for Blow-up Lab.

Commands: ``profile``, ``simulate {rsv|rb}``, ``analyze MANIFEST`` and
``verify {profile|initial|kernel}``. Exit code 0 means every requested check
passed, 1 means a failed check or a run error, 2 means bad arguments.
"""

import functools
import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError

from blowuplab import __version__
from blowuplab.config import get_settings
from blowuplab.core.exceptions import BlowupLabException
from blowuplab.schemas import SimConfig
from blowuplab.tasks.jobs import (
    DEFAULT_ALPHAS,
    JobResult,
    analyze_job,
    profile_job,
    simulate_job,
    verify_initial_job,
    verify_kernel_job,
    verify_profile_job,
)
from blowuplab.utils.logging import get_logger, setup_logging
from blowuplab.utils.validators import is_finite_positive, parse_alpha_list

log = get_logger(__name__)


def handle_errors(func):
    """Log laboratory errors and exit with code 1 instead of a traceback."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except BlowupLabException as e:
            log.error(f"{type(e).__name__}: {e}")
            sys.exit(1)

    return wrapper


def finish(result: JobResult) -> None:
    """Print the job summary and exit 1 when a check failed."""
    click.echo(result.text)
    click.echo(f"\nOutput: {result.run_dir}")
    if not result.passed:
        sys.exit(1)


def build_config(model: str, config_path: Optional[Path], overrides: Dict[str, Any]) -> SimConfig:
    """
    Merge defaults, a JSON config file and command-line flags (highest precedence).

    Raises:
        click.BadParameter: If the file is unreadable or the merged config does not validate
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise click.BadParameter(f"cannot read config file: {e}", param_hint="--config")
        if not isinstance(data, dict):
            raise click.BadParameter("config file must hold a JSON object", param_hint="--config")

    data.update({k: v for k, v in overrides.items() if v is not None})
    data["model"] = model
    try:
        return SimConfig(**data)
    except ValidationError as e:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        raise click.BadParameter(errors)


def run_options(func):
    """Flags shared by ``simulate`` and ``verify initial``, mirroring SimConfig."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False,
                     path_type=Path), help="JSON run configuration"),
        click.option("--eps", type=float, help="Initial-data scale"),
        click.option("--hstar", "h_star", type=float, help="Background depth"),
        click.option("--length", "half_length", type=float, help="Half-domain length L"),
        click.option("--n", type=int, help="Grid nodes"),
        click.option("--stretch", "grid_stretch", type=float,
                     help="Cluster nodes at x = 0 (sinh map strength, 0 = uniform)"),
        click.option("--theta", "theta_weight", type=float, help="Slope-condition weight"),
        click.option("--z-bump", "z_bump_amplitude", type=float, help="Amplitude of a z0 bump"),
        click.option("--z-bump-width", type=float, help="Width of the z0 bump"),
        click.option("--allow-large-eps", is_flag=True, default=None,
                     help="Accept eps > 0.5 (falsification runs)"),
        click.option("--label", type=str, help="Run label"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="blowup-lab")
@click.option("--log-level", default=None, help="Override the configured log level")
def cli(log_level: Optional[str]):
    """Blow-up Lab: Hunter–Saxton blow-up experiments."""
    settings = get_settings()
    setup_logging(
        log_level=(log_level or settings.log_level).upper(),
        log_file=settings.log_file,
        rotation=settings.log_rotation,
        retention=settings.log_retention,
    )
    settings.create_directories()


@cli.command()
@click.option("--beta", type=float, default=1.0, show_default=True, help="Profile parameter")
@click.option("--ymax", "y_max", type=float, default=None, help="Last tabulated y")
@click.option("--rel-tol", type=float, default=None, help="Integrator relative tolerance")
@handle_errors
def profile(beta: float, y_max: Optional[float], rel_tol: Optional[float]):
    """Build a profile table and check the profile inequalities."""
    if not is_finite_positive(beta):
        raise click.BadParameter("beta must be a positive number", param_hint="--beta")
    if y_max is not None and not y_max >= 10.0:
        raise click.BadParameter("ymax must be at least 10", param_hint="--ymax")
    if rel_tol is not None and not 1e-14 < rel_tol < 1e-4:
        raise click.BadParameter("rel-tol must lie in (1e-14, 1e-4)", param_hint="--rel-tol")
    finish(profile_job(beta, y_max=y_max, rel_tol=rel_tol))


@cli.command()
@click.argument("model", type=click.Choice(["rsv", "rb"]))
@run_options
@click.option("--cfl", type=float, help="CFL number")
@click.option("--stop-factor", "stop_growth_factor", type=float, help="Growth that flags blow-up")
@click.option("--dt-floor", type=float, help="Smallest admissible time step")
@click.option("--cadence", "snapshot_cadence", type=int, help="Steps between snapshots")
@click.option("--t-max", type=float, help="Final time")
@click.option("--max-steps", type=int, help="Hard cap on time steps")
@click.option("--drift-limit", "energy_drift_limit", type=float, help="Energy drift abort limit")
@click.option("--window", "window_half_width", type=float, help="Rescaled window half-width")
@click.option("--no-modulation", is_flag=True, help="Do not integrate the modulation ODEs")
@handle_errors
def simulate(model: str, config_path: Optional[Path], no_modulation: bool, **overrides):
    """Run an rSV or rB blow-up simulation."""
    if no_modulation:
        overrides["track_modulation"] = False
    cfg = build_config(model, config_path, overrides)
    log.info(f"Simulating {cfg.model} with eps={cfg.eps:g}, n={cfg.n}")
    finish(simulate_job(cfg))


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--alphas",
    default=",".join(f"{a:g}" for a in DEFAULT_ALPHAS),
    show_default=True,
    help="Comma separated Hölder exponents, fractions allowed",
)
@click.option("--svg/--no-svg", default=None, help="Render SVG charts (needs matplotlib)")
@handle_errors
def analyze(manifest: Path, alphas: str, svg: Optional[bool]):
    """Analyze a finished run from its manifest."""
    try:
        alpha_list = parse_alpha_list(alphas)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--alphas")
    finish(analyze_job(manifest, alpha_list, render=svg))


@cli.group()
def verify():
    """Standalone verification reports."""
    pass


@verify.command("profile")
@click.option("--ymax", "y_max", type=float, default=None, help="Last tabulated y")
@click.option("--rel-tol", type=float, default=None, help="Integrator relative tolerance")
@handle_errors
def verify_profile(y_max: Optional[float], rel_tol: Optional[float]):
    """Check the unit profile and the profile inequalities."""
    finish(verify_profile_job(rel_tol=rel_tol, y_max=y_max))


@verify.command("initial")
@click.argument("model", type=click.Choice(["rsv", "rb"]), default="rsv")
@run_options
@handle_errors
def verify_initial(model: str, config_path: Optional[Path], **overrides):
    """Report the initial-data conditions for a run configuration."""
    finish(verify_initial_job(build_config(model, config_path, overrides)))


@verify.command("kernel")
@click.option("--hstar", "h_star", type=float, default=1.0, show_default=True)
@click.option("--length", "half_length", type=float, default=20.0, show_default=True)
@click.option("--n", type=int, default=4001, show_default=True)
@click.option("--source", type=float, default=0.0, show_default=True, help="Source location z")
@click.option("--bump", type=float, default=0.0, show_default=True, help="Relative depth bump")
@handle_errors
def verify_kernel(h_star: float, half_length: float, n: int, source: float, bump: float):
    """Export a Green-kernel column and check its exponential decay."""
    if not is_finite_positive(h_star):
        raise click.BadParameter("hstar must be positive", param_hint="--hstar")
    if bump <= -1.0:
        raise click.BadParameter("bump must exceed -1 to keep the depth positive",
                                 param_hint="--bump")
    if not -half_length < source < half_length:
        raise click.BadParameter("source must lie inside the domain", param_hint="--source")
    finish(verify_kernel_job(h_star, half_length, n, source, bump))


if __name__ == "__main__":
    cli()
