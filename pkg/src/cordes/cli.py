"""
Cordes CLI - The 'cordes' command-line interface.

This module provides the batch runner for the adaptive benchmark studies.

Usage:
    cordes run --experiment 1 --method bfs-ls --refinement uniform -o r.csv
    cordes run --preset exp2-th-adaptive --plot figures/exp2
    cordes constants --coefficient experiment_sign --formulation ns
    cordes preset list
    cordes preset init exp3-bfs-adaptive -o exp3.yaml
"""

import logging
import sys
from typing import Optional

import click
import numpy as np
from click.core import ParameterSource
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from cordes import __version__
from cordes.adaptivity import run_adaptive
from cordes.coefficients import BUILTIN_COEFFICIENTS, derived_constants, get_coefficient
from cordes.config import METHOD_CHOICES, RunConfig, resolve_config
from cordes.errors import AdaptiveRunError, ParameterError
from cordes.output import dump_mesh, emit_csv
from cordes.plotting import emit_plots
from cordes.presets import (
    get_preset,
    get_preset_names,
    list_presets,
    list_yaml_presets,
    save_yaml_preset,
)

# Create console with safe defaults for Windows
console = Console(force_terminal=True, safe_box=True, legacy_windows=True)

# Options of `run` that map onto RunConfig fields
_RUN_FIELDS = (
    "experiment",
    "method",
    "refinement",
    "marking",
    "theta",
    "lambda_",
    "mu",
    "max_ndof",
    "max_levels",
    "quad_order",
    "tri_degree",
    "subdivision",
    "matching",
    "check_meshes",
    "out",
    "dump_mesh",
    "plot",
)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4e}"


# =============================================================================
# CLI GROUP
# =============================================================================


@click.group(invoke_without_command=True)
@click.option("--version", "-v", is_flag=True, help="Show version and exit.")
@click.pass_context
def main(ctx, version):
    """
    Cordes - Adaptive finite elements for nondivergence-form PDEs.

    Solve A:D^2 u = f with Cordes coefficients by BFS or Taylor-Hood
    elements, refine adaptively and write convergence tables and plots.

    \b
    Examples:
        cordes run --experiment 1 --method bfs-ls -o exp1.csv
        cordes run --preset exp2-th-adaptive --plot figures/exp2
        cordes constants --formulation ns
        cordes preset init exp3-bfs-adaptive -o exp3.yaml
    """
    if version:
        console.print(f"[bold]cordes[/bold] version [cyan]{__version__}[/cyan]")
        ctx.exit()

    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())


# =============================================================================
# RUN COMMAND
# =============================================================================


@main.command()
@click.option(
    "--experiment", "-e", type=click.IntRange(1, 3), default=1, help="Benchmark 1, 2 or 3"
)
@click.option(
    "--method", "-m", type=click.Choice(METHOD_CHOICES), default="bfs-ls", help="Discretization"
)
@click.option(
    "--refinement",
    "-r",
    type=click.Choice(["adaptive", "uniform"]),
    default="adaptive",
    help="Refinement strategy",
)
@click.option(
    "--marking", type=click.Choice(["doerfler", "maximum"]), default="doerfler", help="Marking"
)
@click.option("--theta", type=float, default=0.3, show_default=True, help="Doerfler parameter")
@click.option(
    "--lambda", "lambda_", type=float, default=1.0, show_default=True, help="Stabilization weight"
)
@click.option("--mu", type=float, default=None, help="NS estimator weight")
@click.option("--max-ndof", type=int, default=20000, show_default=True, help="Stop above this size")
@click.option("--max-levels", type=int, default=40, show_default=True, help="Level cap")
@click.option(
    "--quad-order", type=int, default=5, show_default=True, help="Gauss points per direction"
)
@click.option("--tri-degree", type=int, default=6, show_default=True, help="Triangle rule degree")
@click.option(
    "--subdivision", type=int, default=0, show_default=True, help="Composite quadrature level"
)
@click.option("--matching/--non-matching", default=True, help="Initial mesh resolves the jumps")
@click.option("--check-meshes", is_flag=True, help="Scan mesh invariants after each refinement")
@click.option("--out", "-o", default="results.csv", show_default=True, help="CSV output path")
@click.option("--dump-mesh", help="Write the final mesh to this file")
@click.option("--plot", help="Write SVG plots with this path prefix")
@click.option("--config", "config_file", type=click.Path(exists=True), help="Config file")
@click.option("--preset", "-p", help="Built-in preset name")
@click.option("--set", "overrides", multiple=True, help="Setting override (KEY=VALUE)")
@click.option("--verbose", is_flag=True, help="Show debug logging")
@click.pass_context
def run(
    ctx,
    config_file: Optional[str],
    preset: Optional[str],
    overrides: tuple,
    verbose: bool,
    **options,
):
    """
    Run a benchmark and write its convergence table.

    Explicit flags override --set values, which override the config file,
    which overrides the preset.

    \b
    Examples:
        cordes run -e 1 -m bfs-ls -r uniform --max-ndof 20000 -o r.csv
        cordes run -e 3 -m th-ls -r adaptive -o exp3.csv --plot figs/exp3
        cordes run --preset exp1-bfs-nonmatching --dump-mesh mesh.txt
        cordes run --config exp2.yaml --set theta=0.5
    """
    _configure_logging(verbose)
    flags = {
        name: options[name]
        for name in _RUN_FIELDS
        if ctx.get_parameter_source(name) is ParameterSource.COMMANDLINE
    }
    if "lambda_" in flags:
        flags["lambda"] = flags.pop("lambda_")
    try:
        config = resolve_config(preset, config_file, list(overrides), flags)
    except ParameterError as e:
        raise click.UsageError(str(e)) from None

    try:
        records, snapshots = _execute(config)
    except AdaptiveRunError as e:
        if e.records:
            emit_csv(e.records, config.out)
            console.print(
                f"[yellow]Partial results ({len(e.records)} levels):[/yellow] {config.out}"
            )
        console.print(f"[red]Solver failed:[/red] {e}")
        sys.exit(1)
    except Exception as e:
        console.print(f"[red]Error running benchmark:[/red] {e}")
        sys.exit(1)

    _print_summary(config, records)
    console.print(f"[green]Wrote results:[/green] {config.out}")
    if config.dump_mesh:
        console.print(f"[green]Wrote mesh:[/green] {config.dump_mesh}")
    if config.plot:
        count = 1 + len(snapshots)
        console.print(f"[green]Wrote {count} plots:[/green] {config.plot}_*.svg")


def _execute(config: RunConfig):
    problem = config.problem()
    meshes = []

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"Experiment {config.experiment}, {config.method}...", total=None)

        def on_level(mesh, record):
            meshes.append(mesh)
            progress.update(
                task, description=f"Level {record.level}: ndof={record.ndof} eta={_fmt(record.eta)}"
            )

        records = run_adaptive(problem, config.solver, config.adaptive_config(), on_level=on_level)

    emit_csv(records, config.out)
    if config.dump_mesh:
        dump_mesh(meshes[-1], config.dump_mesh)
    snapshots = []
    if config.plot:
        snapshots = [(0, meshes[0])]
        if len(meshes) > 1:
            snapshots.append((len(meshes) - 1, meshes[-1]))
        emit_plots(records, snapshots, config.plot)
    return records, snapshots


def _print_summary(config: RunConfig, records) -> None:
    table = Table(show_header=True, header_style="bold")
    for column in ("level", "ndof", "err_h2", "eta", "efficiency"):
        table.add_column(column, justify="right")
    for r in records:
        table.add_row(str(r.level), str(r.ndof), _fmt(r.err_h2), _fmt(r.eta), _fmt(r.efficiency))
    title = f"Experiment {config.experiment} - {config.method} - {config.refinement}"
    console.print(Panel(f"[bold]{title}[/bold]"))
    console.print(table)


# =============================================================================
# CONSTANTS COMMAND
# =============================================================================


@main.command()
@click.option(
    "--coefficient",
    "-c",
    type=click.Choice(list(BUILTIN_COEFFICIENTS)),
    default="experiment_sign",
    show_default=True,
    help="Coefficient field",
)
@click.option(
    "--formulation", "-f", type=click.Choice(["ls", "ns"]), default="ls", show_default=True
)
@click.option(
    "--lambda", "lambda_", type=float, default=1.0, show_default=True, help="Stabilization weight"
)
@click.option("--mu", type=float, default=None, help="NS estimator weight")
def constants(coefficient: str, formulation: str, lambda_: float, mu: Optional[float]):
    """
    Show the stabilization and estimator constants of a coefficient.

    \b
    Examples:
        cordes constants
        cordes constants -c identity -f ns --lambda 0.8
    """
    field = get_coefficient(coefficient)
    try:
        stab = derived_constants(field, formulation, lambda_, mu)
    except ParameterError as e:
        raise click.UsageError(str(e)) from None

    grid = np.linspace(-0.999, 0.999, 41)
    gx, gy = np.meshgrid(grid, grid)
    valid = field.check(np.column_stack([gx.ravel(), gy.ravel()]))

    console.print(Panel(f"[bold]Coefficient: {field.name}[/bold]"))
    table = Table(show_header=False, box=None)
    table.add_column("Property", style="dim")
    table.add_column("Value")

    table.add_row("Description", field.description)
    table.add_row("Formulation", stab.formulation.value)
    table.add_row("epsilon", f"{stab.epsilon:.12g}")
    table.add_row("gamma_sup", f"{stab.gamma_sup:.12g}")
    table.add_row("a_sup", f"{stab.a_sup:.12g}")
    table.add_row("c(gamma, eps)", f"{stab.c_coercivity:.12g}")
    table.add_row("lambda", f"{stab.lambda_:.12g}")
    table.add_row("c_lambda", f"{stab.c_lambda:.12g}")
    table.add_row("sigma_lambda", f"{stab.sigma_lambda:.12g}")
    table.add_row("mu", f"{stab.mu:.12g}")
    table.add_row("Residual weight", f"{stab.residual_weight:.12g}")
    for method in ("bfs", "taylor_hood"):
        lo, hi = stab.efficiency_interval(method)
        table.add_row(f"Efficiency ({method})", f"[{lo:.6g}, {hi:.6g}]")
    table.add_row("Sample check", "[green]passed[/green]" if valid else "[red]failed[/red]")

    console.print(table)


# =============================================================================
# PRESET COMMAND GROUP
# =============================================================================


@main.group()
def preset():
    """
    Manage run presets.

    \b
    Commands:
        list     List available presets
        info     Show preset details
        init     Write a preset as a YAML config file
    """
    pass


@preset.command("list")
def preset_list():
    """List available presets."""
    console.print("[bold]Available Presets:[/bold]\n")
    table = Table(show_header=True, header_style="bold")
    table.add_column("Name")
    table.add_column("Description")
    table.add_column("Experiment")
    table.add_column("Method")

    for p in list_presets():
        table.add_row(p["name"], p["description"], p["experiment"], p["method"])

    console.print(table)


@preset.command("info")
@click.argument("name")
def preset_info(name: str):
    """Show the settings of a preset."""
    p = get_preset(name)
    if not p:
        console.print(f"[red]Preset not found:[/red] {name}")
        sys.exit(1)

    console.print(Panel(f"[bold]Preset: {p.name}[/bold]"))

    table = Table(show_header=False, box=None)
    table.add_column("Property", style="dim")
    table.add_column("Value")

    table.add_row("Description", p.description)
    defaults = RunConfig().as_dict()
    for key, value in defaults.items():
        shown = p.settings.get(key, value)
        style = "" if key in p.settings else "dim"
        table.add_row(key, f"[{style}]{shown}[/{style}]" if style else str(shown))

    console.print(table)


@preset.command("init")
@click.argument("name")
@click.option("--output", "-o", required=True, help="Output YAML file path")
def preset_init(name: str, output: str):
    """Create a YAML config file from a preset."""
    if name.lower() not in get_preset_names():
        console.print(f"[red]Preset not found:[/red] {name}")
        console.print("\nAvailable presets:")
        for p in list_yaml_presets():
            console.print(f"  {p}")
        sys.exit(1)

    save_yaml_preset(name, output)
    console.print(f"[green]Created config:[/green] {output}")
    console.print("\nEdit this file and run:")
    console.print(f"  cordes run --config {output}")


if __name__ == "__main__":
    main()
