"""
Command-line interface for rayforge.
"""

import functools
import logging
import sys

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from . import __version__
from .core.errors import RayforgeError
from .core.orchestrator import RayforgeOrchestrator


def _setup_logging(verbose: bool):
    logger = logging.getLogger("rayforge")
    logger.handlers.clear()
    logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    logger.setLevel(logging.INFO if verbose else logging.WARNING)
    logger.propagate = False


def _run(fn):
    """Build the orchestrator from the shared options and map errors to exit codes."""

    @functools.wraps(fn)
    def wrapper(config, threads, output_dir, **kwargs):
        console = Console()
        try:
            orchestrator = RayforgeOrchestrator(config, threads=threads, output_dir=output_dir,
                                                console=console)
            fn(orchestrator, **kwargs)
        except RayforgeError as e:
            console.print(f"[red]Error: {escape(e.describe())}[/red]")
            sys.exit(e.exit_code)
        except Exception as e:
            console.print(f"[red]Error: {escape(str(e))}[/red]")
            sys.exit(2)

    wrapper = click.option('--output-dir', default=None, help='Directory for default output names')(wrapper)
    wrapper = click.option('--threads', '-j', type=int, default=None, help='Worker threads')(wrapper)
    wrapper = click.option('--config', '-c', default='config.yaml', help='Configuration file path')(wrapper)
    return wrapper


@click.group()
@click.version_option(version=__version__)
@click.option('--verbose', '-v', is_flag=True, help='Log progress of long operations')
@click.pass_context
def cli(ctx, verbose):
    """rayforge - magnetic X-ray and light ray transforms with matrix weights."""
    load_dotenv()
    _setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose


@cli.command()
@click.option('--scene', '-s', required=True, help='Scene file or built-in scene name')
@click.option('--theta', type=float, default=0.0, help='Boundary angle of the start point')
@click.option('--alpha', type=float, default=0.0, help='Angle of the start direction from the inward normal')
@click.option('--step', '-h', type=float, default=None, help='Integration step')
@click.option('--t0', type=float, default=0.0, help='Initial time of the null lift')
@click.option('--format', 'fmt', type=click.Choice(['csv', 'rayf']), default='csv', help='Output format')
@click.option('--output', '-o', default=None, help='Output file')
@_run
def geodesic(orchestrator, scene, theta, alpha, step, t0, fmt, output):
    """Trace one magnetic geodesic from the boundary and dump its samples."""
    orchestrator.run_geodesic(scene, theta, alpha, step=step, t0=t0, output=output, fmt=fmt)


def _fan_options(fn):
    fn = click.option('--csv', 'csv_export', is_flag=True, help='Also write a CSV (N = 1 only)')(fn)
    fn = click.option('--n-alpha', type=int, default=None, help='Directions per boundary point')(fn)
    fn = click.option('--n-theta', type=int, default=None, help='Boundary points')(fn)
    fn = click.option('--output', '-o', default=None, help='Output sinogram file')(fn)
    fn = click.option('--step', '-h', type=float, default=None, help='Quadrature step')(fn)
    fn = click.option('--scene', '-s', required=True, help='Scene file or built-in scene name')(fn)
    return fn


@cli.command()
@_fan_options
@click.option('--nodes', type=int, default=None, help='Grid nodes per side for the potential')
@click.option('--grid-only', is_flag=True, help='Interpolate the potential from its grid samples')
@_run
def xray(orchestrator, scene, step, output, n_theta, n_alpha, csv_export, nodes, grid_only):
    """Magnetic X-ray transform of the scene potential over its boundary fan."""
    orchestrator.run_xray(scene, output=output, step=step, n_theta=n_theta, n_alpha=n_alpha,
                          nodes=nodes, grid_only=grid_only, csv_export=csv_export)


@cli.command()
@_fan_options
@click.option('--t0', type=float, default=0.0, help='Common initial time')
@click.option('--tau', type=float, default=None, help='Use the time profile exp(i tau t)')
@_run
def lightray(orchestrator, scene, step, output, n_theta, n_alpha, csv_export, t0, tau):
    """Light ray transform along the null lifts of the boundary fan."""
    orchestrator.run_lightray(scene, t0, tau=tau, output=output, step=step, n_theta=n_theta,
                              n_alpha=n_alpha, csv_export=csv_export)


@cli.command(name='slice')
@_fan_options
@click.option('--tau', type=float, required=True, help='Fourier frequency in time')
@_run
def slice_cmd(orchestrator, scene, step, output, n_theta, n_alpha, csv_export, tau):
    """Time-Fourier slice transform at frequency tau."""
    orchestrator.run_slice(scene, tau, output=output, step=step, n_theta=n_theta, n_alpha=n_alpha,
                           csv_export=csv_export)


@cli.command(name='verify-transport')
@click.option('--scene', '-s', required=True, help='Scene file or built-in scene name')
@click.option('--step', '-h', type=float, default=None, help='Quadrature step')
@click.option('--sm-points', type=int, default=None, help='Interior grid points per side')
@click.option('--n-dir', type=int, default=None, help='Directions per interior point')
@click.option('--output', '-o', default=None, help='Report CSV')
@_run
def verify_transport(orchestrator, scene, step, sm_points, n_dir, output):
    """Check the transport equation for W and its boundary values."""
    orchestrator.run_verify_transport(scene, step=step, sm_points=sm_points, n_dir=n_dir, output=output)


@cli.command(name='beam-verify')
@click.option('--line', '-l', 'line', default='minkowski', help="'minkowski', 'random-<seed>' or a line file")
@click.option('--steps', type=int, default=None, help='Grid steps along the line')
@click.option('--output', '-o', default=None, help='Report CSV')
@_run
def beam_verify(orchestrator, line, steps, output):
    """Check the amplitude equations and the recovery chain on a null line."""
    orchestrator.run_beam_verify(line, steps=steps, output=output)


@cli.command(name='conformal-check')
@click.option('--scene', '-s', required=True, help='Scene file or built-in scene name')
@click.option('--amplitude', type=float, default=0.5, help='Conformal factor amplitude')
@click.option('--width', type=float, default=0.4, help='Gaussian width (0 for a constant factor)')
@click.option('--theta', type=float, default=0.3, help='Boundary angle of the ray')
@click.option('--alpha', type=float, default=0.2, help='Direction angle of the ray')
@click.option('--t0', type=float, default=0.0, help='Initial time')
@click.option('--step', '-h', type=float, default=None, help='Integration step')
@click.option('--output', '-o', default=None, help='Report CSV')
@_run
def conformal_check(orchestrator, scene, amplitude, width, theta, alpha, t0, step, output):
    """Check invariance of the light ray transform under a conformal change."""
    orchestrator.run_conformal_check(scene, amplitude=amplitude, width=width, theta=theta, alpha=alpha,
                                     t0=t0, step=step, output=output)


@cli.command()
@click.option('--sinogram', '-y', required=True, type=click.Path(exists=True), help='RSIN sinogram')
@click.option('--scene', '-s', required=True, help='Scene the sinogram was computed on')
@click.option('--lam', type=float, default=None, help='Tikhonov weight')
@click.option('--iters', type=int, default=None, help='Maximum CGLS iterations')
@click.option('--nodes', type=int, default=None, help='Reconstruction grid nodes per side')
@click.option('--step', '-h', type=float, default=None, help='Quadrature step of the forward map')
@click.option('--truth', is_flag=True, help='Report the error against the scene potential')
@click.option('--output', '-o', default=None, help='Reconstruction RAYF file')
@_run
def invert(orchestrator, sinogram, scene, lam, iters, nodes, step, truth, output):
    """Reconstruct the scene potential from a sinogram by CGLS."""
    orchestrator.run_invert(sinogram, scene, lam=lam, iters=iters, output=output, nodes=nodes,
                            step=step, compare_truth=truth)


@cli.command()
@click.option('--scene', '-s', required=True, help='Built-in scene name or scene file')
@click.option('--probe-rays', type=int, default=None, help='Random rays for the trapping probe')
@click.option('--output', '-o', default=None, help='Report CSV')
@_run
def validate(orchestrator, scene, probe_rays, output):
    """Check a scene: convexity margin, |omega| bound and nontrapping."""
    orchestrator.run_validate(scene, probe_rays=probe_rays, output=output)


@cli.command()
@_run
def selftest(orchestrator):
    """Run the acceptance suite on the built-in scenes."""
    orchestrator.run_selftest()


if __name__ == '__main__':
    cli()
