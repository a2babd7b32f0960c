"""
Workflow coordinator behind every rayforge subcommand.
"""

import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table
from scipy.linalg import expm

from .beams import beam_report, random_line, recovery_defect, solve_a00, a00_closed_form
from .config import load_config
from .conformal import ConformalFactor, conformal_report
from .connection import ConnectionData, cocycle_defects, parallel_transport, transport_pair
from .errors import CacheMismatchError, ToleranceBreachError
from .fileio import (defect_rows, read_sinogram, sinogram_rows, write_csv, write_entry_images,
                     write_rayf, write_sinogram)
from .flow import PhasePoint, null_lift, trace_rows
from .inversion import LinearForwardMap, cgls_reconstruct
from .manifold import random_unit_vectors
from .scene import (PROBE_RAYS, Scene, SceneReport, builtin_scenes, load_scene, parse_line_scene,
                    validate_scene)
from .transform import BoundaryFan, SMGrid, Sinogram, TimeProfile, VolumeField, fan_points

logger = logging.getLogger(__name__)

TRANSPORT_TOLERANCES = {"transport_residual": 5e-4, "outflux_max": 1e-6}
BEAM_TOLERANCES = {
    "a00_closed_form": 1e-8,
    "c1_closed_form": 1e-8,
    "recovery": 1e-7,
    "recovery_matrix": 1e-7,
    "weighted_chain": 1e-8,
    "sign_coherence": 1e-10,
}
CONFORMAL_TOLERANCES = {
    "identity": 1e-6,
    "h_paths": 1e-8,
    "hprime": 1e-8,
    "transport_invariance": 1e-8,
    "change_of_variables": 1e-8,
}
# Acceptance resolution of the injectivity witness, independent of the run configuration.
SELFTEST_INVERSION = {"grid": 32, "n_theta": 96, "n_alpha": 48, "step": 0.02, "lambda": 1e-6,
                      "max_iters": 200, "tol": 1e-8}
# Per-scene fan of the Fourier-slice check, coarser than the run configuration fan.
SELFTEST_SLICE = {"n_theta": 16, "n_alpha": 8, "t0": 0.7, "step": 5e-3, "taus": (0.0, 1.0, 2.5)}


class RayforgeOrchestrator:
    """Loads configuration and scenes, runs workflows and writes their artifacts."""

    def __init__(self, config_path: Optional[str] = "config.yaml", threads: Optional[int] = None,
                 output_dir: Optional[str] = None, console: Optional[Console] = None):
        self.console = console or Console()
        self.config_path = config_path
        overrides: Dict[str, Any] = {}
        if threads is not None:
            overrides["parallel"] = {"threads": int(threads)}
        self.config = load_config(config_path, overrides)
        self.output_dir = Path(output_dir or self.config["output"]["directory"])

    # --- shared helpers --------------------------------------------------------------------

    def _progress(self) -> Progress:
        return Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                        console=self.console, transient=True)

    def _timed(self, description: str, fn: Callable[[], Any]) -> Any:
        with self._progress() as progress:
            task = progress.add_task(description, total=None)
            result = fn()
            progress.update(task, description=f"{description} done")
        return result

    def _path(self, output: Optional[str], default_name: str) -> Path:
        return Path(output) if output else self.output_dir / default_name

    def load_scene(self, source: str, validate: bool = True) -> Scene:
        scene = self._timed(f"Loading scene {source}...", lambda: load_scene(source, self.config, validate))
        self.console.print(f"[blue]Scene {scene.name} (hash {scene.hash:016x}, N = {scene.size})[/blue]")
        return scene

    def _fan(self, scene: Scene, n_theta: Optional[int], n_alpha: Optional[int]) -> BoundaryFan:
        return BoundaryFan(n_theta or scene.fan.n_theta, n_alpha or scene.fan.n_alpha,
                           scene.fan.glancing_margin)

    def _report_table(self, title: str, report: Dict[str, float],
                      tolerances: Dict[str, float]) -> List[str]:
        """Print a quantity/value/tolerance table; return the names of breached quantities."""
        table = Table(title=title)
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="magenta")
        table.add_column("Tolerance", style="yellow")
        table.add_column("Status")
        failed = []
        for name, value in report.items():
            tol = tolerances.get(name)
            ok = tol is None or value < tol
            if not ok:
                failed.append(name)
            table.add_row(name, f"{value:.3e}", "" if tol is None else f"{tol:.0e}",
                          "[green]PASS[/green]" if ok else "[red]FAIL[/red]")
        self.console.print(table)
        return failed

    def _require(self, failed: List[str], what: str):
        if failed:
            raise ToleranceBreachError(f"{what}: {', '.join(failed)} above tolerance")

    # --- geodesic ---------------------------------------------------------------------------

    def run_geodesic(self, scene_source: str, theta: float, alpha: float, step: Optional[float] = None,
                     t0: float = 0.0, output: Optional[str] = None, fmt: str = "csv") -> Path:
        """Trace one fan ray, lift it to a null geodesic and dump its samples."""
        scene = self.load_scene(scene_source)
        x, v = fan_points(scene.system, np.array([theta]), np.array([alpha]))
        flow = scene.flow()
        trace = flow.integrate_magnetic_geodesic(PhasePoint(x[0], v[0]), h=step)
        trace = null_lift(trace, scene.system, t0)

        speed = scene.system.norm(trace.x, trace.v)
        table = Table(title=f"Magnetic geodesic from theta={theta:g}, alpha={alpha:g}")
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("exit time", f"{trace.exit_time:.12g}")
        table.add_row("samples", str(trace.sample_count))
        table.add_row("exit point", f"({trace.x[-1, 0]:.9f}, {trace.x[-1, 1]:.9f})")
        table.add_row("speed drift", f"{np.max(np.abs(speed - 1.0)):.2e}")
        table.add_row("t(kappa) - t0", f"{trace.t[-1] - t0:.12g}")
        self.console.print(table)

        if fmt == "rayf":
            path = self._path(output, f"{scene.name}_geodesic.rayf")
            rows = np.column_stack([trace.s, trace.x, trace.v, trace.t])
            write_rayf(path, rows)
        else:
            path = write_csv(self._path(output, f"{scene.name}_geodesic.csv"), trace_rows(trace))
        self.console.print(f"[green]✅ Trace written to {path}[/green]")
        return path

    # --- transforms ------------------------------------------------------------------------

    def _write_sinogram(self, sinogram: Sinogram, output: Optional[str], default_name: str,
                        csv_export: bool) -> Path:
        path = write_sinogram(self._path(output, default_name), sinogram)
        self.console.print(f"[green]✅ Sinogram written to {path}[/green]")
        if csv_export and sinogram.size == 1:
            csv_path = write_csv(path.with_suffix(".csv"), sinogram_rows(sinogram))
            self.console.print(f"[green]✅ CSV written to {csv_path}[/green]")
        return path

    def _potential(self, scene: Scene, nodes: Optional[int], grid_only: bool) -> VolumeField:
        potential = scene.potential(nodes)
        return potential.grid_only() if grid_only else potential

    def run_xray(self, scene_source: str, output: Optional[str] = None, step: Optional[float] = None,
                 n_theta: Optional[int] = None, n_alpha: Optional[int] = None,
                 nodes: Optional[int] = None, grid_only: bool = False, csv_export: bool = False) -> Path:
        scene = self.load_scene(scene_source)
        fan = self._fan(scene, n_theta, n_alpha)
        potential = self._potential(scene, nodes, grid_only)
        transformer = scene.transformer()
        sinogram = self._timed(f"Integrating {fan.size} rays...",
                               lambda: transformer.xray_transform(potential, scene.connection, fan, step))
        return self._write_sinogram(sinogram, output, f"{scene.name}_xray.rsin", csv_export)

    def run_slice(self, scene_source: str, tau: float, output: Optional[str] = None,
                  step: Optional[float] = None, n_theta: Optional[int] = None,
                  n_alpha: Optional[int] = None, csv_export: bool = False) -> Path:
        scene = self.load_scene(scene_source)
        fan = self._fan(scene, n_theta, n_alpha)
        potential = scene.potential().with_profile(None)
        transformer = scene.transformer()
        sinogram = self._timed(f"Integrating {fan.size} rays at tau={tau:g}...",
                               lambda: transformer.slice_transform(potential, tau, scene.connection, fan, step))
        return self._write_sinogram(sinogram, output, f"{scene.name}_slice.rsin", csv_export)

    def run_lightray(self, scene_source: str, t0: float, tau: Optional[float] = None,
                     output: Optional[str] = None, step: Optional[float] = None,
                     n_theta: Optional[int] = None, n_alpha: Optional[int] = None,
                     csv_export: bool = False) -> Path:
        """Light ray transform over the fan; ``tau`` replaces the scene's time profile by ``exp(i tau t)``."""
        scene = self.load_scene(scene_source)
        fan = self._fan(scene, n_theta, n_alpha)
        potential = scene.potential()
        if tau is not None:
            potential = potential.with_profile(TimeProfile.separable(tau))
        transformer = scene.transformer()
        sinogram = self._timed(f"Integrating {fan.size} null geodesics from t0={t0:g}...",
                               lambda: transformer.lightray_fan(potential, t0, scene.connection, fan, step))
        return self._write_sinogram(sinogram, output, f"{scene.name}_lightray.rsin", csv_export)

    # --- verification ----------------------------------------------------------------------

    def run_verify_transport(self, scene_source: str, step: Optional[float] = None,
                             sm_points: Optional[int] = None, n_dir: Optional[int] = None,
                             n_theta: int = 16, n_alpha: int = 8,
                             output: Optional[str] = None) -> Dict[str, float]:
        """Residual of the transport equation for ``W^V`` and its outflux boundary value."""
        scene = self.load_scene(scene_source)
        cfg = self.config["transform"]
        fan = BoundaryFan(n_theta, n_alpha, scene.fan.glancing_margin)
        grid = SMGrid.build(scene.system, sm_points or int(cfg["sm_points"]), n_dir or int(cfg["n_dir"]), fan)
        potential = scene.potential()
        transformer = scene.transformer()

        def compute():
            field = transformer.wv_field(potential, scene.connection, grid, step)
            residual = transformer.transport_residual(field, potential, scene.connection)
            sinogram = transformer.xray_transform(potential, scene.connection, fan, step)
            return field, residual, sinogram

        field, residual, sinogram = self._timed(f"Evaluating W on {grid.size} phase points...", compute)
        influx = grid.select("influx")
        boundary_gap = float(np.max(np.linalg.norm(field.values[influx] - sinogram.flat(), axis=(-2, -1))))
        report = {
            "transport_residual": residual.sup,
            "outflux_max": residual.outflux_max,
            "influx_vs_sinogram": boundary_gap,
        }
        self.console.print(f"[blue]{residual.checked} interior samples checked, {residual.skipped} skipped[/blue]")
        failed = self._report_table(f"Transport identity on {scene.name}", report,
                                    dict(TRANSPORT_TOLERANCES, influx_vs_sinogram=1e-9))
        path = write_csv(self._path(output, f"{scene.name}_transport.csv"),
                         defect_rows(report, dict(TRANSPORT_TOLERANCES, influx_vs_sinogram=1e-9)))
        self.console.print(f"[green]Report written to {path}[/green]")
        self._require(failed, "transport identity")
        return report

    def run_beam_verify(self, line_source: str, steps: Optional[int] = None,
                        output: Optional[str] = None) -> Dict[str, float]:
        line = parse_line_scene(line_source, steps or int(self.config["beams"]["steps"]))
        report = self._timed(f"Solving amplitude equations on {line.name}...", lambda: beam_report(line))
        failed = self._report_table(f"Beam identities on {line.name}", report, BEAM_TOLERANCES)
        path = write_csv(self._path(output, f"{line.name}_beams.csv"), defect_rows(report, BEAM_TOLERANCES))
        self.console.print(f"[green]Report written to {path}[/green]")
        self._require(failed, "beam identities")
        return report

    def run_conformal_check(self, scene_source: str, amplitude: float = 0.5, width: float = 0.4,
                            theta: float = 0.3, alpha: float = 0.2, t0: float = 0.0,
                            step: Optional[float] = None, output: Optional[str] = None) -> Dict[str, float]:
        scene = self.load_scene(scene_source)
        factor = (ConformalFactor.constant(1.0 + amplitude) if width <= 0
                  else ConformalFactor.spatial_gaussian(amplitude, scene.system.domain.center, width))
        transformer = scene.transformer()
        potential = scene.potential()
        report = self._timed(
            "Reparametrizing the null geodesic...",
            lambda: conformal_report(transformer, potential, factor, (t0, theta, alpha), scene.connection, step))
        failed = self._report_table(f"Conformal invariance on {scene.name} ({factor.name})", report,
                                    CONFORMAL_TOLERANCES)
        path = write_csv(self._path(output, f"{scene.name}_conformal.csv"),
                         defect_rows(report, CONFORMAL_TOLERANCES))
        self.console.print(f"[green]Report written to {path}[/green]")
        self._require(failed, "conformal invariance")
        return report

    def run_validate(self, scene_source: str, probe_rays: Optional[int] = None,
                     output: Optional[str] = None) -> SceneReport:
        """Parse and validate a scene; validation failures raise with exit code 3."""
        scene = self.load_scene(scene_source, validate=False)
        report = self._timed("Checking convexity, |omega| and trapping...",
                             lambda: validate_scene(scene, probe_rays or PROBE_RAYS))
        table = Table(title=f"Scene {scene.name}")
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="green")
        for row in report.rows():
            table.add_row(row["quantity"], f"{row['value']:.6g}")
        table.add_row("probe rays", str(report.probe_rays))
        self.console.print(table)
        if output:
            path = write_csv(output, report.rows())
            self.console.print(f"[green]Report written to {path}[/green]")
        self.console.print("[green]✅ Scene is valid[/green]")
        return report

    # --- inversion -------------------------------------------------------------------------

    def run_invert(self, sinogram_path: str, scene_source: str, lam: Optional[float] = None,
                   iters: Optional[int] = None, output: Optional[str] = None,
                   nodes: Optional[int] = None, step: Optional[float] = None,
                   compare_truth: bool = False) -> Path:
        """CGLS reconstruction of the scene potential from a stored sinogram."""
        inv = self.config["inversion"]
        y = read_sinogram(sinogram_path)
        scene = self.load_scene(scene_source)
        if y.scene_hash != scene.hash:
            raise CacheMismatchError(
                f"Sinogram was computed for scene hash {y.scene_hash:016x}, not {scene.hash:016x}")
        nodes = int(nodes or inv["grid"])
        template = VolumeField.zeros(scene.system.domain, scene.size, nodes)
        transformer = scene.transformer()
        op = self._timed(f"Caching {y.fan.size} rays...",
                         lambda: LinearForwardMap(transformer, scene.connection, y.fan, template,
                                                  float(step or inv["step"])))
        truth = scene.potential(nodes, analytic=False) if compare_truth else None
        estimate, report = self._timed(
            "Running CGLS...",
            lambda: cgls_reconstruct(op, y, lam=float(inv["lambda"] if lam is None else lam),
                                     max_iters=int(iters or inv["max_iters"]), tol=float(inv["tol"]),
                                     truth=truth, stagnation_window=int(inv["stagnation_window"])))

        path = write_rayf(self._path(output, f"{scene.name}_reconstruction.rayf"), estimate.values)
        images = write_entry_images(path.with_suffix(""), estimate.values)
        history = write_csv(path.with_name(path.stem + "_report.csv"), report.rows())

        table = Table(title="Reconstruction")
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("iterations", str(report.iterations))
        table.add_row("final residual", f"{report.residual_history[-1]:.3e}")
        table.add_row("lambda", f"{report.lam:.1e}")
        if report.relative_error is not None:
            table.add_row("relative error", f"{report.relative_error:.3e}")
        table.add_row("solve time", f"{report.timings['solve']:.2f}s")
        table.add_row("diverged", "yes" if report.diverged else "no")
        self.console.print(table)
        self.console.print(f"[green]✅ Reconstruction written to {path} ({len(images)} images, "
                           f"history {history})[/green]")
        return path

    # --- acceptance suite ------------------------------------------------------------------

    def _criterion_geometry(self) -> Tuple[float, float]:
        scene = load_scene("euclid-disk-b05", self.config, validate=False)
        b = scene.spec.section("omega")["strength"]
        rng = np.random.default_rng(1)
        fan_theta = rng.uniform(0, 2 * np.pi, 100)
        fan_alpha = rng.uniform(-1.4, 1.4, 100)
        x, v = fan_points(scene.system, fan_theta, fan_alpha)
        bundle = scene.flow().trace_batch(x, v, h=1e-3)
        centers = x + np.stack([-v[:, 1], v[:, 0]], axis=-1) / b
        worst = 0.0
        for i in range(bundle.size):
            k = int(bundle.counts[i])
            dist = np.linalg.norm(bundle.positions[i, :k + 1] - centers[i], axis=-1)
            worst = max(worst, float(np.max(np.abs(dist - 1.0 / abs(b)))))
        return worst, 1e-7

    def _criterion_straight_line(self) -> Tuple[float, float]:
        scene = load_scene("euclid-disk-b0", self.config, validate=False)
        p = scene.spec.section("potential")
        fan = BoundaryFan(64, 64, scene.fan.glancing_margin)
        sinogram = scene.transformer().xray_transform(scene.potential(), scene.connection, fan, 1e-2)
        x, v = fan.phase_points(scene.system)
        rel = x - np.array([p["center_x"], p["center_y"]])
        d = np.abs(rel[:, 0] * v[:, 1] - rel[:, 1] * v[:, 0])
        sigma = p["sigma"]
        oracle = p["amplitude"] * sigma * np.sqrt(np.pi) * np.exp(-d ** 2 / sigma ** 2)
        err = np.max(np.abs(sinogram.flat()[:, 0, 0] - oracle)) / np.max(np.abs(oracle))
        return float(err), 1e-4

    def _criterion_transport(self) -> Tuple[float, float]:
        rng = np.random.default_rng(2)
        base = load_scene("euclid-disk-b0", self.config, validate=False)
        c = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        conn = ConnectionData.constant_matrices(c).with_omega(base.system.omega)
        flow = base.flow()
        trace = flow.integrate_magnetic_geodesic(PhasePoint(np.zeros(2), np.array([1.0, 0.0])), h=1e-3)
        samples = parallel_transport(trace, conn).samples
        expm_err = max(float(np.linalg.norm(samples[i] - expm(-trace.s[i] * c)))
                       for i in range(0, trace.sample_count, 50))

        scene = load_scene("euclid-disk-b03-su2", self.config, validate=False)
        flow = scene.flow()
        x = scene.system.domain.sample_interior(rng, 100, margin=0.05)
        v = random_unit_vectors(scene.system, x, rng)
        kappa = flow.exit_times(x, v, h=5e-3)
        s = rng.uniform(0.0, 0.6, 100) * kappa
        s_next = rng.uniform(0.0, 1.0, 100) * (kappa - s)
        cocycle = float(np.max(cocycle_defects(flow, x, v, s, s_next, scene.connection, h=5e-3)))

        forward, _ = transport_pair(flow.trace_batch(x, v, h=5e-3), scene.connection)
        gram = np.swapaxes(forward.conj(), -1, -2) @ forward
        unitarity = float(np.max(np.linalg.norm(gram - np.eye(2), axis=(-2, -1))))
        return max(expm_err / 1e-9, cocycle / 1e-7, unitarity / 1e-8), 1.0

    def _identity_grid(self, scene: Scene) -> SMGrid:
        """Phase-space samples at the configured SM resolution over the scene's fan."""
        cfg = self.config["transform"]
        return SMGrid.build(scene.system, int(cfg["sm_points"]), int(cfg["n_dir"]), scene.fan)

    def _criterion_transport_identity(self) -> Tuple[float, float]:
        scene = load_scene("euclid-disk-b03-su2", self.config, validate=False)
        transformer = scene.transformer()
        grid = self._identity_grid(scene)
        potential = scene.potential()
        field = transformer.wv_field(potential, scene.connection, grid, 5e-3)
        residual = transformer.transport_residual(field, potential, scene.connection)
        return max(residual.sup / 5e-4, residual.outflux_max / 1e-6), 1.0

    def _criterion_slice(self) -> Tuple[float, float]:
        cfg = SELFTEST_SLICE
        worst = 0.0
        t0 = float(cfg["t0"])
        for name in builtin_scenes():
            scene = load_scene(name, self.config, validate=False)
            transformer = scene.transformer()
            fan = BoundaryFan(int(cfg["n_theta"]), int(cfg["n_alpha"]), scene.fan.glancing_margin)
            q = scene.potential().with_profile(None)
            for tau in cfg["taus"]:
                sliced = transformer.slice_transform(q, tau, scene.connection, fan, cfg["step"])
                timed = q.with_profile(TimeProfile.separable(tau))
                light = transformer.lightray_fan(timed, t0, scene.connection, fan, cfg["step"])
                defect = np.linalg.norm(light.values - np.exp(1j * tau * t0) * sliced.values, axis=(-2, -1))
                worst = max(worst, float(defect.max()))
        return worst, 1e-6

    def _criterion_beams(self) -> Tuple[float, float]:
        worst_recovery = 0.0
        worst_a00 = 0.0
        for seed in range(50):
            line = random_line(seed, steps=1000)
            worst_recovery = max(worst_recovery, recovery_defect(line))
            worst_a00 = max(worst_a00, float(np.max(np.abs(solve_a00(line) - a00_closed_form(line)))))
        return max(worst_recovery / 1e-7, worst_a00 / 1e-8), 1.0

    def _criterion_conformal(self) -> Tuple[float, float]:
        scene = load_scene("euclid-disk-b03-su2", self.config, validate=False)
        factor = ConformalFactor.spatial_gaussian(0.5, (0.1, -0.2), 0.4)
        report = conformal_report(scene.transformer(), scene.potential(), factor, (0.0, 0.4, 0.3),
                                  scene.connection, 5e-3)
        return max(report["identity"] / 1e-6, report["hprime"] / 1e-8), 1.0

    def _criterion_inversion(self) -> Tuple[float, float]:
        inv = SELFTEST_INVERSION
        scene = load_scene("euclid-disk-b03-su2", self.config, validate=False)
        transformer = scene.transformer()
        truth = scene.potential(int(inv["grid"]), analytic=False)
        fan = BoundaryFan(int(inv["n_theta"]), int(inv["n_alpha"]), scene.fan.glancing_margin)
        op = LinearForwardMap(transformer, scene.connection, fan, truth, float(inv["step"]))
        adjoint = op.adjoint_defect()
        y = op.forward_apply(truth)
        _, report = cgls_reconstruct(op, y, lam=float(inv["lambda"]), max_iters=int(inv["max_iters"]),
                                     tol=float(inv["tol"]), truth=truth)
        return max(report.relative_error / 0.05, adjoint / 1e-10), 1.0

    def run_selftest(self) -> bool:
        """Run the acceptance suite; raise ``ToleranceBreachError`` if any criterion fails."""
        self.console.print(Panel.fit(
            "[bold blue]rayforge self-test[/bold blue]\n"
            "Acceptance criteria on the built-in scenes",
            border_style="blue"
        ))
        sm = self.config["transform"]
        sm_label = f"{sm['sm_points']}x{sm['sm_points']} points x {sm['n_dir']} directions"
        slice_label = f"{SELFTEST_SLICE['n_theta']}x{SELFTEST_SLICE['n_alpha']} fan per scene, reduced"
        criteria = [
            ("1 magnetic circles (b = 0.5)", self._criterion_geometry),
            ("2 straight-line Gaussian oracle", self._criterion_straight_line),
            ("3 transport: expm, cocycle, unitarity", self._criterion_transport),
            (f"4 transport identity for W ({sm_label})", self._criterion_transport_identity),
            (f"5 Fourier-slice identity ({slice_label})", self._criterion_slice),
            ("6 beam recovery chain", self._criterion_beams),
            ("7 conformal invariance", self._criterion_conformal),
            ("8 CGLS injectivity witness", self._criterion_inversion),
        ]
        table = Table(title="Acceptance criteria")
        table.add_column("Criterion", style="cyan")
        table.add_column("Measured", style="magenta")
        table.add_column("Bound", style="yellow")
        table.add_column("Time", style="blue")
        table.add_column("Status")

        failures = []
        started = time.perf_counter()
        with self._progress() as progress:
            task = progress.add_task("Running criteria...", total=len(criteria))
            for label, check in criteria:
                progress.update(task, description=f"Criterion {label}...")
                t = time.perf_counter()
                try:
                    value, bound = check()
                    ok = bool(value < bound)
                    measured = f"{value:.3e}"
                except Exception as e:  # a crashing criterion is a failed criterion
                    logger.exception("Criterion %s raised", label)
                    ok, measured, bound = False, escape(f"error: {e}"), float("nan")
                if not ok:
                    failures.append(label)
                table.add_row(label, measured, f"{bound:.0e}", f"{time.perf_counter() - t:.1f}s",
                              "[green]PASS[/green]" if ok else "[red]FAIL[/red]")
                progress.advance(task)

        self.console.print(table)
        self.console.print(f"[blue]Total time {time.perf_counter() - started:.1f}s[/blue]")
        if failures:
            raise ToleranceBreachError(f"{len(failures)} acceptance criteria failed: {'; '.join(failures)}")
        self.console.print("[green]✅ All acceptance criteria passed[/green]")
        return True
