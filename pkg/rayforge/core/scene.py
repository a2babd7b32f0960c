"""
Scene files: parsing, canonical hashing, validation and construction of runtime objects.

A scene is an INI file with the sections ``[domain]``, ``[metric]``, ``[omega]``,
``[connection]``, ``[potential]``, ``[fan]`` and ``[solver]``. Every section is
optional; unknown sections and keys are rejected. Built-in scenes live in
``rayforge/scenes/<name>.ini`` and are selected by name.
"""

import configparser
import copy
import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .beams import BeamLine, minkowski_line, random_line
from .config import resolve_config
from .connection import ConnectionData
from .errors import (DimensionMismatchError, FileFormatError, SceneSyntaxError,
                     SceneValidationError, TrappedRayError)
from .fileio import fnv1a64, read_rayf, read_rayf_complex
from .flow import MagneticFlow
from .grids import BoxGrid
from .manifold import ChartDomain, MagneticSystem, MetricField, OneFormField, random_unit_vectors
from .transform import BoundaryFan, RayTransformer, TimeProfile, VolumeField, support_mask

logger = logging.getLogger(__name__)

SCENE_DIR = Path(__file__).resolve().parent.parent / "scenes"
SECTION_ORDER = ("domain", "metric", "omega", "connection", "potential", "fan", "solver")
PROBE_RAYS = 200
PROBE_STEP_FRACTION = 0.01


@dataclass(frozen=True)
class Param:
    """Typed scene key: ``kind`` is float, int, str, bool, complex-list or float-list."""

    kind: str
    default: Any
    choices: Tuple[str, ...] = ()
    check: Optional[Callable[[Any], bool]] = None
    hint: str = ""


def _positive(v) -> bool:
    return v > 0


SCHEMA: Dict[str, Dict[str, Param]] = {
    "domain": {
        "kind": Param("str", "disk", choices=("disk", "super-ellipse")),
        "radius": Param("float", 1.0, check=_positive, hint="> 0"),
        "center_x": Param("float", 0.0),
        "center_y": Param("float", 0.0),
        "exponent": Param("float", 2.0, check=lambda v: v >= 2.0, hint=">= 2"),
        "semi_axis_1": Param("float", 1.0, check=_positive, hint="> 0"),
        "semi_axis_2": Param("float", 1.0, check=_positive, hint="> 0"),
    },
    "metric": {
        "kind": Param("str", "euclidean", choices=("euclidean", "hyperbolic", "conformal-gaussian", "grid")),
        "amplitude": Param("float", 0.2),
        "width": Param("float", 0.5, check=_positive, hint="> 0"),
        "center_x": Param("float", 0.0),
        "center_y": Param("float", 0.0),
        "path": Param("str", ""),
        "realization": Param("str", "analytic", choices=("analytic", "grid")),
        "cells": Param("int", 128, check=lambda v: v >= 8, hint=">= 8"),
    },
    "omega": {
        "kind": Param("str", "zero", choices=("zero", "constant-field", "swirl", "grid")),
        "strength": Param("float", 0.0),
        "amplitude": Param("float", 0.0),
        "width": Param("float", 0.5, check=_positive, hint="> 0"),
        "path": Param("str", ""),
    },
    "connection": {
        "kind": Param("str", "zero", choices=("zero", "constant-diagonal", "su2-gaussian", "grid")),
        "size": Param("int", 0, check=lambda v: 0 <= v <= 8, hint="between 1 and 8"),
        "diagonal": Param("complex-list", ()),
        "skew": Param("bool", False),
        "amplitude": Param("float", 1.0),
        "width": Param("float", 0.5, check=_positive, hint="> 0"),
        "center_x": Param("float", 0.0),
        "center_y": Param("float", 0.0),
        "path": Param("str", ""),
    },
    "potential": {
        "kind": Param("str", "zero", choices=("zero", "gaussian-bump", "random-smooth", "grid")),
        "amplitude": Param("float", 1.0),
        "sigma": Param("float", 0.2, check=_positive, hint="> 0"),
        "center_x": Param("float", 0.0),
        "center_y": Param("float", 0.0),
        "seed": Param("int", 0, check=lambda v: v >= 0, hint=">= 0"),
        "modes": Param("int", 4, check=lambda v: 1 <= v <= 32, hint="between 1 and 32"),
        "width": Param("float", 0.35, check=_positive, hint="> 0"),
        "nodes": Param("int", 128, check=lambda v: v >= 16, hint=">= 16"),
        "path": Param("str", ""),
        "profile": Param("str", "none", choices=("none", "separable", "spline")),
        "frequency": Param("float", 0.0),
        "knots": Param("float-list", ()),
    },
    "fan": {
        "n_theta": Param("int", 64, check=lambda v: v >= 1, hint=">= 1"),
        "n_alpha": Param("int", 64, check=lambda v: v >= 1, hint=">= 1"),
        "glancing_margin": Param("float", 0.02, check=lambda v: 0.0 < v < 0.5 * math.pi,
                                 hint="in (0, pi/2)"),
    },
    "solver": {
        "step": Param("float", None, check=_positive, hint="> 0"),
        "s_max_factor": Param("float", None, check=_positive, hint="> 0"),
    },
}


@dataclass
class SceneSpec:
    """Parsed, range-checked scene with its canonical text and FNV-1a hash."""

    name: str
    values: Dict[str, Dict[str, Any]]
    canonical: str
    hash: int
    base_dir: Path = field(default_factory=Path.cwd)

    def section(self, name: str) -> Dict[str, Any]:
        return self.values[name]

    def resolve_path(self, raw: str) -> Path:
        path = Path(raw)
        return path if path.is_absolute() else self.base_dir / path


# --- parsing -----------------------------------------------------------------------------


def _locate(lines: Sequence[str], section: str, key: Optional[str] = None) -> Tuple[int, int]:
    """1-based line and column of ``key`` (its value) or of the section header."""
    current = None
    for number, line in enumerate(lines, start=1):
        header = re.match(r"\s*\[([^\]]+)\]", line)
        if header:
            current = header.group(1).strip().lower()
            if key is None and current == section:
                return number, header.start(1) + 1
            continue
        if key is not None and current == section:
            match = re.match(r"\s*([^=:\s]+)\s*[=:]\s*", line)
            if match and match.group(1).lower() == key:
                return number, match.end() + 1
    return 0, 0


def _convert(param: Param, raw: str):
    raw = raw.strip()
    if param.kind == "float":
        return float(raw)
    if param.kind == "int":
        return int(raw)
    if param.kind == "bool":
        lowered = raw.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if param.kind == "complex-list":
        return tuple(complex(item.replace(" ", "")) for item in raw.split(",") if item.strip())
    if param.kind == "float-list":
        return tuple(float(item) for item in raw.split(",") if item.strip())
    return raw


def _format(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def _syntax_error(exc: configparser.Error) -> SceneSyntaxError:
    if isinstance(exc, configparser.ParsingError) and getattr(exc, "errors", None):
        lineno, line = exc.errors[0]
        return SceneSyntaxError(f"cannot parse {line.strip()!r}", lineno, 1)
    lineno = getattr(exc, "lineno", None) or 0
    message = exc.message if hasattr(exc, "message") else str(exc)
    return SceneSyntaxError(message.splitlines()[0], lineno, 1)


def parse_scene_text(text: str, name: str = "<scene>", base_dir: Optional[Path] = None) -> SceneSpec:
    """Parse scene text into a ``SceneSpec`` (syntax and ranges; no geometry yet)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       strict=True, default_section="__defaults__")
    try:
        parser.read_string(text, source=name)
    except configparser.Error as e:
        raise _syntax_error(e) from e

    lines = text.splitlines()
    values: Dict[str, Dict[str, Any]] = {}
    for section in parser.sections():
        if section.lower() not in SCHEMA:
            line, col = _locate(lines, section.lower())
            raise SceneSyntaxError(f"unknown section [{section}]", line, col)

    for section in SECTION_ORDER:
        schema = SCHEMA[section]
        resolved = {key: copy.deepcopy(param.default) for key, param in schema.items()}
        matching = [s for s in parser.sections() if s.lower() == section]
        if len(matching) > 1:
            line, col = _locate(lines, section)
            raise SceneSyntaxError(f"section [{section}] appears more than once", line, col)
        if matching:
            for key, raw in parser.items(matching[0]):
                line, col = _locate(lines, section, key)
                if key not in schema:
                    raise SceneSyntaxError(f"unknown key '{key}' in [{section}]", line, col)
                param = schema[key]
                try:
                    value = _convert(param, raw)
                except ValueError:
                    raise SceneSyntaxError(f"[{section}] {key}: cannot read {raw.strip()!r} as {param.kind}",
                                           line, col)
                if param.choices and value not in param.choices:
                    raise SceneValidationError(
                        f"[{section}] {key} = {value!r} is not one of {', '.join(param.choices)}")
                if param.check is not None and not param.check(value):
                    raise SceneValidationError(f"[{section}] {key} = {value!r} out of range ({param.hint})")
                resolved[key] = value
        values[section] = resolved

    base_dir = base_dir or Path.cwd()
    canonical = _canonical_text(values, base_dir)
    spec = SceneSpec(name, values, canonical, fnv1a64(canonical.encode("utf-8")), base_dir)
    logger.debug("Parsed scene %s (hash %016x)", name, spec.hash)
    return spec


def _canonical_text(values: Dict[str, Dict[str, Any]], base_dir: Path) -> str:
    """Sorted ``key = value`` text with file references replaced by content hashes."""
    out: List[str] = []
    for section in SECTION_ORDER:
        out.append(f"[{section}]")
        for key in sorted(values[section]):
            value = values[section][key]
            if key == "path" and value:
                path = Path(value) if Path(value).is_absolute() else base_dir / value
                try:
                    value = f"sha256:{hashlib.sha256(path.read_bytes()).hexdigest()}"
                except OSError as e:
                    raise FileFormatError(f"Cannot read scene data file {path}: {e}") from e
            out.append(f"{key} = {_format(value)}")
    return "\n".join(out) + "\n"


def builtin_scenes() -> List[str]:
    return sorted(p.stem for p in SCENE_DIR.glob("*.ini"))


def parse_scene(source: Union[str, Path]) -> SceneSpec:
    """Parse a scene file, or a built-in scene given by name."""
    path = Path(source)
    if not path.exists() and not path.suffix:
        builtin = SCENE_DIR / f"{source}.ini"
        if builtin.exists():
            path = builtin
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise FileFormatError(
            f"Scene '{source}' is neither a readable file nor a built-in "
            f"({', '.join(builtin_scenes())})") from e
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw[:e.start].count(b"\n") + 1
        raise SceneSyntaxError("file is not valid UTF-8", line, 1) from e
    return parse_scene_text(text, path.stem, path.resolve().parent)


# --- closed-form potentials ----------------------------------------------------------------


def gaussian_bump(size: int, amplitude: float, sigma: float,
                  center: Sequence[float] = (0.0, 0.0)) -> Callable[[np.ndarray], np.ndarray]:
    """``a exp(-|x - x0|^2 / sigma^2) Id``."""
    c = np.asarray(center, dtype=float)
    eye = np.eye(size, dtype=complex)

    def fn(x):
        d = np.asarray(x, dtype=float) - c
        return (amplitude * np.exp(-np.sum(d * d, axis=-1) / sigma ** 2))[..., None, None] * eye

    return fn


def inner_radius(domain: ChartDomain) -> float:
    return domain.radius if domain.kind == "disk" else min(domain.semi_axes)


def random_smooth(domain: ChartDomain, size: int, seed: int, modes: int = 4, width: float = 0.35,
                  amplitude: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Random complex Gaussian mixture times a compactly supported bump inside the domain."""
    rng = np.random.default_rng(seed)
    reach = 0.8 * inner_radius(domain)
    center = np.asarray(domain.center)
    radii = 0.5 * reach * np.sqrt(rng.uniform(size=modes))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    centers = center + radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    coefficients = amplitude * (rng.normal(size=(modes, size, size))
                                + 1j * rng.normal(size=(modes, size, size))) / np.sqrt(2.0)

    def fn(x):
        x = np.asarray(x, dtype=float)
        rho2 = np.sum((x - center) ** 2, axis=-1) / reach ** 2
        inside = rho2 < 1.0
        cutoff = np.zeros(rho2.shape)
        cutoff[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        d2 = np.sum((x[..., None, :] - centers) ** 2, axis=-1)
        mix = np.einsum("...k,kij->...ij", np.exp(-d2 / width ** 2), coefficients)
        return cutoff[..., None, None] * mix

    return fn


# --- construction --------------------------------------------------------------------------


@dataclass
class Scene:
    """Runtime objects of a scene."""

    spec: SceneSpec
    system: MagneticSystem
    connection: ConnectionData
    fan: BoundaryFan
    config: Dict[str, Any]
    potential_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    potential_grid: Optional[VolumeField] = None
    profile: Optional[TimeProfile] = None

    @property
    def hash(self) -> int:
        return self.spec.hash

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def size(self) -> int:
        return self.connection.size

    def potential(self, nodes: Optional[int] = None, analytic: bool = True) -> VolumeField:
        """The scene potential on a grid of ``nodes`` per side (file grids keep their own)."""
        if self.potential_grid is not None:
            return self.potential_grid.with_profile(self.profile)
        nodes = int(self.spec.section("potential")["nodes"] if nodes is None else nodes)
        domain = self.system.domain
        if self.potential_fn is None:
            return VolumeField.zeros(domain, self.size, nodes).with_profile(self.profile)
        field = VolumeField.from_function(domain, self.potential_fn, self.size, nodes,
                                          analytic=analytic, name=self.spec.section("potential")["kind"])
        return field.with_profile(self.profile)

    def transformer(self, threads: Optional[int] = None) -> RayTransformer:
        return RayTransformer(self.system, self.config, scene_hash=self.hash, threads=threads)

    def flow(self) -> MagneticFlow:
        return MagneticFlow(self.system, self.config)


def _grid_for(spec: SceneSpec, domain: ChartDomain, n: int) -> BoxGrid:
    return BoxGrid.covering(*domain.bounding_box(), n)


def _read_square(spec: SceneSpec, section: str, trailing: Tuple[int, ...], complex_values: bool = False):
    raw = spec.section(section)["path"]
    if not raw:
        raise SceneValidationError(f"[{section}] kind = grid needs a path")
    path = spec.resolve_path(raw)
    array = read_rayf_complex(path) if complex_values else read_rayf(path)
    if array.ndim != 2 + len(trailing) or array.shape[0] != array.shape[1] \
            or any(t and a != t for a, t in zip(array.shape[2:], trailing)):
        raise FileFormatError(f"{path}: unexpected array shape {array.shape} for [{section}]")
    return array


def _build_domain(spec: SceneSpec) -> ChartDomain:
    d = spec.section("domain")
    center = (d["center_x"], d["center_y"])
    if d["kind"] == "disk":
        return ChartDomain.disk(d["radius"], center)
    return ChartDomain.super_ellipse(d["exponent"], (d["semi_axis_1"], d["semi_axis_2"]), center)


def _build_metric(spec: SceneSpec, domain: ChartDomain) -> MetricField:
    m = spec.section("metric")
    if m["kind"] == "euclidean":
        return MetricField.euclidean()
    if m["kind"] == "hyperbolic":
        lower, upper = domain.bounding_box()
        if np.max(np.abs(np.concatenate([lower, upper]))) >= 1.0:
            raise SceneValidationError("hyperbolic metric needs a domain inside the open unit disk")
        return MetricField.hyperbolic()
    if m["kind"] == "conformal-gaussian":
        return MetricField.conformal_gaussian(m["amplitude"], (m["center_x"], m["center_y"]), m["width"])
    values = _read_square(spec, "metric", (2, 2))
    return MetricField.from_grid(_grid_for(spec, domain, values.shape[0]), values)


def _build_omega(spec: SceneSpec, domain: ChartDomain) -> OneFormField:
    o = spec.section("omega")
    if o["kind"] == "zero":
        return OneFormField.zero()
    if o["kind"] == "constant-field":
        return OneFormField.constant_field(o["strength"])
    if o["kind"] == "swirl":
        return OneFormField.swirl(o["amplitude"], o["width"])
    values = _read_square(spec, "omega", (2,))
    return OneFormField.from_grid(_grid_for(spec, domain, values.shape[0]), values)


def _build_connection(spec: SceneSpec, domain: ChartDomain) -> ConnectionData:
    c = spec.section("connection")
    requested = c["size"]
    if c["kind"] == "zero":
        conn = ConnectionData.zero(requested or 1)
    elif c["kind"] == "constant-diagonal":
        if not c["diagonal"]:
            raise SceneValidationError("[connection] constant-diagonal needs a diagonal list")
        conn = ConnectionData.constant_diagonal(c["diagonal"], skew=c["skew"])
    elif c["kind"] == "su2-gaussian":
        conn = ConnectionData.su2_gaussian(c["amplitude"], c["width"], (c["center_x"], c["center_y"]))
    else:
        values = _read_square(spec, "connection", (3, 0, 0), complex_values=True)
        grid = _grid_for(spec, domain, values.shape[0])
        conn = ConnectionData.from_grid(grid, values[:, :, 0], values[:, :, 1:])
    if requested and requested != conn.size:
        raise SceneValidationError(
            f"[connection] size = {requested} but a {c['kind']} connection acts on C^{conn.size}")
    return conn


def _build_profile(spec: SceneSpec) -> Optional[TimeProfile]:
    p = spec.section("potential")
    if p["profile"] == "separable":
        return TimeProfile.separable(p["frequency"])
    if p["profile"] == "spline":
        try:
            return TimeProfile.spline(p["knots"])
        except ValueError as e:
            raise SceneValidationError(f"[potential] knots: {e}") from e
    return None


def build_scene(spec: SceneSpec, config: Optional[Dict[str, Any]] = None) -> Scene:
    """Turn a parsed spec into a magnetic system, connection, fan and potential."""
    config = resolve_config(config)
    solver = spec.section("solver")
    for key in ("step", "s_max_factor"):
        if solver[key] is not None:
            config["flow"][key] = solver[key]

    try:
        domain = _build_domain(spec)
    except ValueError as e:
        raise SceneValidationError(f"[domain] {e}") from e
    metric = _build_metric(spec, domain)
    omega = _build_omega(spec, domain)
    system = MagneticSystem(domain, metric, omega, name=spec.name)
    m = spec.section("metric")
    if m["realization"] == "grid" and m["kind"] != "grid":
        system = system.on_grid(m["cells"])

    conn = _build_connection(spec, domain).with_omega(system.omega)
    f = spec.section("fan")
    fan = BoundaryFan(f["n_theta"], f["n_alpha"], f["glancing_margin"])

    p = spec.section("potential")
    potential_fn = None
    potential_grid = None
    if p["kind"] == "gaussian-bump":
        potential_fn = gaussian_bump(conn.size, p["amplitude"], p["sigma"], (p["center_x"], p["center_y"]))
    elif p["kind"] == "random-smooth":
        potential_fn = random_smooth(domain, conn.size, p["seed"], p["modes"], p["width"], p["amplitude"])
    elif p["kind"] == "grid":
        values = _read_square(spec, "potential", (conn.size, conn.size), complex_values=True)
        grid = _grid_for(spec, domain, values.shape[0])
        potential_grid = VolumeField(grid, values, support_mask(domain, grid), name="grid")
    if potential_grid is not None and potential_grid.size != conn.size:
        raise DimensionMismatchError("Potential grid and connection sizes differ")

    return Scene(spec, system, conn, fan, config, potential_fn, potential_grid, _build_profile(spec))


# --- validation ----------------------------------------------------------------------------


@dataclass
class SceneReport:
    """Outcome of scene validation."""

    margin: float
    theta_min: float
    sup_omega: float
    min_metric_eigenvalue: float
    probe_rays: int
    probe_max_exit: float

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"quantity": "convexity_margin", "value": self.margin},
            {"quantity": "convexity_theta_min", "value": self.theta_min},
            {"quantity": "sup_omega_norm", "value": self.sup_omega},
            {"quantity": "min_metric_eigenvalue", "value": self.min_metric_eigenvalue},
            {"quantity": "probe_max_exit_time", "value": self.probe_max_exit},
        ]


def validate_scene(scene: Scene, probe_rays: int = PROBE_RAYS, seed: int = 0) -> SceneReport:
    """Convexity sweep, ``sup |omega|_g < 1`` and a nontrapping probe; raises on failure."""
    system = scene.system
    domain = system.domain
    rng = np.random.default_rng(seed)

    points = domain.sample_interior(rng, 1000)
    eigenvalues = np.linalg.eigvalsh(system.metric.value(points))
    min_eig = float(np.min(eigenvalues))
    if not min_eig > 0:
        raise SceneValidationError(f"metric is not positive definite (min eigenvalue {min_eig:.3g})")

    sweep = system.convexity_sweep()
    if not sweep.strictly_convex:
        raise SceneValidationError(
            f"boundary not strictly magnetic convex: Pi(v,v) - g(F(v),nu) = {sweep.minimum:.6g} "
            f"at theta = {sweep.theta_min:.4f}")

    sup_omega = system.sup_omega_norm()
    if sup_omega >= 1.0:
        raise SceneValidationError(f"null lift not monotone: sup ||omega||_g = {sup_omega:.6g} >= 1")

    flow = scene.flow()
    x = domain.sample_interior(rng, probe_rays)
    v = random_unit_vectors(system, x, rng)
    try:
        exits = flow.exit_times(x, v, h=PROBE_STEP_FRACTION * domain.diameter)
    except TrappedRayError as e:
        raise SceneValidationError(f"nontrapping probe failed: {e}", code="trapped-ray") from e

    report = SceneReport(sweep.minimum, sweep.theta_min, sup_omega, min_eig, probe_rays,
                         float(np.max(exits)))
    logger.info("Scene %s valid: margin %.4g, sup|omega| %.4g, longest probe ray %.4g",
                scene.name, report.margin, report.sup_omega, report.probe_max_exit)
    return report


def load_scene(source: Union[str, Path], config: Optional[Dict[str, Any]] = None,
               validate: bool = True) -> Scene:
    scene = build_scene(parse_scene(source), config)
    if validate:
        validate_scene(scene)
    return scene


# --- line scenes for the beam layer --------------------------------------------------------

LINE_SCHEMA = {
    "kind": Param("str", "minkowski", choices=("minkowski", "random")),
    "seed": Param("int", 0, check=lambda v: v >= 0, hint=">= 0"),
    "size": Param("int", 2, check=lambda v: 1 <= v <= 8, hint="between 1 and 8"),
    "start": Param("float", 0.0),
    "end": Param("float", 1.0),
    "steps": Param("int", 0, check=lambda v: v == 0 or v >= 2, hint=">= 2"),
}


def parse_line_scene(source: Union[str, Path], steps: int = 2000) -> BeamLine:
    """``minkowski``, ``random-<seed>`` or an INI file with a single ``[line]`` section."""
    text = str(source)
    if text == "minkowski":
        return minkowski_line(steps)
    named = re.fullmatch(r"random-(\d+)", text)
    if named:
        return random_line(int(named.group(1)), steps=steps)

    path = Path(source)
    try:
        content = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise FileFormatError(f"Line scene '{source}' is neither a built-in nor a readable file: {e}") from e
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__defaults__")
    try:
        parser.read_string(content, source=path.name)
    except configparser.Error as e:
        raise _syntax_error(e) from e
    lines = content.splitlines()
    if parser.sections() != ["line"]:
        raise SceneSyntaxError("line scenes contain exactly one [line] section", 1, 1)
    values = {key: param.default for key, param in LINE_SCHEMA.items()}
    for key, raw in parser.items("line"):
        line, col = _locate(lines, "line", key)
        if key not in LINE_SCHEMA:
            raise SceneSyntaxError(f"unknown key '{key}' in [line]", line, col)
        param = LINE_SCHEMA[key]
        try:
            values[key] = _convert(param, raw)
        except ValueError:
            raise SceneSyntaxError(f"[line] {key}: cannot read {raw.strip()!r} as {param.kind}", line, col)
        if param.choices and values[key] not in param.choices:
            raise SceneValidationError(f"[line] {key} = {values[key]!r} is not one of {', '.join(param.choices)}")
        if param.check is not None and not param.check(values[key]):
            raise SceneValidationError(f"[line] {key} = {values[key]!r} out of range ({param.hint})")
    if not values["end"] > values["start"]:
        raise SceneValidationError("[line] end must exceed start")
    n = values["steps"] or steps
    if values["kind"] == "minkowski":
        line = minkowski_line(n)
        if (values["start"], values["end"]) != (0.0, 1.0):
            line = line.restricted((values["start"], values["end"]), n)
        return line
    return random_line(values["seed"], values["size"], (values["start"], values["end"]), n)
