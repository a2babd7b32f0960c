"""
Binary and text artifacts: RAYF arrays, RSIN sinograms, CSV reports and PGM images.

All binary formats are little-endian. Writers produce byte-identical files for
identical inputs.
"""

import csv
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from .errors import FileFormatError
from .transform import BoundaryFan, Sinogram

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RAYF_MAGIC = b"RAYF"
RSIN_MAGIC = b"RSIN"
_RSIN_HEADER = struct.Struct("<4sIIIdQd")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a short key such as canonical scene text.

    The loop runs per byte in Python; digest bulk data (grid files, arrays) first.
    """
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _complex_pairs(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.complex128)
    return np.stack([values.real, values.imag], axis=-1)


# --- RAYF --------------------------------------------------------------------------------


def write_rayf(path: PathLike, array: np.ndarray) -> Path:
    """Write a real array; complex input gains a trailing (real, imag) axis."""
    array = np.asarray(array)
    if np.iscomplexobj(array):
        array = _complex_pairs(array)
    array = np.ascontiguousarray(array, dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(RAYF_MAGIC)
        f.write(struct.pack("<I", array.ndim))
        f.write(struct.pack(f"<{array.ndim}I", *array.shape))
        f.write(array.tobytes(order="C"))
    logger.debug("Wrote RAYF %s with shape %s", path, array.shape)
    return path


def read_rayf(path: PathLike) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileFormatError(f"Cannot read {path}: {e}") from e
    if len(data) < 8 or data[:4] != RAYF_MAGIC:
        raise FileFormatError(f"{path} is not a RAYF file")
    (ndims,) = struct.unpack_from("<I", data, 4)
    offset = 8 + 4 * ndims
    if len(data) < offset:
        raise FileFormatError(f"{path}: truncated RAYF header")
    shape = struct.unpack_from(f"<{ndims}I", data, 8)
    expected = int(np.prod(shape, dtype=np.int64)) * 8
    if len(data) - offset != expected:
        raise FileFormatError(f"{path}: payload has {len(data) - offset} bytes, header implies {expected}")
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape(shape).astype(float)


def read_rayf_complex(path: PathLike) -> np.ndarray:
    """Read a RAYF array whose last axis holds (real, imag) pairs."""
    array = read_rayf(path)
    if array.ndim == 0 or array.shape[-1] != 2:
        raise FileFormatError(f"{path}: complex RAYF arrays need a trailing axis of length 2")
    return array[..., 0] + 1j * array[..., 1]


# --- RSIN --------------------------------------------------------------------------------


def write_sinogram(path: PathLike, sinogram: Sinogram) -> Path:
    fan = sinogram.fan
    header = _RSIN_HEADER.pack(RSIN_MAGIC, sinogram.size, fan.n_theta, fan.n_alpha,
                               fan.glancing_margin, sinogram.scene_hash, sinogram.step)
    payload = np.ascontiguousarray(_complex_pairs(sinogram.values), dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes(order="C"))
    logger.debug("Wrote sinogram %s (%dx%d, N=%d)", path, fan.n_theta, fan.n_alpha, sinogram.size)
    return path


def read_sinogram(path: PathLike) -> Sinogram:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileFormatError(f"Cannot read {path}: {e}") from e
    if len(data) < _RSIN_HEADER.size:
        raise FileFormatError(f"{path}: truncated RSIN header")
    magic, n, n_theta, n_alpha, margin, scene_hash, step = _RSIN_HEADER.unpack_from(data, 0)
    if magic != RSIN_MAGIC:
        raise FileFormatError(f"{path} is not an RSIN file")
    shape = (n_theta, n_alpha, n, n, 2)
    expected = int(np.prod(shape, dtype=np.int64)) * 8
    if len(data) - _RSIN_HEADER.size != expected:
        raise FileFormatError(f"{path}: payload size does not match the header")
    try:
        fan = BoundaryFan(n_theta, n_alpha, margin)
    except ValueError as e:
        raise FileFormatError(f"{path}: {e}") from e
    pairs = np.frombuffer(data, dtype="<f8", offset=_RSIN_HEADER.size).reshape(shape)
    return Sinogram(fan, pairs[..., 0] + 1j * pairs[..., 1], int(scene_hash), float(step))


# --- CSV ---------------------------------------------------------------------------------


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def write_csv(path: PathLike, rows: Iterable[Mapping[str, Any]], fieldnames: Sequence[str] = ()) -> Path:
    """Write dict rows; column order from ``fieldnames`` or the first row."""
    rows = list(rows)
    names: List[str] = list(fieldnames) or (list(rows[0].keys()) if rows else [])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([_cell(row.get(name, "")) for name in names])
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def sinogram_rows(sinogram: Sinogram) -> List[Dict[str, float]]:
    """One row per fan sample; scalar (N = 1) sinograms only."""
    if sinogram.size != 1:
        raise FileFormatError("CSV export is only available for scalar (N = 1) sinograms")
    fan = sinogram.fan
    rows = []
    for j, theta in enumerate(fan.thetas):
        for k, alpha in enumerate(fan.alphas):
            value = sinogram.values[j, k, 0, 0]
            rows.append({"theta": theta, "alpha": alpha, "re": value.real, "im": value.imag})
    return rows


def defect_rows(report: Mapping[str, float], tolerances: Mapping[str, float] = None) -> List[Dict[str, Any]]:
    rows = []
    for name, value in report.items():
        row: Dict[str, Any] = {"quantity": name, "value": float(value)}
        if tolerances is not None:
            tol = tolerances.get(name)
            row["tolerance"] = "" if tol is None else float(tol)
            row["pass"] = "" if tol is None else bool(value < tol)
        rows.append(row)
    return rows


# --- PGM ---------------------------------------------------------------------------------


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    """Binary 8-bit greyscale of ``|image|`` scaled to its maximum; row 0 at the top."""
    magnitude = np.abs(np.asarray(image))
    if magnitude.ndim != 2:
        raise FileFormatError(f"PGM images must be 2-D, got shape {magnitude.shape}")
    peak = magnitude.max() if magnitude.size else 0.0
    scaled = np.zeros(magnitude.shape) if peak == 0 else magnitude / peak
    pixels = np.round(255.0 * scaled).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    return path


def write_entry_images(prefix: PathLike, values: np.ndarray) -> List[Path]:
    """One PGM per matrix entry of ``values[i1, i2, a, b]``, rows along the second axis."""
    prefix = Path(prefix)
    paths = []
    for a in range(values.shape[2]):
        for b in range(values.shape[3]):
            image = values[:, :, a, b].T[::-1]
            paths.append(write_pgm(prefix.with_name(f"{prefix.name}_{a}{b}.pgm"), image))
    return paths
