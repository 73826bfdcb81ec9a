"""On-disk field containers and visualization exports.

A container is a directory with ``manifest.json`` plus ``data.bin``:
little-endian complex128 (interleaved float64 real/imag pairs), flat
index with x fastest, then y, z and finally the wavenumber axis.  In
memory, fields keep the (x, y, z[, k]) axis order, so writing transposes
to the reversed axis order before the raw dump; round trips are bitwise
exact.

Exports: legacy VTK structured points (ASCII header, big-endian binary
payload; real part, imaginary part and magnitude as three scalar arrays)
and CSV slices at full float precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

__all__ = ["Container", "write_container", "read_container", "export_vtk", "export_csv_slice"]

_DTYPE = np.dtype("<c16")


@dataclass(frozen=True)
class Container:
    values: np.ndarray
    manifest: dict
    path: Path

    @property
    def name(self) -> str:
        return self.manifest["name"]

    @property
    def config_hash(self) -> str:
        return self.manifest["config_hash"]


def write_container(
    path: str | Path,
    name: str,
    values: np.ndarray,
    axes: list[str],
    config_hash: str,
    meta: dict | None = None,
) -> Path:
    path = Path(path)
    values = np.asarray(values, dtype=np.complex128)
    if values.ndim != len(axes):
        raise ConfigurationError("axes labels must match array rank")
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": name,
        "shape": list(values.shape),
        "axes": list(axes),
        "dtype": "complex128",
        "byte_order": "little",
        "layout": "x-fastest",
        "config_hash": config_hash,
        "meta": meta or {},
    }
    flat = np.ascontiguousarray(values.transpose(tuple(reversed(range(values.ndim))))).astype(_DTYPE, copy=False)
    (path / "data.bin").write_bytes(flat.tobytes())
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def read_container(path: str | Path) -> Container:
    path = Path(path)
    manifest_file = path / "manifest.json"
    if not manifest_file.exists():
        raise ConfigurationError(f"no container manifest at {path}")
    manifest = json.loads(manifest_file.read_text())
    shape = tuple(manifest["shape"])
    payload = (path / "data.bin").read_bytes()
    expected = int(np.prod(shape)) * _DTYPE.itemsize
    if len(payload) != expected:
        raise ConfigurationError(f"payload size {len(payload)} != manifest shape ({expected} bytes)")
    flat = np.frombuffer(payload, dtype=_DTYPE).reshape(tuple(reversed(shape)))
    values = np.ascontiguousarray(flat.transpose(tuple(reversed(range(len(shape)))))).astype(np.complex128)
    return Container(values=values, manifest=manifest, path=path)


def _volume_geometry(manifest: dict):
    meta = manifest.get("meta", {})
    origin = meta.get("origin", [0.0, 0.0, 0.0])
    spacing = meta.get("spacing", [1.0, 1.0, 1.0])
    return origin, spacing


def export_vtk(container: Container, out_file: str | Path) -> Path:
    """Legacy VTK structured-points file with re/im/abs scalar arrays.

    Axis order in the payload is the VTK convention: x varies fastest.
    """
    values = container.values
    if values.ndim == 4:
        values = values[..., -1]  # default to the top-wavenumber slice
    if values.ndim != 3:
        raise ConfigurationError("VTK export needs a volume container")
    nx, ny, nz = values.shape
    origin, spacing = _volume_geometry(container.manifest)
    name = container.name
    out_file = Path(out_file)
    arrays = [
        (f"re_{name}", values.real),
        (f"im_{name}", values.imag),
        (f"abs_{name}", np.abs(values)),
    ]
    with open(out_file, "wb") as fh:
        fh.write(b"# vtk DataFile Version 3.0\n")
        fh.write(f"{name} (x fastest, then y, then z)\n".encode())
        fh.write(b"BINARY\n")
        fh.write(b"DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n".encode())
        fh.write(f"ORIGIN {origin[0]:.17g} {origin[1]:.17g} {origin[2]:.17g}\n".encode())
        fh.write(f"SPACING {spacing[0]:.17g} {spacing[1]:.17g} {spacing[2]:.17g}\n".encode())
        fh.write(f"POINT_DATA {nx * ny * nz}\n".encode())
        for label, arr in arrays:
            fh.write(f"SCALARS {label} double 1\n".encode())
            fh.write(b"LOOKUP_TABLE default\n")
            fh.write(np.ascontiguousarray(arr.transpose(2, 1, 0)).astype(">f8").tobytes())
            fh.write(b"\n")
    return out_file


def export_csv_slice(container: Container, slice_spec: str, out_file: str | Path) -> Path:
    """CSV of one z-slice (volumes) or one k-slice (plane stacks).

    ``slice_spec`` is "axis=value", e.g. "z=0.0"; the nearest grid layer is
    taken.  Values are written at full precision so a read-back matches
    the in-memory data exactly.
    """
    try:
        axis_name, value = slice_spec.split("=")
        value = float(value)
    except ValueError as exc:
        raise ConfigurationError(f"bad slice spec {slice_spec!r}; expected e.g. 'z=0.0'") from exc
    manifest = container.manifest
    axes = manifest["axes"]
    meta = manifest.get("meta", {})
    if axis_name not in axes:
        raise ConfigurationError(f"container has no axis {axis_name!r} (axes: {axes})")
    axis = axes.index(axis_name)
    coords = meta.get("axis_coords", {}).get(axis_name)
    if coords is None:
        raise ConfigurationError(f"container metadata lacks coordinates for axis {axis_name!r}")
    idx = int(np.argmin(np.abs(np.asarray(coords) - value)))
    sl = [slice(None)] * container.values.ndim
    sl[axis] = idx
    plane = container.values[tuple(sl)]
    if plane.ndim != 2:
        raise ConfigurationError("slice is not 2-D; pick a different axis")
    rem_axes = [a for i, a in enumerate(axes) if i != axis]
    coord0 = meta.get("axis_coords", {}).get(rem_axes[0], list(range(plane.shape[0])))
    coord1 = meta.get("axis_coords", {}).get(rem_axes[1], list(range(plane.shape[1])))
    out_file = Path(out_file)
    with open(out_file, "w") as fh:
        fh.write(f"{rem_axes[0]},{rem_axes[1]},re,im,abs\n")
        for i in range(plane.shape[0]):
            for j in range(plane.shape[1]):
                v = plane[i, j]
                fh.write(
                    f"{coord0[i]:.17g},{coord1[j]:.17g},{v.real:.17g},{v.imag:.17g},{abs(v):.17g}\n"
                )
    return out_file
