"""Geometry, grids, complex fields and synthetic dielectric phantoms.

The computational box is Omega = (-b,b) x (-b,b) x (-xi,d) with the
backscattering face Gamma at z = -xi.  All quantities are dimensionless
(lengths in units of 10 cm, wavenumbers matching).  Grids are vertex
centred: both z-faces are literal node layers so boundary data can be
imposed on them directly.

Array convention: volume fields are numpy arrays of shape (nx, ny, nz)
indexed [j, s, l] for (x_j, y_s, z_l); multi-wavenumber fields append a
trailing k-axis, shape (nx, ny, nz, nk).  The on-disk flat layout
(x fastest, then y, z, k) is handled by the container module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "DomainSpec",
    "WavenumberGrid",
    "GridHandles",
    "ComplexVolume",
    "MultiKVolume",
    "InclusionSpec",
    "DielectricField",
    "build_grid",
    "build_dielectric",
    "discrete_norms",
]


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of Omega, Gamma and the measurement plane, plus grid counts."""

    half_width: float = 3.0     # b: |x|,|y| < b
    front_xi: float = 0.5       # Gamma is the plane z = -xi
    back_z: float = 4.5         # d: far face of Omega
    meas_z: float = -8.0        # measurement plane z-coordinate
    nx: int = 51
    ny: int = 51
    nz: int = 51

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 3:
            raise ConfigurationError("grid needs at least 3 nodes per axis")
        if self.nx != self.ny:
            raise ConfigurationError("nx and ny must match (h_x = h_y contract)")
        if not (self.meas_z < -self.front_xi < self.back_z):
            raise ConfigurationError(
                "need meas_z < -xi < d, got meas_z=%g, -xi=%g, d=%g"
                % (self.meas_z, -self.front_xi, self.back_z)
            )
        if self.half_width <= 0 or self.back_z + self.front_xi <= 0:
            raise ConfigurationError("degenerate domain extents")

    @property
    def z_front(self) -> float:
        return -self.front_xi

    @property
    def h(self) -> float:
        """Transverse grid step (h_x = h_y)."""
        return 2.0 * self.half_width / (self.nx - 1)

    @property
    def hz(self) -> float:
        return (self.back_z + self.front_xi) / (self.nz - 1)

    @property
    def cell_volume(self) -> float:
        return self.h * self.h * self.hz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def x_nodes(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.nx)

    def y_nodes(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.ny)

    def z_nodes(self) -> np.ndarray:
        return -self.front_xi + self.hz * np.arange(self.nz)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_nodes(), self.y_nodes(), self.z_nodes(), indexing="ij")


@dataclass(frozen=True)
class WavenumberGrid:
    """Uniform grid on the working wavenumber interval."""

    k_min: float = 15.2
    k_max: float = 16.2
    nk: int = 11

    def __post_init__(self):
        if not (0.0 < self.k_min < self.k_max):
            raise ConfigurationError("need 0 < k_min < k_max")
        if self.nk < 2:
            raise ConfigurationError("need at least two wavenumber nodes")

    @property
    def hk(self) -> float:
        return (self.k_max - self.k_min) / (self.nk - 1)

    def nodes(self) -> np.ndarray:
        return self.k_min + self.hk * np.arange(self.nk)


@dataclass(frozen=True)
class GridHandles:
    """Node coordinates of the space-wavenumber product grid."""

    spec: DomainSpec
    kgrid: WavenumberGrid
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: np.ndarray


def build_grid(spec: DomainSpec, kgrid: WavenumberGrid) -> GridHandles:
    """Materialize node coordinates x_j = -b + j*h etc. for a validated spec."""
    return GridHandles(spec, kgrid, spec.x_nodes(), spec.y_nodes(), spec.z_nodes(), kgrid.nodes())


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ComplexVolume:
    """A complex scalar field sampled on the (x,y,z) grid of a DomainSpec."""

    values: np.ndarray
    spec: DomainSpec

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != self.spec.shape:
            raise ConfigurationError(f"field shape {v.shape} != grid {self.spec.shape}")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ConfigurationError("field contains non-finite entries")
        object.__setattr__(self, "values", _freeze(v))


@dataclass(frozen=True)
class MultiKVolume:
    """A complex field with a trailing wavenumber axis, shape (nx,ny,nz,nk)."""

    values: np.ndarray
    spec: DomainSpec
    kgrid: WavenumberGrid

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        want = self.spec.shape + (self.kgrid.nk,)
        if v.shape != want:
            raise ConfigurationError(f"field shape {v.shape} != grid {want}")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ConfigurationError("field contains non-finite entries")
        object.__setattr__(self, "values", _freeze(v))


@dataclass(frozen=True)
class InclusionSpec:
    """A ball-shaped dielectric inclusion with a smoothed profile."""

    center: tuple[float, float, float]
    radius: float
    c_max: float

    def validate(self, spec: DomainSpec) -> None:
        if self.c_max < 1.0:
            raise ConfigurationError("inclusion c_max must be >= 1")
        if self.radius <= 0.0:
            raise ConfigurationError("inclusion radius must be positive")
        cx, cy, cz = self.center
        b = spec.half_width
        # Tangency to the boundary is allowed: the bump vanishes at the
        # ball surface, so c = 1 on the boundary still holds exactly.
        inside = (
            abs(cx) + self.radius <= b
            and abs(cy) + self.radius <= b
            and spec.z_front <= cz - self.radius
            and cz + self.radius <= spec.back_z
        )
        if not inside:
            raise ConfigurationError(f"inclusion ball {self} not contained in Omega")


@dataclass(frozen=True)
class DielectricField:
    """Dielectric constant c(x) >= 1 on the grid, c = 1 on and outside the boundary.

    ``inclusions`` keeps the analytic description when the field was built
    from ball phantoms, so solvers may resample c on their own grids.
    """

    c: np.ndarray
    spec: DomainSpec
    inclusions: tuple[InclusionSpec, ...] = field(default=())

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        if c.shape != self.spec.shape:
            raise ConfigurationError(f"c shape {c.shape} != grid {self.spec.shape}")
        if not np.all(np.isfinite(c)):
            raise ConfigurationError("c contains non-finite entries")
        if np.any(c < 1.0):
            raise ConfigurationError("dielectric constant must satisfy c >= 1")
        for face in (c[0], c[-1], c[:, 0], c[:, -1], c[:, :, 0], c[:, :, -1]):
            if np.any(face != 1.0):
                raise ConfigurationError("c must equal 1 on the boundary of Omega")
        object.__setattr__(self, "c", _freeze(c))
        object.__setattr__(self, "inclusions", tuple(self.inclusions))

    @property
    def beta(self) -> np.ndarray:
        return self.c - 1.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate c at arbitrary points, shape (m, 3).

        Uses the analytic bump profile when inclusions are known; plain grid
        sampling is not exposed because solvers only need the analytic form.
        """
        if not self.inclusions:
            raise ConfigurationError("no analytic description available for resampling")
        return evaluate_inclusions(self.inclusions, np.asarray(points, dtype=np.float64))


def evaluate_inclusions(inclusions, points: np.ndarray) -> np.ndarray:
    """Raised-cosine bump profile: c = 1 + (c_max-1) cos^2(pi rho / (2 r)) inside each ball."""
    pts = np.atleast_2d(points)
    c = np.ones(pts.shape[0])
    for inc in inclusions:
        rho = np.sqrt(((pts - np.asarray(inc.center)) ** 2).sum(axis=1))
        mask = rho < inc.radius
        if np.any(mask):
            c[mask] += (inc.c_max - 1.0) * np.cos(np.pi * rho[mask] / (2.0 * inc.radius)) ** 2
    return c


def build_dielectric(inclusions, spec: DomainSpec) -> DielectricField:
    """Sample the smoothed phantom on the grid.

    Overlapping balls are rejected: the profile of overlapping inclusions is
    undefined, so they are treated as invalid input.
    """
    incs = tuple(inclusions)
    for inc in incs:
        inc.validate(spec)
    for i in range(len(incs)):
        for j in range(i + 1, len(incs)):
            ci = np.asarray(incs[i].center)
            cj = np.asarray(incs[j].center)
            if math.sqrt(float(((ci - cj) ** 2).sum())) < incs[i].radius + incs[j].radius:
                raise ConfigurationError(f"inclusions {i} and {j} overlap")
    xx, yy, zz = spec.meshgrid()
    pts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    c = evaluate_inclusions(incs, pts).reshape(spec.shape)
    # Balls are strictly interior, so boundary layers are exactly 1 already.
    return DielectricField(c, spec, incs)


def _axis_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def quadrature_weights(spec: DomainSpec) -> np.ndarray:
    """Tensor-product trapezoidal weights over Omega, shape (nx,ny,nz)."""
    wx = _axis_weights(spec.nx, spec.h)
    wy = _axis_weights(spec.ny, spec.h)
    wz = _axis_weights(spec.nz, spec.hz)
    return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]


def discrete_norms(f: ComplexVolume | MultiKVolume, order: int = 0) -> float:
    """Discrete Sobolev-type norm of a field.

    order 0: trapezoidal L2 norm over Omega (times the k-interval for
    multi-wavenumber fields).  order 1 adds first finite-difference
    derivatives in x, y, z; order 2 additionally adds the second
    z-derivative, mirroring the z-weighted norms used by the functionals.
    """
    if order not in (0, 1, 2):
        raise ConfigurationError("order must be 0, 1 or 2")
    from . import stencils  # local import: stencils depends on nothing here

    spec = f.spec
    v = f.values
    w = quadrature_weights(spec)
    if isinstance(f, MultiKVolume):
        wk = _axis_weights(f.kgrid.nk, f.kgrid.hk)
        w = w[..., None] * wk
    total = np.sum(w * np.abs(v) ** 2)
    if order >= 1:
        for axis, h in ((0, spec.h), (1, spec.h), (2, spec.hz)):
            total += np.sum(w * np.abs(stencils.diff1(v, axis, h)) ** 2)
    if order == 2:
        total += np.sum(w * np.abs(stencils.diff1(stencils.diff1(v, 2, spec.hz), 2, spec.hz)) ** 2)
    return float(np.sqrt(total))
