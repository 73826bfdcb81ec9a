"""Forward scattering: volume integral equation solved per wavenumber.

The total field obeys u = e^{ikz} + k^2 (Phi * (c-1) u) with the free-space
kernel Phi(r) = e^{ikr} / (4 pi r).  Because the contrast is compactly
supported, the kernel may be truncated at a radius R at least the support
diameter and periodized on a cube of side >= 2R; the truncated kernel has
a closed-form Fourier transform, so one FFT pair applies the operator.
A restarted GMRES iteration (written here so results do not depend on
BLAS threading) drives the relative residual below the requested
tolerance.

Exterior values, including the measured data on the far plane, come from
direct quadrature of the same integral restricted to the support of the
contrast: exactness matters more than speed on a distant 2-D rectangle.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SolverError
from .grids import ComplexVolume, DielectricField, DomainSpec

__all__ = [
    "ForwardParams",
    "ForwardSolveReport",
    "KernelTable",
    "precompute_kernel",
    "solve_total_field",
    "evaluate_on_plane",
]


@dataclass(frozen=True)
class ForwardParams:
    radius_factor: float = 1.2   # truncation radius = factor * support diameter
    cube_n: int = 64             # periodization grid nodes per axis
    tol: float = 1e-8
    restart: int = 50
    max_matvecs: int = 4000


@dataclass(frozen=True)
class ForwardSolveReport:
    k: float
    residual: float
    iterations: int
    wall_time: float


@dataclass(frozen=True)
class KernelTable:
    """Fourier coefficients of the R-truncated kernel on the periodized cube."""

    k: float
    R: float
    cube_side: float
    cube_n: int
    khat: np.ndarray

    @property
    def spacing(self) -> float:
        return self.cube_side / self.cube_n


def kernel_symbol(k: float, R: float, a: np.ndarray) -> np.ndarray:
    """Closed-form transform of the truncated kernel at frequency magnitude a.

    Removable singularities at a = 0 and a = k are filled with their
    analytic limits.
    """
    a = np.asarray(a, dtype=np.float64)
    out = np.empty(a.shape, dtype=np.complex128)
    eikR = np.exp(1j * k * R)
    near_zero = a < 1e-12 * k
    near_k = np.abs(a - k) <= 1e-6 * k
    regular = ~(near_zero | near_k)
    ar = a[regular]
    out[regular] = (1.0 - eikR * (np.cos(ar * R) - 1j * (k / ar) * np.sin(ar * R))) / (ar * ar - k * k)
    out[near_zero] = (1.0 - eikR * (1.0 - 1j * k * R)) / (-k * k)
    kR = k * R
    out[near_k] = eikR * (kR * np.sin(kR) + 1j * (kR * np.cos(kR) - np.sin(kR))) / (2.0 * k * k)
    return out


def precompute_kernel(k: float, R: float, cube_n: int, cube_side: float | None = None) -> KernelTable:
    if cube_side is None:
        cube_side = 2.0 * R
    if cube_side < 2.0 * R - 1e-12:
        raise ConfigurationError("periodization cube side must be at least 2R")
    if cube_n < 4:
        raise ConfigurationError("cube grid too coarse")
    xi = 2.0 * np.pi * np.fft.fftfreq(cube_n, d=cube_side / cube_n)
    a = np.sqrt(xi[:, None, None] ** 2 + xi[None, :, None] ** 2 + xi[None, None, :] ** 2)
    khat = kernel_symbol(k, R, a)
    if not np.all(np.isfinite(khat.view(np.float64))):
        raise ConfigurationError("kernel coefficients are not finite")
    return KernelTable(k=k, R=R, cube_side=cube_side, cube_n=cube_n, khat=khat)


def _sumsq(v: np.ndarray) -> float:
    return float(np.sum(v.real**2 + v.imag**2))


def _cdot(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.sum(np.conj(a) * b))


def _gmres(matvec, b: np.ndarray, tol: float, restart: int, max_matvecs: int):
    """Restarted GMRES with modified Gram-Schmidt and Givens rotations.

    Operates on flattened complex arrays with numpy-reduction dot products,
    so results are bitwise reproducible across BLAS thread counts.
    """
    n = b.size
    bnorm = np.sqrt(_sumsq(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b)
    matvecs = 0
    while True:
        r = b - matvec(x)
        rnorm = np.sqrt(_sumsq(r))
        if rnorm / bnorm <= tol or matvecs >= max_matvecs:
            return x, matvecs, rnorm / bnorm
        m = min(restart, max_matvecs - matvecs)
        V = np.empty((m + 1, n), dtype=np.complex128)
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m, dtype=np.complex128)
        sn = np.zeros(m, dtype=np.complex128)
        g = np.zeros(m + 1, dtype=np.complex128)
        g[0] = rnorm
        V[0] = r / rnorm
        j_used = 0
        for j in range(m):
            w = matvec(V[j])
            matvecs += 1
            for i in range(j + 1):
                H[i, j] = _cdot(V[i], w)
                w -= H[i, j] * V[i]
            hnext = np.sqrt(_sumsq(w))
            H[j + 1, j] = hnext
            if hnext > 0.0:
                V[j + 1] = w / hnext
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + np.conj(cs[i]) * H[i + 1, j]
                H[i, j] = t
            denom = np.sqrt(abs(H[j, j]) ** 2 + abs(H[j + 1, j]) ** 2)
            if denom == 0.0:
                j_used = j + 1
                break
            cs[j] = np.conj(H[j, j]) / denom
            sn[j] = np.conj(H[j + 1, j]) / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            j_used = j + 1
            if abs(g[j + 1]) / bnorm <= tol or hnext == 0.0:
                break
        y = np.zeros(j_used, dtype=np.complex128)
        for i in range(j_used - 1, -1, -1):
            y[i] = (g[i] - np.sum(H[i, i + 1 : j_used] * y[i + 1 : j_used])) / H[i, i]
        for i in range(j_used):
            x = x + y[i] * V[i]


@dataclass(frozen=True)
class _CubeSolution:
    """Total field on the periodization cube plus everything needed to
    evaluate it anywhere by direct quadrature over the contrast support."""

    k: float
    spacing: float
    origin: np.ndarray        # coordinates of cube node (0, 0, 0)
    src_points: np.ndarray    # (ns, 3) support node coordinates
    src_values: np.ndarray    # (ns,) contrast * field at support nodes
    u_cube: np.ndarray
    report: ForwardSolveReport

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        vals = scattered_from_sources(
            np.asarray(points, dtype=np.float64), self.src_points, self.src_values, self.k, self.spacing**3
        )
        return vals + np.exp(1j * self.k * np.asarray(points)[:, 2])


def scattered_from_sources(points, src_points, src_values, k, cell_volume, chunk=256):
    """k^2 sum over sources of Phi(x - y) (c-1) u(y) * cell volume.

    Sources closer than the equivalent-volume radius of one cell are
    integrated analytically over that ball to tame the kernel singularity.
    """
    out = np.zeros(points.shape[0], dtype=np.complex128)
    if src_points.shape[0] == 0:
        return out
    a_eq = (3.0 * cell_volume / (4.0 * np.pi)) ** (1.0 / 3.0)
    near_value = (np.exp(1j * k * a_eq) * (1.0 - 1j * k * a_eq) - 1.0) / (k * k)
    for start in range(0, points.shape[0], chunk):
        pts = points[start : start + chunk]
        d = np.sqrt(((pts[:, None, :] - src_points[None, :, :]) ** 2).sum(axis=2))
        near = d < a_eq
        d_safe = np.where(near, 1.0, d)
        phi = np.exp(1j * k * d_safe) / (4.0 * np.pi * d_safe) * cell_volume
        phi = np.where(near, near_value, phi)
        # einsum (unoptimized) avoids BLAS so results do not depend on threading
        out[start : start + chunk] = k * k * np.einsum("ij,j->i", phi, src_values)
    return out


def _support_geometry(field: DielectricField, radius_factor: float):
    """Bounding box, center, and truncation radius for the contrast support."""
    if field.inclusions:
        lo = np.min([np.asarray(i.center) - i.radius for i in field.inclusions], axis=0)
        hi = np.max([np.asarray(i.center) + i.radius for i in field.inclusions], axis=0)
    else:
        mask = field.c > 1.0
        if not mask.any():
            return None
        idx = np.argwhere(mask)
        spec = field.spec
        axes = (spec.x_nodes(), spec.y_nodes(), spec.z_nodes())
        lo = np.array([axes[a][idx[:, a].min()] for a in range(3)]) - spec.h
        hi = np.array([axes[a][idx[:, a].max()] for a in range(3)]) + spec.h
    diameter = float(np.sqrt(((hi - lo) ** 2).sum()))
    if diameter == 0.0:
        return None
    center = 0.5 * (lo + hi)
    return center, radius_factor * diameter


def solve_scatterer(field: DielectricField, k: float, params: ForwardParams) -> _CubeSolution | None:
    """Solve the integral equation on the periodization cube.

    Returns None for zero contrast (the total field is the incident wave).
    """
    geom = _support_geometry(field, params.radius_factor)
    if geom is None:
        return None
    center, R = geom
    table = precompute_kernel(k, R, params.cube_n)
    n = params.cube_n
    hc = table.spacing
    axes = [center[a] - R + hc * np.arange(n) for a in range(3)]
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    m = (field.evaluate(pts) - 1.0).reshape(n, n, n)
    b = np.exp(1j * k * zz)

    def matvec(flat):
        u = flat.reshape(n, n, n)
        conv = np.fft.ifftn(table.khat * np.fft.fftn(m * u))
        return (u - k * k * conv).ravel()

    t0 = time.perf_counter()
    u_flat, iters, relres = _gmres(matvec, b.ravel(), params.tol, params.restart, params.max_matvecs)
    # One extra operator application re-asserts the residual contract.
    relres = np.sqrt(_sumsq(b.ravel() - matvec(u_flat))) / np.sqrt(_sumsq(b.ravel()))
    report = ForwardSolveReport(k=k, residual=float(relres), iterations=iters, wall_time=time.perf_counter() - t0)
    if relres > params.tol:
        raise SolverError(f"forward solve did not converge at k={k:g}: relres={relres:.3e}", report)
    u_cube = u_flat.reshape(n, n, n)
    supp = np.abs(m.ravel()) > 0.0
    return _CubeSolution(
        k=k,
        spacing=hc,
        origin=center - R,
        src_points=pts[supp],
        src_values=(m.ravel() * u_flat)[supp],
        u_cube=u_cube,
        report=report,
    )


def solve_total_field(
    c: DielectricField, k: float, tol: float = 1e-8, params: ForwardParams | None = None, return_report: bool = False
):
    """Total field on the grid of ``c`` with relative residual <= tol."""
    if tol <= 0.0:
        raise ConfigurationError("tolerance must be positive")
    params = params or ForwardParams()
    if params.tol != tol:
        params = ForwardParams(params.radius_factor, params.cube_n, tol, params.restart, params.max_matvecs)
    spec = c.spec
    sol = solve_scatterer(c, k, params)
    if sol is None:
        zz = spec.meshgrid()[2]
        u = ComplexVolume(np.exp(1j * k * zz), spec)
        report = ForwardSolveReport(k=k, residual=0.0, iterations=0, wall_time=0.0)
        return (u, report) if return_report else u
    xx, yy, zz = spec.meshgrid()
    pts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    u = ComplexVolume(sol.evaluate(pts).reshape(spec.shape), spec)
    return (u, sol.report) if return_report else u


def plane_lattice(spec: DomainSpec, plane_z: float, rect=None, n_pts=None):
    """Sample points of the measurement rectangle (defaults to the Omega lattice)."""
    if rect is None:
        rect = (-spec.half_width, spec.half_width)
    if n_pts is None:
        n_pts = (spec.nx, spec.ny)
    x = np.linspace(rect[0], rect[1], n_pts[0])
    y = np.linspace(rect[0], rect[1], n_pts[1])
    xx, yy = np.meshgrid(x, y, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel(), np.full(xx.size, plane_z)], axis=1)
    return pts, (n_pts[0], n_pts[1])


def evaluate_on_plane(
    u: ComplexVolume, c: DielectricField, k: float, plane_z: float, rect=None, n_pts=None
) -> np.ndarray:
    """Measured data on a plane by direct summation over nodes where c > 1."""
    spec = u.spec
    if c.spec != spec:
        raise ConfigurationError("field and dielectric live on different grids")
    mask = c.c > 1.0
    if mask.any():
        zmin = spec.z_nodes()[np.where(mask.any(axis=(0, 1)))[0]].min()
        zmax = spec.z_nodes()[np.where(mask.any(axis=(0, 1)))[0]].max()
        if zmin <= plane_z <= zmax:
            raise ConfigurationError("evaluation plane intersects the contrast support")
    pts, shape = plane_lattice(spec, plane_z, rect, n_pts)
    xx, yy, zz = spec.meshgrid()
    src_points = np.stack([xx[mask], yy[mask], zz[mask]], axis=1)
    src_values = (c.c[mask] - 1.0) * u.values[mask]
    f = scattered_from_sources(pts, src_points, src_values, k, spec.cell_volume)
    return (f + np.exp(1j * k * plane_z)).reshape(shape)
