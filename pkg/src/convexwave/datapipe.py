"""Measured-data processing: noise, plane-to-plane propagation, depth scan,
and the boundary functions feeding both minimizations.

The scattered part of the backscattered field travels toward -z, so a
plane-wave mode of transverse frequency kappa picks up the phase
exp(-i k_z dz), k_z = sqrt(k^2 - |kappa|^2), when moved by dz in z.
Evanescent modes (|kappa| > k) are zeroed rather than amplified: under
15% noise, amplification is unstable.

The complex logarithm of the incident-normalized field is taken with 1-D
phase unwrapping along the wavenumber axis, anchored at the top
wavenumber with the principal branch.  No spatial unwrapping is
attempted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateDataError
from .grids import DomainSpec, WavenumberGrid
from .stencils import diff1

__all__ = [
    "PlaneField",
    "NoiseSpec",
    "BoundaryDataSet",
    "add_noise",
    "add_noise_stack",
    "propagate",
    "propagate_values",
    "scan_depth",
    "extract_boundary_data",
    "log_and_differentiate",
]


@dataclass(frozen=True)
class PlaneField:
    """Complex field on the (x, y) lattice of a DomainSpec at one plane, one k."""

    values: np.ndarray
    z: float
    k: float
    spec: DomainSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.spec.nx, self.spec.ny):
            raise ConfigurationError(f"plane shape {v.shape} != lattice {(self.spec.nx, self.spec.ny)}")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ConfigurationError("plane field contains non-finite entries")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class NoiseSpec:
    delta: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ConfigurationError("noise level must satisfy 0 <= delta < 1")


def _l2(v: np.ndarray) -> float:
    return float(np.sqrt(np.sum(v.real**2 + v.imag**2)))


def _noisy_values(values: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    fnorm = _l2(values)
    if fnorm == 0.0:
        raise ConfigurationError("relative noise undefined for a zero field")
    sigma = rng.uniform(-1.0, 1.0, values.shape) + 1j * rng.uniform(-1.0, 1.0, values.shape)
    if delta == 0.0:
        return values.copy()
    return values + delta * fnorm * sigma / _l2(sigma)


def add_noise(f: PlaneField, spec: NoiseSpec) -> PlaneField:
    """f + delta ||f|| sigma / ||sigma||, sigma uniform complex noise.

    By construction ||f_noisy - f|| = delta ||f|| exactly (to roundoff).
    """
    rng = np.random.default_rng(spec.seed)
    return PlaneField(_noisy_values(f.values, spec.delta, rng), f.z, f.k, f.spec)


def add_noise_stack(values: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Per-wavenumber noise over a (nx, ny, nk) stack, one seeded stream."""
    rng = np.random.default_rng(spec.seed)
    out = np.empty_like(values)
    for n in range(values.shape[-1]):
        out[..., n] = _noisy_values(values[..., n], spec.delta, rng)
    return out


def propagate_values(values: np.ndarray, k: float, source_z: float, target_z: float, spec: DomainSpec) -> np.ndarray:
    """Angular-spectrum transfer of the scattered part between parallel planes."""
    scattered = values - np.exp(1j * k * source_z)
    spectrum = np.fft.fft2(scattered)
    kap = 2.0 * np.pi * np.fft.fftfreq(spec.nx, d=spec.h)
    k2 = kap[:, None] ** 2 + kap[None, :] ** 2
    prop = k2 <= k * k
    kz = np.sqrt(np.where(prop, k * k - k2, 0.0))
    transfer = np.where(prop, np.exp(-1j * kz * (target_z - source_z)), 0.0)
    shifted = np.fft.ifft2(spectrum * transfer)
    return shifted + np.exp(1j * k * target_z)


def propagate(f: PlaneField, target_z: float) -> PlaneField:
    return PlaneField(propagate_values(f.values, f.k, f.z, target_z, f.spec), target_z, f.k, f.spec)


def scan_depth(f: PlaneField, a_range: tuple[float, float], n_samples: int):
    """Curve M(a) = max |propagated field| and its argmax (first maximal sample)."""
    a_lo, a_hi = a_range
    if n_samples < 1 or not a_lo < a_hi:
        raise ConfigurationError("empty or degenerate scan range")
    if a_lo <= f.spec.meas_z or a_hi > f.spec.back_z:
        raise ConfigurationError("scan range must lie inside (meas_z, d]")
    a_values = np.linspace(a_lo, a_hi, n_samples)
    curve = np.array([np.max(np.abs(propagate(f, a).values)) for a in a_values])
    best = int(np.argmax(curve))
    return a_values, curve, float(a_values[best])


def extract_boundary_data(f_stack: np.ndarray, kgrid: WavenumberGrid, spec: DomainSpec, epsilon: float):
    """Propagate the measured stack to Gamma and one-sided z-difference.

    Returns (g0, g1) stacks of shape (nx, ny, nk): the field on the front
    face and its z-derivative approximated from the epsilon-shifted plane.
    """
    if epsilon <= 0.0:
        raise ConfigurationError("epsilon must be positive")
    zg = spec.z_front
    knodes = kgrid.nodes()
    g0 = np.empty_like(f_stack)
    g1 = np.empty_like(f_stack)
    for n, k in enumerate(knodes):
        g0[..., n] = propagate_values(f_stack[..., n], k, spec.meas_z, zg, spec)
        shifted = propagate_values(f_stack[..., n], k, spec.meas_z, zg - epsilon, spec)
        g1[..., n] = (g0[..., n] - shifted) / epsilon
    return g0, g1


@dataclass(frozen=True)
class BoundaryDataSet:
    """Boundary functions on the Gamma lattice across the wavenumber grid."""

    phi0: np.ndarray   # d/dk of v on Gamma, (nx, ny, nk)
    phi1: np.ndarray   # d/dk of v_z on Gamma, (nx, ny, nk)
    psi0: np.ndarray   # v at the top wavenumber, (nx, ny)
    psi1: np.ndarray   # v_z at the top wavenumber, (nx, ny)
    v: np.ndarray      # intermediate v on Gamma, (nx, ny, nk)
    vz: np.ndarray     # intermediate v_z on Gamma, (nx, ny, nk)
    kgrid: WavenumberGrid


def _unwrapped_log(w: np.ndarray) -> np.ndarray:
    """log w per lattice point, unwrapped along k from the top node down."""
    phase_down = np.unwrap(np.angle(w)[..., ::-1], axis=-1)[..., ::-1]
    return np.log(np.abs(w)) + 1j * phase_down


def log_and_differentiate(g0: np.ndarray, g1: np.ndarray, kgrid: WavenumberGrid, xi: float) -> BoundaryDataSet:
    """Boundary data for q, q_z and the tail from the propagated field."""
    mag = np.abs(g0)
    floor = 1e-12 * mag.max()
    if np.any(mag <= floor):
        j, s, n = np.unravel_index(int(np.argmin(mag)), mag.shape)
        raise DegenerateDataError(
            f"propagated field vanishes at lattice node (j={j}, s={s}, k-index={n}); log undefined"
        )
    k = kgrid.nodes()[None, None, :]
    w = g0 * np.exp(1j * k * xi)
    logw = _unwrapped_log(w)
    v = logw / k**2
    vz = (g1 / g0 - 1j * k) / k**2
    phi0 = diff1(v, axis=2, h=kgrid.hk)
    phi1 = diff1(vz, axis=2, h=kgrid.hk)
    return BoundaryDataSet(
        phi0=phi0, phi1=phi1, psi0=v[..., -1].copy(), psi1=vz[..., -1].copy(), v=v, vz=vz, kgrid=kgrid
    )
