"""Shared finite-difference operators, Carleman weight and k-integration.

All operators act on raw complex arrays with axes (x, y, z[, k]) and are
plain functions: the minimizers need their exact transposes, so every
forward operator has a matching ``*_t`` adjoint.  Adjointness is with
respect to the unweighted complex dot product sum(conj(a) * b); the
operators have real coefficients, so the same arrays serve the real inner
product used by the descent code.

First derivatives are central in the interior and second-order one-sided
at the faces.  The Laplacian is the standard 7-point stencil, defined at
interior nodes only; face values of its output are zero and must never
enter functional sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grids import ComplexVolume, DomainSpec, MultiKVolume

__all__ = [
    "diff1",
    "diff1_t",
    "diff2_masked",
    "diff2_masked_t",
    "laplacian",
    "gradient3",
    "k_tail_integral",
    "k_tail_suffix",
    "k_tail_suffix_t",
    "CarlemanWeight",
    "weight_table",
]


def _sl(a: np.ndarray, axis: int, s: slice):
    idx = [slice(None)] * a.ndim
    idx[axis] = s
    return a[tuple(idx)]


def diff1(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """First derivative along ``axis``: central interior, one-sided second-order ends."""
    g = np.empty_like(f)
    mid = _sl(g, axis, slice(1, -1))
    mid[...] = (_sl(f, axis, slice(2, None)) - _sl(f, axis, slice(None, -2))) / (2.0 * h)
    _sl(g, axis, slice(0, 1))[...] = (
        -3.0 * _sl(f, axis, slice(0, 1)) + 4.0 * _sl(f, axis, slice(1, 2)) - _sl(f, axis, slice(2, 3))
    ) / (2.0 * h)
    _sl(g, axis, slice(-1, None))[...] = (
        3.0 * _sl(f, axis, slice(-1, None)) - 4.0 * _sl(f, axis, slice(-2, -1)) + _sl(f, axis, slice(-3, -2))
    ) / (2.0 * h)
    return g


def diff1_t(r: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Exact transpose of :func:`diff1` (scatter form of the same stencil)."""
    g = np.zeros_like(r)
    inner = _sl(r, axis, slice(1, -1))
    _sl(g, axis, slice(2, None))[...] += inner / (2.0 * h)
    _sl(g, axis, slice(None, -2))[...] -= inner / (2.0 * h)
    first = _sl(r, axis, slice(0, 1))
    _sl(g, axis, slice(0, 1))[...] += -3.0 * first / (2.0 * h)
    _sl(g, axis, slice(1, 2))[...] += 4.0 * first / (2.0 * h)
    _sl(g, axis, slice(2, 3))[...] += -first / (2.0 * h)
    last = _sl(r, axis, slice(-1, None))
    _sl(g, axis, slice(-1, None))[...] += 3.0 * last / (2.0 * h)
    _sl(g, axis, slice(-2, -1))[...] += -4.0 * last / (2.0 * h)
    _sl(g, axis, slice(-3, -2))[...] += last / (2.0 * h)
    return g


def diff2_masked(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second derivative along ``axis`` at axis-interior nodes, zero at the two faces."""
    g = np.zeros_like(f)
    mid = _sl(g, axis, slice(1, -1))
    mid[...] = (
        _sl(f, axis, slice(2, None)) - 2.0 * _sl(f, axis, slice(1, -1)) + _sl(f, axis, slice(None, -2))
    ) / (h * h)
    return g


def diff2_masked_t(r: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Transpose of :func:`diff2_masked`; reads only axis-interior entries of ``r``."""
    g = np.zeros_like(r)
    inner = _sl(r, axis, slice(1, -1))
    _sl(g, axis, slice(1, -1))[...] += -2.0 * inner / (h * h)
    _sl(g, axis, slice(2, None))[...] += inner / (h * h)
    _sl(g, axis, slice(None, -2))[...] += inner / (h * h)
    return g


def _steps(spec: DomainSpec) -> tuple[float, float, float]:
    return spec.h, spec.h, spec.hz


def laplacian_values(v: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """7-point Laplacian on raw values; nonzero only at 3-D interior nodes."""
    out = np.zeros_like(v)
    for axis, h in enumerate(_steps(spec)):
        out += diff2_masked(v, axis, h)
    interior = np.zeros(spec.shape, dtype=bool)
    interior[1:-1, 1:-1, 1:-1] = True
    if v.ndim == 4:
        interior = interior[..., None]
    return np.where(interior, out, 0.0)


def laplacian_values_t(r: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Transpose of :func:`laplacian_values` for interior-supported residuals."""
    r = mask_interior(r, spec)
    out = np.zeros_like(r)
    for axis, h in enumerate(_steps(spec)):
        out += diff2_masked_t(r, axis, h)
    return out


def mask_interior(v: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Zero out the six face layers (k-axis, if present, is untouched)."""
    out = np.zeros_like(v)
    out[1:-1, 1:-1, 1:-1] = v[1:-1, 1:-1, 1:-1]
    return out


def laplacian(f: ComplexVolume) -> ComplexVolume:
    return ComplexVolume(laplacian_values(f.values, f.spec), f.spec)


def gradient3_values(v: np.ndarray, spec: DomainSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hx, hy, hz = _steps(spec)
    return diff1(v, 0, hx), diff1(v, 1, hy), diff1(v, 2, hz)


def gradient3(f: ComplexVolume) -> tuple[ComplexVolume, ComplexVolume, ComplexVolume]:
    gx, gy, gz = gradient3_values(f.values, f.spec)
    return (ComplexVolume(gx, f.spec), ComplexVolume(gy, f.spec), ComplexVolume(gz, f.spec))


def k_tail_suffix(q: np.ndarray, hk: float) -> np.ndarray:
    """Trapezoidal tail integrals int_{k_n}^{k_top} q dkappa for every n.

    ``q`` has the wavenumber on the last axis; the result has the same shape,
    with slice n holding the integral from node n to the top node (zero at
    the top node itself).
    """
    out = np.empty_like(q)
    panels = 0.5 * hk * (q[..., 1:] + q[..., :-1])
    np.cumsum(panels, axis=-1, out=panels)
    total = panels[..., -1:]
    out[..., 0:1] = total
    out[..., 1:-1] = total - panels[..., :-1]
    out[..., -1] = 0.0
    return out


def k_tail_suffix_t(s: np.ndarray, hk: float) -> np.ndarray:
    """Transpose of :func:`k_tail_suffix` over the trailing k-axis."""
    out = np.zeros_like(s)
    csum = s[..., :-1].cumsum(axis=-1)
    out[..., 0] = 0.5 * hk * s[..., 0]
    out[..., 1:-1] = hk * (csum[..., :-1] + 0.5 * s[..., 1:-1])
    out[..., -1] = 0.5 * hk * csum[..., -1]
    return out


def k_tail_integral(q: MultiKVolume, from_index: int) -> ComplexVolume:
    """int_{k_n}^{k_top} q(., kappa) dkappa by the trapezoidal rule."""
    nk = q.kgrid.nk
    if not 0 <= from_index < nk:
        raise ConfigurationError("from_index out of range")
    tail = k_tail_suffix(q.values, q.kgrid.hk)[..., from_index]
    return ComplexVolume(tail, q.spec)


@dataclass(frozen=True)
class CarlemanWeight:
    """Normalized exponential weight exp(-2 lambda (z + xi)) per z-layer.

    Equals the balanced weight of the cost functionals up to a constant
    positive factor, so minimizers are unchanged while intermediate
    magnitudes stay at or below 1.
    """

    lam: float
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "table", np.asarray(self.table, dtype=np.float64))


def weight_table(lam: float, spec: DomainSpec) -> CarlemanWeight:
    if lam <= 0.0:
        raise ConfigurationError("Carleman weight exponent must be positive")
    z = spec.z_nodes()
    return CarlemanWeight(lam, np.exp(-2.0 * lam * (z + spec.front_xi)))
