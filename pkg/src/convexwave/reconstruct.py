"""Backward calculation: assemble the log field at the bottom wavenumber,
recover the contrast from the governing equation, and score against truth.

With v = -int_k^ktop q dkappa + V evaluated at k = k_low, the contrast is

    beta = -Lap_h v - k_low^2 (grad_h v . grad_h v) - 2 i k_low v_z,

and c = Re beta + 1 where Re beta >= 0 inside Omega, 1 otherwise.  The
sign of the 2ik v_z term follows the governing equation for v; a switch
flips it for sensitivity runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grids import ComplexVolume, DielectricField, DomainSpec, InclusionSpec, MultiKVolume
from .stencils import gradient3_values, k_tail_integral, laplacian_values

__all__ = ["ReconstructionReport", "assemble_v", "recover_c", "evaluate_against_truth"]


@dataclass
class InclusionResult:
    c_max_exact: float
    c_max_computed: float
    rel_error_percent: float
    location: tuple[float, float, float]

    def as_dict(self) -> dict:
        return {
            "c_exact": self.c_max_exact,
            "c_computed": self.c_max_computed,
            "rel_error_percent": self.rel_error_percent,
            "location": list(self.location),
        }


@dataclass
class ReconstructionReport:
    c_comp: float
    location: tuple[float, float, float]
    rel_error_percent: float | None = None
    per_inclusion: list[InclusionResult] = field(default_factory=list)
    history: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.c_comp < 1.0:
            raise ConfigurationError("computed coefficient below vacuum value")

    def as_dict(self) -> dict:
        out = {
            "c_comp": self.c_comp,
            "location": list(self.location),
            "rel_error_percent": self.rel_error_percent,
            "per_inclusion": [r.as_dict() for r in self.per_inclusion],
        }
        if self.history:
            out["history"] = self.history
        return out


def assemble_v(q_min: MultiKVolume, V: ComplexVolume) -> ComplexVolume:
    """v(., k_low) = -int over the whole interval of q plus the tail."""
    if q_min.spec != V.spec:
        raise ConfigurationError("q and V live on different grids")
    tail = k_tail_integral(q_min, 0)
    return ComplexVolume(V.values - tail.values, V.spec)


def recover_c(v: ComplexVolume, k_low: float, flip_vz_sign: bool = False) -> DielectricField:
    """Contrast from the governing equation at the bottom wavenumber.

    Boundary nodes are outside the open box Omega, so c = 1 there by the
    truncation rule.
    """
    spec = v.spec
    lap = laplacian_values(v.values, spec)
    gx, gy, gz = gradient3_values(v.values, spec)
    vz_sign = 1.0 if flip_vz_sign else -1.0
    beta = -lap - (k_low**2) * (gx * gx + gy * gy + gz * gz) + vz_sign * 2.0j * k_low * gz
    inside = np.zeros(spec.shape, dtype=bool)
    inside[1:-1, 1:-1, 1:-1] = True
    c = np.where(inside & (beta.real >= 0.0), beta.real + 1.0, 1.0)
    return DielectricField(c, spec)


def _argmax_location(c: np.ndarray, spec: DomainSpec, where: np.ndarray | None = None):
    vals = c if where is None else np.where(where, c, -np.inf)
    flat = int(np.argmax(vals))  # first-hit tie-break in C order
    j, s, l = np.unravel_index(flat, c.shape)
    loc = (float(spec.x_nodes()[j]), float(spec.y_nodes()[s]), float(spec.z_nodes()[l]))
    return float(c[j, s, l]), loc


def evaluate_against_truth(c_field: DielectricField, truth: list[InclusionSpec]) -> ReconstructionReport:
    """Max-value / location / relative-error metrics, per target.

    With several targets each grid node is attributed to the nearest
    inclusion center, so every target is scored by the peak inside its own
    half-space.
    """
    if not truth:
        raise ConfigurationError("truth inclusion list is empty")
    spec = c_field.spec
    c = c_field.c
    c_comp, loc = _argmax_location(c, spec)
    per = []
    if len(truth) == 1:
        regions = [None]
    else:
        xx, yy, zz = spec.meshgrid()
        d2 = np.stack(
            [(xx - t.center[0]) ** 2 + (yy - t.center[1]) ** 2 + (zz - t.center[2]) ** 2 for t in truth]
        )
        nearest = np.argmin(d2, axis=0)
        regions = [nearest == i for i in range(len(truth))]
    for t, region in zip(truth, regions):
        cmax, tloc = _argmax_location(c, spec, region)
        eps = abs(cmax - t.c_max) / t.c_max * 100.0
        per.append(InclusionResult(t.c_max, cmax, eps, tloc))
    overall = abs(c_comp - truth[0].c_max) / truth[0].c_max * 100.0 if len(truth) == 1 else None
    return ReconstructionReport(
        c_comp=c_comp,
        location=loc,
        rel_error_percent=overall,
        per_inclusion=per,
    )
