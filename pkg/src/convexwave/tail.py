"""Tail-field recovery: weighted least-squares Laplace solve with
over-determined data on the front face.

The tail V is the log-field at the top wavenumber.  It satisfies a
Laplace equation to leading order, with both Dirichlet and Neumann data
known on Gamma and zero Dirichlet data on the rest of the boundary.  The
over-determination is absorbed by fixing the first two z-layers (the
second layer encodes the Neumann condition to first order) and the five
remaining faces, then minimizing

    I(V) = sum_interior |Lap_h V|^2 w(z) vol + alpha * sum |V|^2 vol

over the free nodes with the shared CG protocol.  w is the normalized
Carleman weight; a plain L2 term replaces the Sobolev regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descent import CGParams, MinimizeTrace, minimize_cg
from .errors import ConfigurationError
from .grids import ComplexVolume, DomainSpec
from .stencils import laplacian_values, laplacian_values_t, weight_table

__all__ = ["TailProblem", "TailLayout", "assemble_tail_unknowns", "tail_functional", "tail_gradient", "minimize_tail"]


@dataclass(frozen=True)
class TailProblem:
    psi0: np.ndarray          # Dirichlet data on Gamma, shape (nx, ny)
    psi1: np.ndarray          # Neumann (d/dz) data on Gamma, shape (nx, ny)
    mu: float                 # Carleman weight exponent
    alpha: float              # L2 regularization weight
    spec: DomainSpec

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ConfigurationError("mu must be positive")
        if self.alpha < 0.0:
            raise ConfigurationError("alpha must be nonnegative")
        plane = (self.spec.nx, self.spec.ny)
        if np.shape(self.psi0) != plane or np.shape(self.psi1) != plane:
            raise ConfigurationError("psi arrays must live on the Gamma lattice")


@dataclass(frozen=True)
class TailLayout:
    """Constraint layout: fixed node values plus the free-node mask."""

    fixed: np.ndarray         # full volume with constrained values, zero elsewhere
    free_mask: np.ndarray     # bool, True where the node is an unknown

    @property
    def n_constrained(self) -> int:
        return int((~self.free_mask).sum())


def _boundary_layout(spec: DomainSpec, layer0: np.ndarray, layer1: np.ndarray) -> TailLayout:
    """Fix z-layers 0 and 1 from face data, zero on the other five faces.

    At edges where the first two layers meet the lateral faces the
    homogeneous Dirichlet condition wins.
    """
    fixed = np.zeros(spec.shape, dtype=np.complex128)
    free = np.ones(spec.shape, dtype=bool)
    fixed[:, :, 0] = layer0
    fixed[:, :, 1] = layer1
    free[:, :, 0] = free[:, :, 1] = False
    free[:, :, -1] = False
    for face in (fixed[0], fixed[-1], fixed[:, 0], fixed[:, -1]):
        face[...] = 0.0
    free[0] = free[-1] = False
    free[:, 0] = free[:, -1] = False
    return TailLayout(fixed, free)


def assemble_tail_unknowns(problem: TailProblem) -> TailLayout:
    psi0 = np.asarray(problem.psi0, dtype=np.complex128)
    psi1 = np.asarray(problem.psi1, dtype=np.complex128)
    return _boundary_layout(problem.spec, psi0, psi0 + problem.spec.hz * psi1)


def _masked_weight(problem: TailProblem) -> np.ndarray:
    """Carleman weight on the z-axis, zeroed outside the 3-D interior."""
    spec = problem.spec
    w = np.zeros(spec.shape)
    w[1:-1, 1:-1, 1:-1] = weight_table(problem.mu, spec).table[None, None, 1:-1]
    return w


def make_tail_evaluators(problem: TailProblem, layout: TailLayout):
    """Evaluate/gradient closures sharing the cached weight and Laplacian."""
    spec = problem.spec
    w = _masked_weight(problem)
    vol = spec.cell_volume
    alpha = problem.alpha
    free = layout.free_mask

    def evaluate(v: np.ndarray):
        lap = laplacian_values(v, spec)
        val = float(vol * (np.sum(w * (lap.real**2 + lap.imag**2))
                           + alpha * np.sum(v.real**2 + v.imag**2)))
        return val, lap

    def gradient(v: np.ndarray, lap=None) -> np.ndarray:
        if lap is None:
            lap = laplacian_values(v, spec)
        g = 2.0 * vol * (laplacian_values_t(w * lap, spec) + alpha * v)
        return np.where(free, g, 0.0)

    return evaluate, gradient


def tail_functional(problem: TailProblem, v: np.ndarray) -> float:
    evaluate, _ = make_tail_evaluators(problem, assemble_tail_unknowns(problem))
    return evaluate(v)[0]


def tail_gradient(problem: TailProblem, v: np.ndarray, layout: TailLayout | None = None) -> np.ndarray:
    """Exact derivative of the finite sum with respect to the free node values."""
    layout = layout or assemble_tail_unknowns(problem)
    _, grad = make_tail_evaluators(problem, layout)
    return grad(v)


def minimize_tail(problem: TailProblem, cg_params: CGParams | None = None) -> tuple[ComplexVolume, MinimizeTrace]:
    """CG descent from zero free values; constrained layers stay untouched."""
    cg_params = cg_params or CGParams()
    layout = assemble_tail_unknowns(problem)
    evaluate, gradient = make_tail_evaluators(problem, layout)
    v, trace = minimize_cg(layout.fixed.copy(), evaluate, gradient, cg_params)
    return ComplexVolume(v, problem.spec), trace
