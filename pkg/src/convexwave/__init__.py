"""Backscattering simulation and globally convergent dielectric
reconstruction for the 3-D Helmholtz equation.

The package simulates single-direction backscattering data for ball
phantoms over an interval of wavenumbers, then recovers the dielectric
constant by minimizing Carleman-weighted least-squares functionals whose
convexity removes the usual dependence on a good starting guess.
"""

from .config import ExperimentConfig, load_config
from .convexify import ConvexifyProblem, apply_L, bregman_probe, minimize_J
from .datapipe import (
    BoundaryDataSet,
    NoiseSpec,
    PlaneField,
    add_noise,
    extract_boundary_data,
    log_and_differentiate,
    propagate,
    scan_depth,
)
from .descent import CGParams, MinimizeTrace
from .errors import ConfigurationError, ConvexwaveError, DegenerateDataError, SolverError
from .forward import ForwardParams, evaluate_on_plane, precompute_kernel, solve_total_field
from .grids import (
    ComplexVolume,
    DielectricField,
    DomainSpec,
    InclusionSpec,
    MultiKVolume,
    WavenumberGrid,
    build_dielectric,
    build_grid,
    discrete_norms,
)
from .reconstruct import ReconstructionReport, assemble_v, evaluate_against_truth, recover_c
from .stencils import CarlemanWeight, gradient3, k_tail_integral, laplacian, weight_table
from .tail import TailProblem, assemble_tail_unknowns, minimize_tail

__version__ = "0.1.0"
