import numpy as np
import pytest
from scipy.integrate import quad

from convexwave.errors import ConfigurationError, SolverError
from convexwave.forward import (
    ForwardParams,
    evaluate_on_plane,
    kernel_symbol,
    plane_lattice,
    precompute_kernel,
    scattered_from_sources,
    solve_scatterer,
    solve_total_field,
    _gmres,
)
from convexwave.grids import ComplexVolume, DomainSpec, InclusionSpec, build_dielectric

INC1 = InclusionSpec((0.0, 0.0, 0.0), 0.3, 3.0)
SMALL = DomainSpec(nx=21, ny=21, nz=21)
CI_PARAMS = ForwardParams(cube_n=32)


def kernel_quadrature(k, a, R):
    """Adaptive-quadrature oracle for the truncated-kernel transform.

    The 3-D Fourier integral of exp(ikr)/(4 pi r) over |x| < R reduces to
    (1/a) int_0^R exp(ikr) sin(ar) dr.
    """
    re = quad(lambda r: np.cos(k * r) * np.sin(a * r), 0.0, R, limit=400)[0]
    im = quad(lambda r: np.sin(k * r) * np.sin(a * r), 0.0, R, limit=400)[0]
    return (re + 1j * im) / a


class TestKernel:
    def test_matches_quadrature_oracle(self):
        k, R = 15.2, 0.72
        for a in (2.0 * k, 0.55 * k, 5.0, 31.7):
            closed = complex(kernel_symbol(k, R, np.array([a]))[0])
            oracle = kernel_quadrature(k, a, R)
            assert abs(closed - oracle) < 1e-6 * abs(oracle)

    def test_high_frequency_decay(self):
        k, R = 15.2, 0.72
        a = np.array([1e3, 1e4, 1e5])
        vals = np.abs(kernel_symbol(k, R, a))
        # decays like a^-2: quadrupling under 10x frequency twice over
        assert vals[1] < 2e-2 * vals[0]
        assert vals[2] < 2e-2 * vals[1]

    def test_removable_singularity_matches_two_sided_limit(self):
        k, R = 15.2, 0.72
        at_k = complex(kernel_symbol(k, R, np.array([k]))[0])
        above = complex(kernel_symbol(k, R, np.array([k * (1.0 + 1e-6)]))[0])
        below = complex(kernel_symbol(k, R, np.array([k * (1.0 - 1e-6)]))[0])
        two_sided = 0.5 * (above + below)
        assert abs(at_k - two_sided) < 1e-6 * abs(at_k)

    def test_zero_frequency_limit(self):
        k, R = 16.2, 1.0
        dc = complex(kernel_symbol(k, R, np.array([0.0]))[0])
        oracle = kernel_quadrature(k, 1e-5, R)
        assert abs(dc - oracle) < 1e-6 * abs(oracle)

    def test_cube_too_small_rejected(self):
        with pytest.raises(ConfigurationError):
            precompute_kernel(15.2, R=1.0, cube_n=32, cube_side=1.5)

    def test_table_is_finite(self):
        table = precompute_kernel(15.2, R=0.72, cube_n=16)
        assert np.all(np.isfinite(table.khat.real)) and np.all(np.isfinite(table.khat.imag))


class TestGmres:
    def test_solves_small_dense_system(self, rng):
        n = 40
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        A = np.eye(n) + 0.1 * a
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x, iters, relres = _gmres(lambda v: A @ v, b, tol=1e-10, restart=20, max_matvecs=400)
        assert relres <= 1e-10
        assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)


class TestSolveTotalField:
    def test_zero_contrast_identity_all_wavenumbers(self):
        from convexwave.grids import WavenumberGrid

        c = build_dielectric([], SMALL)
        zz = SMALL.meshgrid()[2]
        for k in WavenumberGrid().nodes():
            u = solve_total_field(c, float(k), params=CI_PARAMS)
            assert np.abs(u.values - np.exp(1j * k * zz)).max() < 1e-12

    def test_born_regime_single_scattering(self):
        # at contrast 1e-4 the relative deviation from one application of
        # the integral operator is itself O(contrast)
        c = build_dielectric([InclusionSpec((0.0, 0.0, 0.0), 0.3, 1.0 + 1e-4)], SMALL)
        k = 16.2
        sol = solve_scatterer(c, k, CI_PARAMS)
        m_src = c.evaluate(sol.src_points) - 1.0
        ui_src = np.exp(1j * k * sol.src_points[:, 2])
        pts = np.array([[0.0, 0.0, -2.0], [1.0, 0.5, -3.0], [0.4, 0.0, 2.0]])
        born = scattered_from_sources(pts, sol.src_points, m_src * ui_src, k, sol.spacing**3)
        full = scattered_from_sources(pts, sol.src_points, sol.src_values, k, sol.spacing**3)
        assert np.abs(born - full).max() < 5e-4 * np.abs(full).max()

    def test_residual_contract_reasserted(self):
        c = build_dielectric([INC1], SMALL)
        sol = solve_scatterer(c, 16.2, CI_PARAMS)
        assert sol.report.residual <= CI_PARAMS.tol

    def test_matches_dense_circulant_oracle(self):
        # assemble the dense matrix whose action equals the FFT operator on
        # a tiny 11^3 cube and solve directly
        c = build_dielectric([INC1], SMALL)
        k = 16.2
        params = ForwardParams(cube_n=11, tol=1e-10)
        sol = solve_scatterer(c, k, params)
        n = params.cube_n
        table = precompute_kernel(k, sol.spacing * n / 2.0, n)
        kernel_real = np.fft.ifftn(table.khat)
        m = np.zeros((n, n, n))
        idx = np.rint((sol.src_points - sol.origin) / sol.spacing).astype(int)
        m[idx[:, 0], idx[:, 1], idx[:, 2]] = (sol.src_values / sol.u_cube[idx[:, 0], idx[:, 1], idx[:, 2]]).real
        N = n**3
        eye = np.arange(N)
        ii, jj = np.meshgrid(eye, eye, indexing="ij")
        di, dj, dl = np.unravel_index(ii, (n, n, n))
        si, sj, sl = np.unravel_index(jj, (n, n, n))
        circ = kernel_real[(di - si) % n, (dj - sj) % n, (dl - sl) % n]
        A = np.eye(N, dtype=complex) - k * k * circ * m.ravel()[None, :]
        zc = sol.origin[2] + sol.spacing * np.arange(n)
        b = np.exp(1j * k * zc)[None, None, :] * np.ones((n, n, 1))
        u_dense = np.linalg.solve(A, b.ravel()).reshape(n, n, n)
        rel = np.abs(u_dense - sol.u_cube).max() / np.abs(u_dense).max()
        assert rel < 1e-3

    def test_linearity_in_contrast_at_first_order(self):
        k = 15.7
        pts = np.array([[0.0, 0.0, -3.0], [0.7, -0.4, -2.5]])
        norms = []
        for eps in (1e-3, 5e-4):
            c = build_dielectric([InclusionSpec((0.0, 0.0, 0.0), 0.3, 1.0 + eps)], SMALL)
            sol = solve_scatterer(c, k, CI_PARAMS)
            us = scattered_from_sources(pts, sol.src_points, sol.src_values, k, sol.spacing**3)
            norms.append(np.linalg.norm(us))
        assert norms[0] / norms[1] == pytest.approx(2.0, rel=0.05)

    def test_nonconvergence_raises_with_report(self):
        c = build_dielectric([INC1], SMALL)
        params = ForwardParams(cube_n=32, tol=1e-13, max_matvecs=3)
        with pytest.raises(SolverError) as err:
            solve_scatterer(c, 16.2, params)
        assert err.value.report is not None
        assert err.value.report.iterations <= 3


class TestEvaluateOnPlane:
    def test_zero_contrast_gives_incident(self):
        c = build_dielectric([], SMALL)
        zz = SMALL.meshgrid()[2]
        u = ComplexVolume(np.exp(1j * 15.2 * zz), SMALL)
        f = evaluate_on_plane(u, c, 15.2, plane_z=-8.0)
        assert np.abs(f - np.exp(1j * 15.2 * -8.0)).max() < 1e-14

    def test_single_excited_node_is_green_function(self):
        # a lone source node with (c-1) u vol = 1 reproduces the kernel
        from convexwave.grids import DielectricField

        spec = DomainSpec(nx=5, ny=5, nz=5)
        k, plane_z = 15.2, -8.0
        c_arr = np.ones(spec.shape)
        c_arr[2, 2, 2] = 1.0 + 1.0 / spec.cell_volume
        field = DielectricField(c_arr, spec)
        u = ComplexVolume(np.ones(spec.shape, complex), spec)
        f = evaluate_on_plane(u, field, k, plane_z)
        pts, shape = plane_lattice(spec, plane_z)
        xs = pts[:, 0].reshape(shape)
        ys = pts[:, 1].reshape(shape)
        z_src = spec.z_nodes()[2]
        d = np.sqrt(xs**2 + ys**2 + (plane_z - z_src) ** 2)
        expect = np.exp(1j * k * plane_z) + k * k * np.exp(1j * k * d) / (4.0 * np.pi * d)
        assert np.abs(f - expect).max() < 1e-12 * np.abs(expect).max()

    def test_plane_through_support_rejected(self):
        c = build_dielectric([INC1], SMALL)
        zz = SMALL.meshgrid()[2]
        u = ComplexVolume(np.exp(1j * 15.2 * zz), SMALL)
        with pytest.raises(ConfigurationError):
            evaluate_on_plane(u, c, 15.2, plane_z=0.0)

    def test_backscatter_pattern_is_diffuse_and_center_heavy(self):
        # the measured magnitude is diffuse: no isolated dominant pixel,
        # fluctuations around the incident level
        c = build_dielectric([INC1], SMALL)
        k = 16.2
        sol = solve_scatterer(c, k, CI_PARAMS)
        pts, shape = plane_lattice(SMALL, SMALL.meas_z)
        f = scattered_from_sources(pts, sol.src_points, sol.src_values, k, sol.spacing**3).reshape(
            shape
        ) + np.exp(1j * k * SMALL.meas_z)
        mag = np.abs(f)
        assert 0.9 < mag.min() and mag.max() < 1.1
        assert mag.std() / mag.mean() < 0.05
