import numpy as np
import pytest

from convexwave.grids import DomainSpec, WavenumberGrid


@pytest.fixture
def small_spec():
    return DomainSpec(nx=7, ny=7, nz=7)


@pytest.fixture
def small_kgrid():
    return WavenumberGrid(nk=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def complex_noise(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def separable_harmonic(spec, scale=1.0, p=1, q=1):
    """Discrete-harmonic field vanishing on the lateral and back faces.

    sin/sin transverse modes paired with the matching discrete exponential
    in z, so the 7-point Laplacian annihilates it exactly at every
    interior node.  Used as a manufactured solution by several tests.
    """
    nx, ny, nz = spec.shape
    theta_x = np.pi * p / (nx - 1)
    theta_y = np.pi * q / (ny - 1)
    ex = (2.0 * np.cos(theta_x) - 2.0) / spec.h**2
    ey = (2.0 * np.cos(theta_y) - 2.0) / spec.h**2
    s = 2.0 - spec.hz**2 * (ex + ey)
    mu = 0.5 * (s + np.sqrt(s * s - 4.0))
    l = np.arange(nz)
    zprof = mu ** (l - (nz - 1.0)) - mu ** (-(l - (nz - 1.0)))
    zprof = zprof / np.abs(zprof).max()
    sx = np.sin(theta_x * np.arange(nx))
    sy = np.sin(theta_y * np.arange(ny))
    field = scale * sx[:, None, None] * sy[None, :, None] * zprof[None, None, :]
    return field.astype(complex)


def fd_gradient_check(functional, gradient, x, free_mask, rng, n_probe=50, step=1e-6):
    """Norm-wise relative error between analytic and central-FD gradients.

    Probes ``n_probe`` random free components (both real and imaginary
    parts); returns ||g_fd - g_an|| / ||g_an|| over the probed set.
    """
    g = gradient(x)
    idx = np.argwhere(free_mask)
    sel = idx[rng.permutation(len(idx))[: min(n_probe, len(idx))]]
    fd, an = [], []
    for node in sel:
        node = tuple(node)
        for part in (1.0, 1j):
            xp = x.copy()
            xp[node] += step * part
            xm = x.copy()
            xm[node] -= step * part
            fd.append((functional(xp) - functional(xm)) / (2.0 * step))
            an.append(g[node].real if part == 1.0 else g[node].imag)
    fd = np.asarray(fd)
    an = np.asarray(an)
    return float(np.linalg.norm(fd - an) / np.linalg.norm(an))
