"""Shared test helpers: synthetic correspondence generators and oracles."""

import numpy as np

from shapecal.distortion import DistortionModel


def synth_correspondences(model, radii, n=200, seed=0, noise=0.0):
    """Exact (or noise-corrupted) correspondences from a known model."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(radii[0], radii[1], size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    x = r * np.cos(theta)
    y = r * np.sin(theta)
    scale = model.L(r)
    data = np.stack([x, y, scale * x, scale * y], axis=1)
    if noise > 0:
        data[:, 2:] += rng.normal(scale=noise, size=(n, 2))
    return data


def poly_min_on_grid(coeffs_low_first, lo, hi, samples=1000):
    """Grid-scan minimum of a univariate polynomial, endpoints included."""
    rs = np.linspace(lo, hi, samples)
    return float(np.polyval(np.asarray(coeffs_low_first)[::-1], rs).min())


def pincushion_feasible(k4, k5, k6, rbar, samples=512, tol=1e-12):
    """Direct check of the division-model pincushion conditions."""
    rs = np.linspace(0.0, rbar, samples)
    g = 1 + k4 * rs + k5 * rs ** 2 + k6 * rs ** 3
    if g.min() <= tol:
        return False
    g1 = k4 + 2 * k5 * rs + 3 * k6 * rs ** 2
    h = 2 * g1 ** 2 - g * (2 * k5 + 6 * k6 * rs)
    return (-g1).min() >= -tol and h.min() >= -tol


def common_root_mustache(rho=2.0, a=-0.16, b=0.02, c=-0.25, d=0.03):
    """Rational model whose f and g share an exact root at rho.

    f = (1 - r/rho)(1 + a r + b r^2), g = (1 - r/rho)(1 + c r + d r^2);
    both are genuine cubics, so the six coefficients are uniquely
    determined by noiseless samples of L = f/g away from the root, and any
    least-squares fit of such data must reproduce the common root.
    """
    s = -1.0 / rho
    k1, k2, k3 = a + s, b + s * a, s * b
    k4, k5, k6 = c + s, d + s * c, s * d
    return DistortionModel("rational", (k1, k2, k3, k4, k5, k6))
