"""Named initial-data profiles.

All profiles respect the grid's boundary condition (they are synthesized
from Laplacian eigenvectors), so temperature data lies in the domain of the
diffusion operator and the startup estimates of the scheme apply.
"""

from __future__ import annotations

import numpy as np

from .operators import Grid1D
from .oracle import inverse_modal_transform


def zero_profile(grid: Grid1D):
    n = grid.n_interior
    return np.zeros(n), np.zeros(n), np.zeros(n)


def mode_vector(grid: Grid1D, k: int) -> np.ndarray:
    """The k-th orthonormal eigenvector of the grid Laplacian.

    Dirichlet modes are indexed k = 1..n, Neumann modes k = 0..n-1 (the
    zero mode is the constant).
    """
    n = grid.n_interior
    lo = 1 if grid.bc == "dirichlet" else 0
    if not lo <= k <= n - 1 + lo:
        raise ValueError(f"mode index {k} out of range [{lo}, {n - 1 + lo}]")
    coeffs = np.zeros(n)
    coeffs[k - lo] = 1.0
    return inverse_modal_transform(grid, coeffs)


def single_mode(grid: Grid1D, k: int, theta_amp: float, phi_amp: float,
                v_amp: float):
    e = mode_vector(grid, k)
    return theta_amp * e, phi_amp * e, v_amp * e


def random_smooth(grid: Grid1D, seed: int, decay: float = 2.0,
                  amplitude: float = 1.0):
    """Spectrally decaying random data; reproducible for a fixed seed."""
    if decay < 0:
        raise ValueError("decay must be nonnegative")
    n = grid.n_interior
    rng = np.random.default_rng(seed)
    weights = (1.0 + np.arange(n)) ** (-float(decay))
    fields = []
    for _ in range(3):
        coeffs = amplitude * rng.standard_normal(n) * weights
        fields.append(inverse_modal_transform(grid, coeffs))
    return tuple(fields)


def make_initial(grid: Grid1D, desc: dict):
    """Dispatch a profile description to its builder (config-file entry)."""
    profile = desc.get("profile")
    if profile == "zero":
        return zero_profile(grid)
    if profile == "single_mode":
        return single_mode(grid, int(desc["mode"]),
                           float(desc.get("theta_amp", 1.0)),
                           float(desc.get("phi_amp", 1.0)),
                           float(desc.get("v_amp", 0.0)))
    if profile == "random_smooth":
        return random_smooth(grid, int(desc["seed"]),
                             float(desc.get("decay", 2.0)),
                             float(desc.get("amplitude", 1.0)))
    raise ValueError(f"unknown initial profile {profile!r}")
