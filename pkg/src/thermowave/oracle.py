"""Independent reference solutions.

For linear configurations (no beta; zero or linear pi) every packaged
operator is a scaled identity or a scaled Laplacian, so the semi-discrete
system decouples over the Laplacian eigenbasis into independent 3x3 linear
ODEs in the modal coefficients of (theta, phi, v).  Their matrix
exponentials give the exact-in-time solution on the same spatial grid,
isolating exactly the time-discretization error the stepper commits.  For
nonlinear configurations a nested fine-step run serves as the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .nonlinearity import Nonlinearity
from .operators import DIRICHLET, Grid1D, OperatorBundle
from .stepper import RunResult, StepConfig, run


@lru_cache(maxsize=32)
def _basis_data(n: int, bc: str):
    grid = Grid1D(n, bc)
    dx = grid.dx
    x = grid.x
    if bc == DIRICHLET:
        k = np.arange(1, n + 1)
        B = math.sqrt(2.0) * np.sin(np.outer(x, k * np.pi))
    else:
        k = np.arange(0, n)
        B = math.sqrt(2.0) * np.cos(np.outer(x, k * np.pi))
        B[:, 0] = 1.0
    mu = 2.0 / dx ** 2 * (1.0 - np.cos(k * np.pi * dx))
    B.setflags(write=False)
    mu.setflags(write=False)
    return mu, B


def laplacian_eigenvalues(grid: Grid1D) -> np.ndarray:
    """Eigenvalues of the unit-coefficient discrete Laplacian on the grid."""
    return _basis_data(grid.n_interior, grid.bc)[0]


def modal_transform(grid: Grid1D, u: np.ndarray) -> np.ndarray:
    """Coefficients of u in the orthonormal Laplacian eigenbasis."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_interior,):
        raise ValueError("dimension mismatch in modal_transform")
    _, B = _basis_data(grid.n_interior, grid.bc)
    return grid.dx * (B.T @ u)


def inverse_modal_transform(grid: Grid1D, coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (grid.n_interior,):
        raise ValueError("dimension mismatch in inverse_modal_transform")
    _, B = _basis_data(grid.n_interior, grid.bc)
    return B @ coeffs


def modal_generator(bundle: OperatorBundle, nonlin: Nonlinearity, mu: float) -> np.ndarray:
    """3x3 generator of the semi-discrete dynamics on one Laplacian mode.

    Rows evolve (theta_hat, phi_hat, v_hat); requires symbol-evaluable
    operators and a linear configuration.
    """
    if not nonlin.is_linear:
        raise ValueError("modal generators exist only for linear configurations")
    a1 = float(bundle.diffusion.symbol(mu))
    a2 = float(bundle.stiffness.symbol(mu))
    b1 = float(bundle.damping.symbol(mu))
    b2 = float(bundle.coupling.symbol(mu))
    ell = float(bundle.mass.symbol(mu))
    s = nonlin.pi_slope
    return np.array([
        [-a1, 0.0, -bundle.eta],
        [0.0, 0.0, 1.0],
        [b2 / ell, -(a2 + s) / ell, -b1 / ell],
    ])


@dataclass(frozen=True)
class FieldSnapshot:
    theta: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    z: np.ndarray


class LinearReference:
    """Exact-in-time solution of a linear configuration on the grid.

    ``sample(times)`` exploits uniformly spaced requests by propagating one
    per-mode exponential; arbitrary times fall back to one exponential per
    (mode, time) pair.
    """

    def __init__(self, initial, bundle: OperatorBundle, nonlin: Nonlinearity):
        if not nonlin.is_linear:
            raise ValueError("LinearReference requires a linear configuration")
        self.bundle = bundle
        self.grid = bundle.grid
        theta0, phi0, v0 = (np.asarray(u, dtype=float) for u in initial)
        self._initial = {"theta": theta0.copy(), "phi": phi0.copy(), "v": v0.copy()}
        mu = laplacian_eigenvalues(self.grid)
        self._mu = mu
        self._y0 = np.stack([
            modal_transform(self.grid, theta0),
            modal_transform(self.grid, phi0),
            modal_transform(self.grid, v0),
        ], axis=1)  # (n_modes, 3)
        self._gen = np.stack([modal_generator(bundle, nonlin, m) for m in mu])

    def _expm_batch(self, t: float) -> np.ndarray:
        return np.stack([scipy.linalg.expm(t * M) for M in self._gen])

    def _assemble(self, Y: np.ndarray) -> dict:
        out = {}
        for j, name in enumerate(("theta", "phi", "v")):
            out[name] = inverse_modal_transform(self.grid, Y[:, j])
        return out

    def at(self, t: float) -> FieldSnapshot:
        E = self._expm_batch(float(t))
        Y = np.einsum("kij,kj->ki", E, self._y0)
        fields = self._assemble(Y)
        if t == 0.0:
            fields = {k: v.copy() for k, v in self._initial.items()}
        dY = np.einsum("kij,kj->ki", self._gen, Y)
        z = inverse_modal_transform(self.grid, dY[:, 2])
        return FieldSnapshot(fields["theta"], fields["phi"], fields["v"], z)

    def sample(self, times) -> dict:
        times = np.asarray(times, dtype=float)
        n = self.grid.n_interior
        out = {name: np.empty((times.size, n)) for name in ("theta", "phi", "v")}
        if times.size == 0:
            return out
        dt = np.diff(times)
        uniform = times.size > 2 and np.allclose(dt, dt[0], rtol=1e-12, atol=1e-15)
        if uniform:
            E = self._expm_batch(float(dt[0]))
            Y = np.einsum("kij,kj->ki", self._expm_batch(float(times[0])), self._y0)
            for i in range(times.size):
                fields = self._assemble(Y)
                for name in out:
                    out[name][i] = fields[name]
                if i + 1 < times.size:
                    Y = np.einsum("kij,kj->ki", E, Y)
        else:
            for i, t in enumerate(times):
                snap = self.at(float(t))
                for name in out:
                    out[name][i] = getattr(snap, name)
        # the reference at time zero is the initial data itself
        for i in np.nonzero(times == 0.0)[0]:
            for name in out:
                out[name][i] = self._initial[name]
        return out


def exact_linear_solution(initial, bundle: OperatorBundle, nonlin: Nonlinearity,
                          t: float) -> FieldSnapshot:
    """Semi-discrete solution at time t via per-mode matrix exponentials."""
    return LinearReference(initial, bundle, nonlin).at(t)


class DiscreteReference:
    """Fine-step trajectory exposed as a reference for coarse comparisons.

    Sample times must align with the fine grid (or fall between two fine
    nodes, where the piecewise-linear reconstruction is used).
    """

    def __init__(self, result: RunResult, h_ref: float):
        if not result.complete:
            raise RuntimeError("reference run did not complete")
        self.h_ref = h_ref
        self.states = result.states
        self._arrays = {
            name: np.stack([getattr(s, name) for s in result.states])
            for name in ("theta", "phi", "v")
        }

    def sample(self, times) -> dict:
        times = np.asarray(times, dtype=float)
        pos = times / self.h_ref
        j = np.clip(np.floor(pos).astype(int), 0, len(self.states) - 1)
        jn = np.clip(j + 1, 0, len(self.states) - 1)
        w = np.clip(pos - j, 0.0, 1.0)
        out = {}
        for name, arr in self._arrays.items():
            out[name] = (1.0 - w)[:, None] * arr[j] + w[:, None] * arr[jn]
        return out

    def sample_bar(self, times, side: int = -1) -> dict:
        """Values of the piecewise-constant reconstruction.

        ``side`` resolves queries landing exactly on a node: -1 takes the
        left-limit (the interval ending there), +1 the right-limit.  Error
        integrals over open intervals sample their endpoints from inside.
        """
        times = np.asarray(times, dtype=float)
        pos = times / self.h_ref + side * 1e-6
        j = np.clip(np.floor(pos).astype(int) + 1, 1, len(self.states) - 1)
        return {name: arr[j] for name, arr in self._arrays.items()}


def fine_reference(initial, bundle: OperatorBundle, nonlin: Nonlinearity,
                   T: float, h_ref: float, newton_tol: float = 1e-13) -> DiscreteReference:
    """Tight-tolerance run at h_ref, reusable across a refinement sweep."""
    cfg = StepConfig(h=h_ref, newton_tol=newton_tol)
    result = run(initial, bundle, nonlin, T, cfg)
    return DiscreteReference(result, h_ref)
