"""Grids, tridiagonal elliptic operators, and the operator bundles of the
coupled heat/wave system.

Everything here lives on a uniform 1-D grid over the unit interval.  The
continuous model couples a heat equation for a temperature ``theta`` with a
(possibly damped) wave equation for a potential ``phi``:

    theta' + eta * phi' + diffusion(theta) = 0
    mass(phi'') + damping(phi') + stiffness(phi) + beta(phi) + pi(phi)
        = coupling(theta)

All five operator slots are realized as symmetric tridiagonal matrices
(scaled identities or scaled second-difference Laplacians for the packaged
presets).  Operators and bundles are immutable after assembly and safe to
share between concurrent runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_BCS = (DIRICHLET, NEUMANN)

ZERO = "zero"
IDENTITY = "identity"
LAPLACIAN = "laplacian"
CUSTOM = "custom"

_EPS = float(np.finfo(float).eps)

PRESET_NAMES = ("P1", "P2", "P3", "P4", "P5")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on (0, 1) holding ``n_interior`` unknowns per field.

    Dirichlet grids use the interior nodes x_i = i*dx with dx = 1/(n+1)
    (ghost zeros on the boundary); Neumann grids are cell-centered,
    x_i = (i - 1/2)*dx with dx = 1/n (zero-flux one-sided stencils).
    """

    n_interior: int
    bc: str = DIRICHLET

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 2:
            raise ValueError(f"n_interior must be an integer >= 2, got {self.n_interior}")
        if self.bc not in _BCS:
            raise ValueError(f"bc must be one of {_BCS}, got {self.bc!r}")

    @property
    def dx(self) -> float:
        if self.bc == DIRICHLET:
            return 1.0 / (self.n_interior + 1)
        return 1.0 / self.n_interior

    @property
    def x(self) -> np.ndarray:
        i = np.arange(1, self.n_interior + 1, dtype=float)
        if self.bc == DIRICHLET:
            return i * self.dx
        return (i - 0.5) * self.dx


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric tridiagonal operator (only one off-diagonal is stored).

    ``kind`` tags the algebraic family: scaled identity and scaled
    Laplacian operators know their action on Laplacian eigenvectors
    (``symbol``), which the modal reference paths rely on.  ``custom``
    operators support everything else.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    kind: str = CUSTOM
    coeff: float = 0.0

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        o = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("diag must be a vector of length >= 2")
        if o.shape != (d.size - 1,):
            raise ValueError("offdiag must have length dim - 1")
        d.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", o)

    @property
    def dim(self) -> int:
        return self.diag.size

    @property
    def is_zero(self) -> bool:
        return self.kind == ZERO

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: operator dim {self.dim}, vector shape {u.shape}")
        y = self.diag * u
        y[:-1] += self.offdiag * u[1:]
        y[1:] += self.offdiag * u[:-1]
        return y

    def apply_rows(self, U: np.ndarray) -> np.ndarray:
        """Apply to every row of a (m, dim) array."""
        U = np.asarray(U, dtype=float)
        Y = self.diag * U
        Y[:, :-1] += self.offdiag * U[:, 1:]
        Y[:, 1:] += self.offdiag * U[:, :-1]
        return Y

    def symbol(self, mu):
        """Action on a Laplacian eigenvector with eigenvalue ``mu``."""
        if self.kind == ZERO:
            return np.zeros_like(np.asarray(mu, dtype=float))
        if self.kind == IDENTITY:
            return np.full_like(np.asarray(mu, dtype=float), self.coeff)
        if self.kind == LAPLACIAN:
            return self.coeff * np.asarray(mu, dtype=float)
        raise ValueError("custom operators have no modal symbol")

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag)
                + np.diag(self.offdiag, 1)
                + np.diag(self.offdiag, -1))

    def min_eigenvalue(self) -> float:
        vals = scipy.linalg.eigh_tridiagonal(
            self.diag, self.offdiag, select="i", select_range=(0, 0),
            eigvals_only=True)
        return float(vals[0])

    def norm_bound(self) -> float:
        """Infinity-norm bound, used to scale audit tolerances."""
        return float(np.max(np.abs(self.diag)) + 2.0 * (np.max(np.abs(self.offdiag)) if self.dim > 1 else 0.0))


def zero_operator(n: int) -> DiscreteOperator:
    return DiscreteOperator(np.zeros(n), np.zeros(n - 1), ZERO, 0.0)


def identity_operator(n: int, coeff: float = 1.0) -> DiscreteOperator:
    return DiscreteOperator(np.full(n, float(coeff)), np.zeros(n - 1), IDENTITY, float(coeff))


def assemble_laplacian(grid: Grid1D, coeff: float) -> DiscreteOperator:
    """Second-difference realization of -coeff * d^2/dx^2 on the grid.

    Dirichlet rows assume ghost zeros outside the interval; Neumann rows use
    the one-sided cell-centered stencil, so constants are in the kernel.
    """
    if coeff <= 0:
        raise ValueError(f"coeff must be positive, got {coeff}")
    n = grid.n_interior
    a = coeff / grid.dx ** 2
    diag = np.full(n, 2.0 * a)
    off = np.full(n - 1, -a)
    if grid.bc == NEUMANN:
        diag[0] = a
        diag[-1] = a
    return DiscreteOperator(diag, off, LAPLACIAN, float(coeff))


# ----------------------------------------------------------------------
# Inner products and norms


def h_inner(grid: Grid1D, u: np.ndarray, w: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != w.shape or u.shape != (grid.n_interior,):
        raise ValueError("dimension mismatch in h_inner")
    return grid.dx * float(np.dot(u, w))


def h_norm(grid: Grid1D, u: np.ndarray) -> float:
    return math.sqrt(max(h_inner(grid, u, u), 0.0))


def gradient_inner(grid: Grid1D, u: np.ndarray, w: np.ndarray) -> float:
    """Discrete Dirichlet form: dx * sum of (forward differences / dx) products.

    Dirichlet grids include the two boundary differences against ghost
    zeros; Neumann grids use interior differences only (no boundary flux).
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != w.shape or u.shape != (grid.n_interior,):
        raise ValueError("dimension mismatch in gradient_inner")
    if grid.bc == DIRICHLET:
        du = np.diff(u, prepend=0.0, append=0.0)
        dw = np.diff(w, prepend=0.0, append=0.0)
    else:
        du = np.diff(u)
        dw = np.diff(w)
    return float(np.dot(du, dw)) / grid.dx


def v_norm_sq(grid: Grid1D, u: np.ndarray) -> float:
    return h_inner(grid, u, u) + gradient_inner(grid, u, u)


def v_norm(grid: Grid1D, u: np.ndarray) -> float:
    return math.sqrt(max(v_norm_sq(grid, u), 0.0))


# ----------------------------------------------------------------------
# Resolvent solves


def resolvent_solve(op: DiscreteOperator, h: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (I + h*op) x = rhs by symmetric banded factorization.

    ``op`` must be monotone so the shifted matrix is positive definite.  A
    refinement pass plus a residual audit keep the result within
    1e-13 * |rhs| up to the backward-stable representation floor.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.dim,):
        raise ValueError(f"dimension mismatch: operator dim {op.dim}, rhs shape {rhs.shape}")
    ab = np.zeros((2, op.dim))
    ab[0, 1:] = h * op.offdiag
    ab[1, :] = 1.0 + h * op.diag
    x = scipy.linalg.solveh_banded(ab, rhs)
    res = rhs - (x + h * op.apply(x))
    rn = float(np.linalg.norm(res))
    bn = float(np.linalg.norm(rhs))
    # Representable solutions cannot beat the backward-stable floor
    # eps * |I + h op| * |x|, which dominates 1e-13 * |rhs| once
    # h * |op| is large and the data is rough.
    floor = 8.0 * _EPS * (1.0 + h * op.norm_bound()) * float(np.linalg.norm(x))
    if rn > max(1e-14 * bn, 0.5 * floor):
        x = x + scipy.linalg.solveh_banded(ab, res)
        res = rhs - (x + h * op.apply(x))
        rn = float(np.linalg.norm(res))
    if rn > 1e-13 * bn + floor:
        raise RuntimeError(f"resolvent residual audit failed: {rn:.3e} > "
                           f"1e-13 * {bn:.3e} + floor {floor:.3e}")
    return x


# ----------------------------------------------------------------------
# Bundles and presets


@dataclass(frozen=True)
class OperatorBundle:
    """The operator tuple of one coupled problem plus structural constants.

    ``mass_lb`` is a lower bound for the mass form (exact for the packaged
    presets where mass is the identity).  ``coupling_bound`` certifies
    |coupling u| <= coupling_bound * (|diffusion u| + |u|) for all u; it
    feeds the step-size threshold of the per-step nonlinear solve.
    """

    grid: Grid1D
    mass: DiscreteOperator
    diffusion: DiscreteOperator
    damping: DiscreteOperator
    stiffness: DiscreteOperator
    coupling: DiscreteOperator
    eta: float
    mass_lb: float
    coupling_bound: float

    def __post_init__(self):
        n = self.grid.n_interior
        for name in ("mass", "diffusion", "damping", "stiffness", "coupling"):
            if getattr(self, name).dim != n:
                raise ValueError(f"{name} operator dimension does not match grid")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.mass_lb <= 0:
            raise ValueError(f"mass_lb must be positive, got {self.mass_lb}")

    def h_threshold(self, lipschitz_const: float = 0.0) -> float:
        return solvability_threshold(self.mass_lb, lipschitz_const, self.eta, self.coupling_bound)


@dataclass(frozen=True)
class ProblemPreset:
    """Coefficient set for the five packaged problems.

    P1: linear thermoacoustic coupling; an undamped wave equation with the
        pointwise term -m^2 * phi, forced by the temperature through the
        same scaled Laplacian that stiffens the wave.
    P2: as P1 with friction epsilon * phi' and a monotone nonlinearity
        beta plus Lipschitz perturbation pi in place of the m^2 term.
    P3: as P2 with viscous friction -epsilon * Laplacian(phi').
    P4: unit-coefficient variant of P2 with identity coupling and damping.
    P5: unit-coefficient variant of P3 with identity coupling.
    """

    name: str
    sigma: float = 1.0
    c: float = 1.0
    m: float = 0.0
    epsilon: float = 1.0
    gamma: float = 2.0
    bc: str = DIRICHLET

    def __post_init__(self):
        if self.name not in PRESET_NAMES:
            raise ValueError(f"unknown preset {self.name!r}")
        if self.bc not in _BCS:
            raise ValueError(f"bc must be one of {_BCS}")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.c <= 0.0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")


def build_bundle(preset: ProblemPreset, grid: Grid1D) -> OperatorBundle:
    """Assemble the operator bundle for a preset on the given grid."""
    if grid.bc != preset.bc:
        raise ValueError(f"grid bc {grid.bc!r} does not match preset bc {preset.bc!r}")
    n = grid.n_interior
    mass = identity_operator(n, 1.0)
    if preset.name in ("P1", "P2", "P3"):
        diffusion = assemble_laplacian(grid, preset.sigma)
        stiffness = assemble_laplacian(grid, preset.c ** 2)
        coupling = assemble_laplacian(grid, preset.c ** 2)
        eta = preset.gamma - 1.0
        if preset.name == "P1":
            damping = zero_operator(n)
        elif preset.name == "P2":
            damping = identity_operator(n, preset.epsilon) if preset.epsilon > 0 else zero_operator(n)
        else:
            damping = assemble_laplacian(grid, preset.epsilon) if preset.epsilon > 0 else zero_operator(n)
    else:
        diffusion = assemble_laplacian(grid, 1.0)
        stiffness = assemble_laplacian(grid, 1.0)
        coupling = identity_operator(n, 1.0)
        eta = 1.0
        damping = identity_operator(n, 1.0) if preset.name == "P4" else assemble_laplacian(grid, 1.0)
    bound = coupling_relative_bound(coupling, diffusion)
    return OperatorBundle(grid=grid, mass=mass, diffusion=diffusion, damping=damping,
                          stiffness=stiffness, coupling=coupling, eta=eta,
                          mass_lb=1.0, coupling_bound=bound)


def _lanczos_top_eigenvalue(apply, n: int, m: int = 128) -> float:
    """Largest eigenvalue of a symmetric PSD operator by Lanczos with full
    reorthogonalization.  Deterministic: fixed start vector, fixed iteration
    budget, LAPACK tridiagonal eigensolve at the end."""
    m = min(m, n)
    Q = np.zeros((m, n))
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    q = np.ones(n) / math.sqrt(n)
    q[0] += 0.5 / math.sqrt(n)  # break symmetry deterministically
    q /= np.linalg.norm(q)
    k = 0
    for j in range(m):
        Q[j] = q
        w = apply(q)
        alpha[j] = float(np.dot(q, w))
        w = w - alpha[j] * q
        if j > 0:
            w = w - beta[j - 1] * Q[j - 1]
        for _ in range(2):  # full reorthogonalization, twice for safety
            w = w - Q[: j + 1].T @ (Q[: j + 1] @ w)
        k = j + 1
        if j < m - 1:
            b = float(np.linalg.norm(w))
            if b <= 1e-14 * max(1.0, abs(alpha[j])):
                break
            beta[j] = b
            q = w / b
    vals = scipy.linalg.eigh_tridiagonal(alpha[:k], beta[: k - 1], eigvals_only=True)
    return float(vals[-1])


def coupling_relative_bound(coupling: DiscreteOperator, diffusion: DiscreteOperator) -> float:
    """Constant C certifying |coupling u| <= C * (|diffusion u| + |u|).

    Computed as the largest singular value of coupling composed with the
    unit-shift resolvent of diffusion; by the triangle inequality that
    singular value majorizes the optimal ratio constant.  Kind-tagged
    operator pairs share an eigenbasis, so the value is an exact maximum of
    symbol ratios over the spectrum; custom pairs go through a
    deterministic Lanczos iteration on the composed normal operator.
    """
    if coupling.is_zero:
        return 0.0
    n = coupling.dim
    tagged = (coupling.kind in (IDENTITY, LAPLACIAN)
              and diffusion.kind in (IDENTITY, LAPLACIAN))
    if tagged:
        if LAPLACIAN in (coupling.kind, diffusion.kind):
            src = coupling if coupling.kind == LAPLACIAN else diffusion
            mu = scipy.linalg.eigh_tridiagonal(src.diag / src.coeff,
                                               src.offdiag / src.coeff,
                                               eigvals_only=True)
            mu = np.clip(mu, 0.0, None)
        else:
            mu = np.array([0.0])
        vals = np.abs(coupling.symbol(mu)) / (1.0 + diffusion.symbol(mu))
        return float(np.max(vals))

    def ktk(x):
        y = resolvent_solve(diffusion, 1.0, np.asarray(x, dtype=float).ravel())
        y = coupling.apply(y)
        y = coupling.apply(y)
        return resolvent_solve(diffusion, 1.0, y)

    lam = _lanczos_top_eigenvalue(ktk, n)
    if lam > 1e24:
        raise RuntimeError("coupling is not relatively bounded by diffusion on this grid")
    return math.sqrt(max(lam, 0.0))


def solvability_threshold(mass_lb: float, lipschitz_const: float, eta: float,
                          coupling_bound: float) -> float:
    """Step-size threshold below which the per-step elliptic operator is
    strictly monotone, so each implicit step has a unique solution.
    """
    d = 1.0 + lipschitz_const + eta * coupling_bound
    b = eta * coupling_bound
    val = math.sqrt(mass_lb / d + b * b / (4.0 * d)) - b / (2.0 * d)
    if val <= 0.0:
        raise RuntimeError("solvability threshold came out nonpositive")
    return val


def estimate_structural_constants(bundle: OperatorBundle,
                                  lipschitz_const: float = 0.0) -> tuple[float, float]:
    """Recompute the coupling bound and the induced step-size threshold."""
    bound = coupling_relative_bound(bundle.coupling, bundle.diffusion)
    return bound, solvability_threshold(bundle.mass_lb, lipschitz_const, bundle.eta, bound)


def v_coercivity_constant(op: DiscreteOperator, grid: Grid1D, alpha: float) -> float:
    """Constant w with (op u, u) + alpha |u|^2 >= w |u|_V^2 for all u.

    Diagnostics only; the stepping path never uses it.  Laplacian-kind
    operators control the gradient part directly; identity and zero kinds
    are folded through the inverse inequality bounding the discrete
    gradient by 4/dx^2 times the mean square.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    poincare = 1.0 + 4.0 / grid.dx ** 2
    if op.kind == LAPLACIAN:
        return min(op.coeff, alpha)
    if op.kind == IDENTITY:
        return (op.coeff + alpha) / poincare
    if op.kind == ZERO:
        return alpha / poincare
    return max(op.min_eigenvalue(), 0.0) / poincare + alpha / poincare


# ----------------------------------------------------------------------
# Structural audits


def audit_bundle(bundle: OperatorBundle, n_samples: int = 100, seed: int = 0) -> dict:
    """Numerical audit of the structural conditions the scheme relies on.

    Returns worst-case figures over ``n_samples`` random probe pairs:
    monotonicity of every operator, coercivity of the mass form, symmetry
    compatibility and sign of the damping/stiffness and coupling/diffusion
    pairings, and the relative bound of coupling by diffusion.
    """
    rng = np.random.default_rng(seed)
    n = bundle.grid.n_interior
    grid = bundle.grid
    out = {}
    for name in ("mass", "diffusion", "damping", "stiffness", "coupling"):
        op = getattr(bundle, name)
        scale = max(op.norm_bound(), 1.0)
        out[f"min_eig_{name}"] = op.min_eigenvalue()
        out[f"min_eig_{name}_scaled"] = op.min_eigenvalue() / scale
    out["mass_coercivity_slack"] = bundle.mass.min_eigenvalue() - bundle.mass_lb

    b1, a2 = bundle.damping, bundle.stiffness
    b2, a1 = bundle.coupling, bundle.diffusion
    sb1 = max(b1.norm_bound(), 1.0)
    sa2 = max(a2.norm_bound(), 1.0)
    cross = 0.0
    pos_da = math.inf
    pos_cd = math.inf
    rel = -math.inf
    for _ in range(n_samples):
        w = rng.standard_normal(n)
        z = rng.standard_normal(n)
        nw = h_norm(grid, w)
        nz = h_norm(grid, z)
        lhs = h_inner(grid, b1.apply(w), a2.apply(z))
        rhs = h_inner(grid, b1.apply(z), a2.apply(w))
        cross = max(cross, abs(lhs - rhs) / (nw * nz * sb1 * sa2))
        pos_da = min(pos_da, h_inner(grid, b1.apply(w), a2.apply(w)) / (nw * nw * sb1 * sa2))
        pos_cd = min(pos_cd, h_inner(grid, b2.apply(w), a1.apply(w))
                     / (nw * nw * max(b2.norm_bound(), 1.0) * max(a1.norm_bound(), 1.0)))
        rel = max(rel, h_norm(grid, b2.apply(w))
                  - bundle.coupling_bound * (h_norm(grid, a1.apply(w)) + nw))
    out["cross_symmetry"] = cross
    out["positivity_damping_stiffness"] = pos_da
    out["positivity_coupling_diffusion"] = pos_cd
    out["relative_bound_slack"] = rel
    return out
