"""Energy bookkeeping and trajectory diagnostics.

The implicit scheme satisfies an exact per-step energy balance: testing the
wave equation with the step increment and eliminating the temperature
forcing through the heat equation telescopes the discrete energy

    E = 1/2 (mass v, v) + 1/2 (stiffness phi, phi) + 1/(2 eta) (coupling theta, theta)

against a sum of nonnegative dissipation terms.  ``step_identity_residual``
measures how far a computed step is from that algebraic identity (zero in
exact arithmetic, solver tolerance in practice).  The module also carries
the piecewise-constant / piecewise-linear time reconstructions of a
trajectory, their exact norm identities, and the uniform-boundedness
monitors used by the refinement studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import Nonlinearity, potential_total
from .operators import Grid1D, OperatorBundle, h_inner


@dataclass(frozen=True)
class EnergyRecord:
    """Energy split of one state plus the dissipation spent entering it.

    kinetic           1/2 (mass v, v)
    elastic           1/2 (stiffness phi, phi)
    thermal           1/(2 eta) (coupling theta, theta)
    potential         quadrature of the beta potential at phi
    dissipation_b1    h (damping v, v)
    dissipation_cross (h/eta) (coupling theta, diffusion theta)
    """

    kinetic: float
    elastic: float
    thermal: float
    potential: float
    dissipation_b1: float
    dissipation_cross: float

    @property
    def total(self) -> float:
        """The telescoping energy (kinetic + elastic + thermal)."""
        return self.kinetic + self.elastic + self.thermal

    @property
    def lyapunov(self) -> float:
        return self.total + self.potential


def energy(state, bundle: OperatorBundle, nonlin: Nonlinearity) -> EnergyRecord:
    """Energy record of a state; square-root norms are evaluated as bilinear
    forms (op u, u), never through explicit operator square roots."""
    grid = bundle.grid
    v, phi, theta = state.v, state.phi, state.theta
    return EnergyRecord(
        kinetic=0.5 * h_inner(grid, bundle.mass.apply(v), v),
        elastic=0.5 * h_inner(grid, bundle.stiffness.apply(phi), phi),
        thermal=0.5 / bundle.eta * h_inner(grid, bundle.coupling.apply(theta), theta),
        potential=potential_total(nonlin, grid, phi),
        dissipation_b1=state.h * h_inner(grid, bundle.damping.apply(v), v),
        dissipation_cross=state.h / bundle.eta
        * h_inner(grid, bundle.coupling.apply(theta), bundle.diffusion.apply(theta)),
    )


def step_identity_residual(state_n, state_np1, bundle: OperatorBundle,
                           nonlin: Nonlinearity) -> float:
    """Absolute residual of the exact per-step energy balance.

    With E the telescoping energy and D the forward differences between the
    two states, the computed trajectory satisfies

        [E(n+1) - E(n)] + 1/2 (mass Dv, Dv) + 1/2 (stiffness Dphi, Dphi)
        + 1/(2 eta) (coupling Dtheta, Dtheta) + h (damping v+, v+)
        + (h/eta) (coupling theta+, diffusion theta+)
        + (beta(phi+), Dphi) + h (pi(phi+), v+)  =  0

    exactly in real arithmetic; numerically the residual reflects solver
    tolerance only.
    """
    grid = bundle.grid
    h = state_np1.h
    dv = state_np1.v - state_n.v
    dphi = state_np1.phi - state_n.phi
    dth = state_np1.theta - state_n.theta
    e0 = energy(state_n, bundle, nonlin)
    e1 = energy(state_np1, bundle, nonlin)
    total = e1.total - e0.total
    total += 0.5 * h_inner(grid, bundle.mass.apply(dv), dv)
    total += 0.5 * h_inner(grid, bundle.stiffness.apply(dphi), dphi)
    total += 0.5 / bundle.eta * h_inner(grid, bundle.coupling.apply(dth), dth)
    total += h * h_inner(grid, bundle.damping.apply(state_np1.v), state_np1.v)
    total += h / bundle.eta * h_inner(grid, bundle.coupling.apply(state_np1.theta),
                                      bundle.diffusion.apply(state_np1.theta))
    total += h_inner(grid, nonlin.beta(state_np1.phi), dphi)
    total += h * h_inner(grid, nonlin.pi(state_np1.phi), state_np1.v)
    return abs(total)


def lyapunov_check(states, bundle: OperatorBundle, nonlin: Nonlinearity,
                   slack: float = 1e-10):
    """Violations of the energy + potential decay along a trajectory.

    Only valid when pi vanishes (with a perturbation the balance carries
    data-dependent source terms and this check would be meaningless).
    Returns a list of (index, overshoot) pairs; empty means monotone decay
    within ``slack * (1 + E(n))`` at every step.
    """
    if nonlin.pi_kind != "zero":
        raise ValueError("lyapunov_check requires pi == 0; run the audit in monitor mode instead")
    out = []
    prev = energy(states[0], bundle, nonlin)
    for n in range(1, len(states)):
        cur = energy(states[n], bundle, nonlin)
        allowed = prev.lyapunov + slack * (1.0 + prev.total)
        if cur.lyapunov > allowed:
            out.append((n, cur.lyapunov - prev.lyapunov))
        prev = cur
    return out


# ----------------------------------------------------------------------
# Time reconstructions


@dataclass(frozen=True)
class Interpolant:
    """Node values of one field with its two time reconstructions.

    ``hat`` is continuous piecewise linear through the nodes; ``bar`` is
    piecewise constant, equal on each interval to the right node value.
    """

    times: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=float)
        y = np.ascontiguousarray(self.nodes, dtype=float)
        if y.shape[0] != t.size:
            raise ValueError("node array does not match time grid")
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "nodes", y)

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def hat(self, t: float) -> np.ndarray:
        t = float(min(max(t, self.times[0]), self.times[-1]))
        j = int(np.searchsorted(self.times, t, side="right") - 1)
        j = min(max(j, 0), self.times.size - 2)
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return (1.0 - w) * self.nodes[j] + w * self.nodes[j + 1]

    def bar(self, t: float) -> np.ndarray:
        t = float(min(max(t, self.times[0]), self.times[-1]))
        j = int(np.searchsorted(self.times, t, side="left"))
        j = min(max(j, 1), self.times.size - 1)
        return self.nodes[j]

    def deltas(self) -> np.ndarray:
        return self.nodes[1:] - self.nodes[:-1]

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


@dataclass(frozen=True)
class TrajectoryInterpolants:
    theta: Interpolant
    phi: Interpolant
    v: Interpolant
    z: Interpolant

    @property
    def h(self) -> float:
        return self.theta.h

    @property
    def times(self) -> np.ndarray:
        return self.theta.times


def build_interpolants(states) -> TrajectoryInterpolants:
    h = states[1].h if len(states) > 1 else states[0].h
    times = np.array([s.t_index * h for s in states])
    fields = {}
    for name in ("theta", "phi", "v", "z"):
        nodes = np.stack([getattr(s, name) for s in states])
        fields[name] = Interpolant(times, nodes)
    return TrajectoryInterpolants(**fields)


def _h_norms(grid: Grid1D, rows: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(grid.dx * np.sum(rows * rows, axis=1), 0.0))


def _v_norms_sq(grid: Grid1D, rows: np.ndarray) -> np.ndarray:
    base = grid.dx * np.sum(rows * rows, axis=1)
    if grid.bc == "dirichlet":
        pad = np.zeros((rows.shape[0], 1))
        d = np.diff(np.hstack([pad, rows, pad]), axis=1)
    else:
        d = np.diff(rows, axis=1)
    return base + np.sum(d * d, axis=1) / grid.dx


def _v_norms(grid: Grid1D, rows: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(_v_norms_sq(grid, rows), 0.0))


def _rel_dev(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


def interpolation_identities_check(interp: TrajectoryInterpolants, grid: Grid1D) -> float:
    """Worst relative deviation over the exact reconstruction identities.

    For any trajectory respecting the difference-quotient relations between
    phi, v and z the following hold exactly:

      sup-V of hat(phi)          = max(V-norm of phi_0, sup-V of bar(phi))
      sup-V of hat(v)            = max(V-norm of v_0, sup-V of bar(v))
      sup-V of hat(theta)        = max(V-norm of theta_0, sup-V of bar(theta))
      sup-V of bar(phi)-hat(phi) = h * sup-V of d/dt hat(phi) = h * sup-V of bar(v)
      sup-H of bar(v)-hat(v)     = h * sup-H of d/dt hat(v)   = h * sup-H of bar(z)
      L2-V of bar(theta)-hat(theta) squared
                                 = h^2/3 * L2-V of d/dt hat(theta) squared

    Sup norms of the piecewise-linear reconstructions are attained at the
    nodes; we still sample interval midpoints to exercise the evaluators.
    """
    h = interp.h
    devs = []

    for field in (interp.phi, interp.v, interp.theta):
        node_norms = _v_norms(grid, field.nodes)
        mid_norms = _v_norms(grid, field.midpoints())
        lhs = max(node_norms.max(), mid_norms.max())
        rhs = max(node_norms[0], node_norms[1:].max())
        devs.append(_rel_dev(lhs, rhs))

    # bar - hat gap of phi against the velocity reconstruction, V-norm
    dphi = interp.phi.deltas()
    lhs = _v_norms(grid, dphi).max()
    mid = h * _v_norms(grid, dphi / h).max()
    rhs = h * _v_norms(grid, interp.v.nodes[1:]).max()
    devs.append(_rel_dev(lhs, mid))
    devs.append(_rel_dev(mid, rhs))

    # bar - hat gap of v against the acceleration reconstruction, H-norm
    dv = interp.v.deltas()
    lhs = _h_norms(grid, dv).max()
    mid = h * _h_norms(grid, dv / h).max()
    rhs = h * _h_norms(grid, interp.z.nodes[1:]).max()
    devs.append(_rel_dev(lhs, mid))
    devs.append(_rel_dev(mid, rhs))

    # squared L2-V gap of theta (exact interval integral of a linear ramp)
    dth = interp.theta.deltas()
    lhs = float(np.sum(_v_norms_sq(grid, dth)) * h / 3.0)
    rhs = h * h / 3.0 * float(np.sum(_v_norms_sq(grid, dth / h) * h))
    devs.append(_rel_dev(lhs, rhs))

    return max(devs)


# ----------------------------------------------------------------------
# Uniform-boundedness monitors


def _form_rows(grid: Grid1D, op, rows: np.ndarray) -> np.ndarray:
    """(op u, u) in the grid inner product, rowwise."""
    return grid.dx * np.sum(op.apply_rows(rows) * rows, axis=1)


def apriori_monitor(states, bundle: OperatorBundle, nonlin: Nonlinearity) -> dict:
    """Trajectory quantities that stay bounded under step refinement.

    Keys follow the estimates driving the scheme's stability analysis:
    sup-in-time and time-integrated norms of the velocity, acceleration,
    potential, temperature rate, and the images under every operator of the
    bundle.  Scaled variants carry their stabilizing power of h explicitly.
    """
    grid = bundle.grid
    h = states[1].h if len(states) > 1 else states[0].h
    th = np.stack([s.theta for s in states])
    ph = np.stack([s.phi for s in states])
    vv = np.stack([s.v for s in states])
    zz = np.stack([s.z for s in states])
    dth = np.diff(th, axis=0)

    out = {}
    out["v_sup_H2"] = float(np.max(_h_norms(grid, vv[1:]) ** 2))
    out["z_L2H2_h"] = h * float(np.sum(h * _h_norms(grid, zz[1:]) ** 2))
    out["damping_v_form_L2"] = float(np.sum(h * _form_rows(grid, bundle.damping, vv[1:])))
    out["phi_sup_V2"] = float(np.max(_v_norms_sq(grid, ph[1:])))
    out["v_L2V2_h"] = h * float(np.sum(h * _v_norms_sq(grid, vv[1:])))
    out["coupling_theta_form_sup"] = float(np.max(_form_rows(grid, bundle.coupling, th[1:])))
    out["coupling_dtheta_form_L2_h"] = h * float(np.sum(_form_rows(grid, bundle.coupling, dth) / h))

    out["z_sup_H2"] = float(np.max(_h_norms(grid, zz[1:]) ** 2))
    out["damping_z_form_L2"] = float(np.sum(h * _form_rows(grid, bundle.damping, zz[1:])))
    out["v_sup_V2"] = float(np.max(_v_norms_sq(grid, vv[1:])))
    out["z_L2V2_h"] = h * float(np.sum(h * _v_norms_sq(grid, zz[1:])))

    out["beta_sup_H"] = float(np.max(_h_norms(grid, nonlin.beta(ph[1:]))))

    out["dtheta_L2H2"] = float(np.sum(_h_norms(grid, dth) ** 2 / h))
    out["dtheta_L2V2"] = float(np.sum(_v_norms_sq(grid, dth) / h))
    out["diffusion_theta_sup_H2"] = float(np.max(_h_norms(grid, bundle.diffusion.apply_rows(th[1:])) ** 2))
    out["theta_sup_V2"] = float(np.max(_v_norms_sq(grid, th[1:])))

    out["coupling_theta_sup_H2"] = float(np.max(_h_norms(grid, bundle.coupling.apply_rows(th[1:])) ** 2))
    out["damping_v_L2H2"] = float(np.sum(h * _h_norms(grid, bundle.damping.apply_rows(vv[1:])) ** 2))
    out["stiffness_phi_L2H2"] = float(np.sum(h * _h_norms(grid, bundle.stiffness.apply_rows(ph[1:])) ** 2))
    return out


def apriori_ratios(per_h: list[dict], floor: float = 1e-12) -> dict:
    """max-over-h of each monitored quantity relative to its coarsest value.

    ``per_h`` must be ordered from the largest step size down.  Quantities
    below ``floor`` everywhere report ratio 1.
    """
    ratios = {}
    for key in per_h[0]:
        coarse = per_h[0][key]
        peak = max(d[key] for d in per_h)
        if peak <= floor:
            ratios[key] = 1.0
        else:
            ratios[key] = peak / max(coarse, floor)
    return ratios


def write_energy_csv(path, states, bundle: OperatorBundle, nonlin: Nonlinearity,
                     header_lines=()) -> None:
    """Per-step energy table; the identity-residual column is 0 at n = 0."""
    h = states[1].h if len(states) > 1 else states[0].h
    rows = []
    for n, s in enumerate(states):
        rec = energy(s, bundle, nonlin)
        resid = 0.0 if n == 0 else step_identity_residual(states[n - 1], s, bundle, nonlin)
        rows.append((n, n * h, rec.kinetic, rec.elastic, rec.thermal, rec.potential,
                     rec.dissipation_b1, rec.dissipation_cross, resid))
    with open(path, "w") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        f.write("n,t,kinetic,elastic,thermal,potential,dissipation_b1,dissipation_cross,identity_residual\n")
        for row in rows:
            f.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
