import numpy as np
import pytest
from conftest import all_preset_bundles, dirichlet_sine, preset_bundle

from thermowave import (Grid1D, ProblemPreset, assemble_laplacian, audit_bundle,
                        build_bundle, coupling_relative_bound,
                        estimate_structural_constants, gradient_inner, h_inner,
                        h_norm, identity_operator, resolvent_solve,
                        solvability_threshold, v_norm, v_norm_sq, zero_operator)


def mu_k(grid, k):
    return 2.0 / grid.dx ** 2 * (1.0 - np.cos(k * np.pi * grid.dx))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(1)
    with pytest.raises(ValueError):
        Grid1D(8, bc="periodic")
    assert Grid1D(3).dx == 0.25
    assert Grid1D(4, bc="neumann").dx == 0.25


def test_laplacian_dirichlet_n3():
    op = assemble_laplacian(Grid1D(3), 1.0)
    assert np.array_equal(op.diag, [32.0, 32.0, 32.0])
    assert np.array_equal(op.offdiag, [-16.0, -16.0])


def test_laplacian_neumann_kills_constants():
    op = assemble_laplacian(Grid1D(17, bc="neumann"), 3.0)
    assert np.max(np.abs(op.apply(np.ones(17)))) == 0.0


def test_laplacian_rejects_bad_coeff():
    with pytest.raises(ValueError):
        assemble_laplacian(Grid1D(8), 0.0)
    with pytest.raises(ValueError):
        assemble_laplacian(Grid1D(8), -1.0)


def test_laplacian_dirichlet_eigenvectors():
    grid = Grid1D(63)
    op = assemble_laplacian(grid, 1.0)
    for k in (1, 2, 17, 40, 63):
        s = dirichlet_sine(grid, k)
        got = op.apply(s)
        want = mu_k(grid, k) * s
        assert np.max(np.abs(got - want)) <= 1e-9 * mu_k(grid, k)


def test_operator_symmetry_exact():
    for _, _, bundle in all_preset_bundles(n=16):
        for name in ("mass", "diffusion", "damping", "stiffness", "coupling"):
            dense = getattr(bundle, name).to_dense()
            assert np.array_equal(dense, dense.T)


def test_monotonicity_audit():
    for _, _, bundle in all_preset_bundles(n=24):
        for name in ("mass", "diffusion", "damping", "stiffness", "coupling"):
            op = getattr(bundle, name)
            assert op.min_eigenvalue() >= -1e-12 * max(op.norm_bound(), 1.0)


def test_resolvent_trivial_cases():
    rng = np.random.default_rng(0)
    grid = Grid1D(12)
    lap = assemble_laplacian(grid, 1.0)
    assert np.array_equal(resolvent_solve(lap, 0.1, np.zeros(12)), np.zeros(12))
    rhs = rng.standard_normal(12)
    out = resolvent_solve(zero_operator(12), 0.1, rhs)
    assert np.max(np.abs(out - rhs)) <= 1e-14


def test_resolvent_eigenvector_closed_form():
    grid = Grid1D(31)
    lap = assemble_laplacian(grid, 1.0)
    h = 0.01
    for k in (1, 7, 31):
        s = dirichlet_sine(grid, k)
        x = resolvent_solve(lap, h, s)
        want = s / (1.0 + h * mu_k(grid, k))
        assert np.max(np.abs(x - want)) <= 1e-12
        dense = np.linalg.solve(np.eye(31) + h * lap.to_dense(), s)
        assert np.max(np.abs(x - dense)) <= 1e-12


def test_resolvent_roundtrip_property():
    rng = np.random.default_rng(1)
    for _, _, bundle in all_preset_bundles(n=20):
        for op in (bundle.diffusion, bundle.damping, bundle.stiffness, bundle.coupling):
            for h in (1e-3, 0.1, 2.0):
                for _ in range(10):
                    u = rng.standard_normal(20)
                    rhs = u + h * op.apply(u)
                    back = resolvent_solve(op, h, rhs)
                    assert np.max(np.abs(back - u)) <= 1e-12 * max(1.0, np.max(np.abs(u)))


def test_resolvent_dimension_mismatch():
    lap = assemble_laplacian(Grid1D(8), 1.0)
    with pytest.raises(ValueError):
        resolvent_solve(lap, 0.1, np.zeros(9))


def test_norms_zero():
    grid = Grid1D(10)
    z = np.zeros(10)
    assert h_norm(grid, z) == 0.0
    assert v_norm(grid, z) == 0.0


def test_vnorm_eigenvector_identity():
    grid = Grid1D(40)
    for k in (1, 5, 33):
        s = dirichlet_sine(grid, k)
        lhs = v_norm_sq(grid, s)
        rhs = h_inner(grid, s, s) * (1.0 + mu_k(grid, k))
        assert abs(lhs - rhs) <= 1e-10 * rhs


def test_vnorm_neumann_constant():
    grid = Grid1D(16, bc="neumann")
    u = np.ones(16)
    assert abs(v_norm(grid, u) - 1.0) <= 1e-14
    assert abs(h_norm(grid, u) - 1.0) <= 1e-14


def test_summation_by_parts():
    rng = np.random.default_rng(2)
    grid = Grid1D(25)
    lap = assemble_laplacian(grid, 1.0)
    for _ in range(50):
        u = rng.standard_normal(25)
        w = rng.standard_normal(25)
        lhs = h_inner(grid, lap.apply(u), w)
        rhs = gradient_inner(grid, u, w)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), abs(rhs)) * lap.norm_bound() ** 0.5


def test_bundle_p1_shares_operators():
    bundle = preset_bundle("P1", n=16, sigma=1.0, c=1.0, gamma=2.0)
    assert np.array_equal(bundle.coupling.diag, bundle.stiffness.diag)
    assert np.array_equal(bundle.coupling.diag, bundle.diffusion.diag)
    assert bundle.eta == 1.0
    assert bundle.damping.is_zero


def test_bundle_p4_identity_coupling():
    bundle = preset_bundle("P4", n=16)
    assert bundle.coupling.kind == "identity"
    assert np.array_equal(bundle.coupling.diag, np.ones(16))
    assert bundle.eta == 1.0


def test_bundle_p3_zero_epsilon_degenerates():
    bundle = preset_bundle("P3", n=16, epsilon=0.0)
    assert bundle.damping.is_zero


def test_preset_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ProblemPreset("P1", gamma=1.0)
    with pytest.raises(ValueError):
        ProblemPreset("P2", sigma=0.0)
    with pytest.raises(ValueError):
        ProblemPreset("P2", c=-1.0)
    with pytest.raises(ValueError):
        ProblemPreset("P3", epsilon=-0.5)
    with pytest.raises(ValueError):
        ProblemPreset("P6")


def test_bundle_structural_audits():
    for name, bc, bundle in all_preset_bundles(n=24):
        audit = audit_bundle(bundle, n_samples=100, seed=3)
        assert audit["cross_symmetry"] <= 1e-12, (name, bc)
        assert audit["positivity_damping_stiffness"] >= -1e-12, (name, bc)
        assert audit["positivity_coupling_diffusion"] >= -1e-12, (name, bc)
        assert audit["relative_bound_slack"] <= 1e-9, (name, bc)
        assert audit["mass_coercivity_slack"] >= -1e-12, (name, bc)


def test_coupling_bound_p1_matches_dense_svd():
    for sigma, c in ((1.0, 1.0), (2.0, 1.5)):
        bundle = preset_bundle("P1", n=16, sigma=sigma, c=c, gamma=2.0)
        n = 16
        dense = bundle.coupling.to_dense() @ np.linalg.inv(
            np.eye(n) + bundle.diffusion.to_dense())
        svd = np.linalg.svd(dense, compute_uv=False)[0]
        assert abs(bundle.coupling_bound - svd) <= 1e-8 * svd
        assert bundle.coupling_bound <= c * c / sigma + 1e-10


def test_coupling_bound_p4_below_one():
    bundle = preset_bundle("P4", n=16)
    assert 0.0 < bundle.coupling_bound <= 1.0


def test_coupling_bound_zero_coupling():
    grid = Grid1D(8)
    assert coupling_relative_bound(zero_operator(8), assemble_laplacian(grid, 1.0)) == 0.0


def test_solvability_threshold_formula():
    want = np.sqrt(0.625) - 0.25
    got = solvability_threshold(1.0, 0.0, 1.0, 1.0)
    assert abs(got - want) <= 1e-12


def test_estimate_structural_constants_roundtrip():
    bundle = preset_bundle("P1", n=16)
    bound, thr = estimate_structural_constants(bundle, lipschitz_const=0.0)
    assert abs(bound - bundle.coupling_bound) <= 1e-10
    assert abs(thr - bundle.h_threshold(0.0)) <= 1e-12
    assert thr > 0.0


def test_threshold_shrinks_with_lipschitz_constant():
    bundle = preset_bundle("P2", n=16)
    thresholds = [bundle.h_threshold(c) for c in (0.0, 0.5, 2.0, 10.0)]
    assert all(b < a for a, b in zip(thresholds, thresholds[1:]))
    assert thresholds[-1] > 0.0


def test_operators_are_immutable():
    op = assemble_laplacian(Grid1D(8), 1.0)
    with pytest.raises(ValueError):
        op.diag[0] = 5.0


def test_v_coercivity_constant_holds():
    from thermowave import v_coercivity_constant
    rng = np.random.default_rng(9)
    for _, _, bundle in all_preset_bundles(n=20):
        grid = bundle.grid
        for opname in ("diffusion", "stiffness", "damping", "coupling"):
            op = getattr(bundle, opname)
            for alpha in (0.5, 1.0, 3.0):
                w = v_coercivity_constant(op, grid, alpha)
                assert w > 0.0
                for _ in range(20):
                    u = rng.standard_normal(20)
                    lhs = h_inner(grid, op.apply(u), u) + alpha * h_inner(grid, u, u)
                    assert lhs >= w * v_norm_sq(grid, u) - 1e-10 * max(1.0, lhs)


def test_smoothed_beta_compatible_with_elliptic_operators():
    # pointwise monotone maps stay nonnegative against the second-difference
    # operators (M-matrix structure), smoothed or not; checked per preset
    from thermowave import cubic_nonlinearity
    nl = cubic_nonlinearity(1.0)
    rng = np.random.default_rng(12)
    for _, _, bundle in all_preset_bundles(n=20):
        grid = bundle.grid
        for lam in (1e-6, 1e-2, 1.0):
            for _ in range(25):
                w = rng.standard_normal(20) * 2
                smoothed = nl.yosida(lam, w)
                assert h_inner(grid, smoothed, bundle.stiffness.apply(w)) >= -1e-12
                assert h_inner(grid, smoothed, bundle.damping.apply(w)) >= -1e-12
                assert h_inner(grid, nl.beta(w), bundle.stiffness.apply(w)) >= -1e-12
