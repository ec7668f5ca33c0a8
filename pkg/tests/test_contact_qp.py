import numpy as np
import pytest

from weavesim.contact import (
    FacetContact,
    PlaneContact,
    active_set_qp,
    gap_and_jacobian,
    kkt_residuals,
    solve_contact_qp,
)
from weavesim.errors import DegenerateFacet, IndefiniteSchur


class TestSolveContactQp:
    def test_no_violation_returns_unconstrained_minimum(self):
        m = np.array([2.0, 3.0])
        G = np.array([[1.0], [0.0]])
        f = np.array([-2.0, 6.0])
        g = np.array([10.0])  # far from active
        x, lam = solve_contact_qp(m, G, f, g)
        assert x == pytest.approx(-f / m)
        assert lam == pytest.approx([0.0])

    def test_single_constraint_against_direct_kkt(self):
        # one node, one constraint: G^T = [1], M = [1], f = [1], g = [-1]
        m = np.array([1.0])
        G = np.array([[1.0]])
        f = np.array([1.0])
        g = np.array([-1.0])
        x, lam = solve_contact_qp(m, G, f, g)
        # direct 2x2 KKT solve of [M G; G^T 0][x; lam] = [-f; -g]
        kkt = np.array([[1.0, 1.0], [1.0, 0.0]])
        ref = np.linalg.solve(kkt, np.array([-1.0, 1.0]))
        assert x == pytest.approx(ref[:1], abs=1e-14)
        assert lam == pytest.approx(ref[1:], abs=1e-14)
        assert lam[0] == pytest.approx(-2.0)
        resids = kkt_residuals(lambda v: m * v, G, f, g, x, lam)
        assert max(resids) <= 1e-10

    def test_mixed_active_inactive(self):
        rng = np.random.default_rng(0)
        n, nc = 8, 5
        m = rng.uniform(0.5, 2.0, n)
        G = rng.standard_normal((n, nc))
        f = rng.standard_normal(n)
        g = rng.uniform(-0.5, 0.5, nc)
        x, lam = solve_contact_qp(m, G, f, g)
        stat, feas, dual, compl = kkt_residuals(lambda v: m * v, G, f, g, x, lam)
        assert stat <= 1e-10
        assert feas <= 1e-10
        assert dual <= 1e-12
        assert compl <= 1e-10

    def test_rank_deficient_needs_penalty(self):
        m = np.ones(2)
        G = np.array([[1.0, 1.0], [0.0, 0.0]])  # duplicated constraint
        f = np.array([1.0, 0.0])
        g = np.array([-1.0, -1.0])
        with pytest.raises(IndefiniteSchur):
            solve_contact_qp(m, G, f, g)

    def test_rank_deficient_with_penalty(self):
        mu = 1e6
        m = np.ones(2)
        G = np.array([[1.0, 1.0], [0.0, 0.0]])
        f = np.array([1.0, 0.0])
        g = np.array([-1.0, -1.0])
        x, lam = solve_contact_qp(m, G, f, g, mu_penalty=mu)
        assert np.all(np.isfinite(lam))
        stat, feas, dual, compl = kkt_residuals(lambda v: m * v, G, f, g, x, lam)
        scale = max(1.0, np.abs(lam).max())
        assert stat <= 1e-9
        assert feas <= 10.0 * scale / mu
        assert compl <= 10.0 * scale / mu

    def test_scaling_invariance(self):
        # scaling f and g jointly by c scales lam by c, same active set
        rng = np.random.default_rng(1)
        m = rng.uniform(0.5, 2.0, 6)
        G = rng.standard_normal((6, 4))
        f = rng.standard_normal(6)
        g = rng.uniform(-0.3, 0.3, 4)
        x1, lam1 = solve_contact_qp(m, G, f, g)
        c = 7.5
        x2, lam2 = solve_contact_qp(m, G, c * f, c * g)
        assert lam2 == pytest.approx(c * lam1, rel=1e-12, abs=1e-12)
        assert np.array_equal(lam1 < 0, lam2 < 0)

    def test_exact_degenerate_pair_is_inactive(self):
        # lam = 0 and g = 0 exactly: classified inactive, x unconstrained
        m = np.ones(1)
        G = np.array([[1.0]])
        f = np.array([-1.0])  # pushes x positive, constraint satisfied
        g = np.array([0.0])
        x, lam = solve_contact_qp(m, G, f, g)
        assert x == pytest.approx([1.0])
        assert lam == pytest.approx([0.0])

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(ValueError):
            solve_contact_qp(np.array([0.0]), None, np.array([1.0]), np.zeros(0))


class TestActiveSetQpGeneral:
    def test_spd_matrix_operator(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((5, 5))
        A = A @ A.T + 5.0 * np.eye(5)
        G = rng.standard_normal((5, 3))
        f = rng.standard_normal(5)
        g = rng.uniform(-1.0, 0.5, 3)
        inv = np.linalg.inv(A)
        x, lam = active_set_qp(lambda b: inv @ b, G, f, g)
        stat, feas, dual, compl = kkt_residuals(lambda v: A @ v, G, f, g, x, lam)
        assert max(stat, feas, dual, compl) <= 1e-9


class TestGapAndJacobian:
    def test_separated_bodies_positive_gap(self):
        x = np.array([[0.0, 0.0, 1.0], [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        pairs = [FacetContact(0, (1, 2, 3, 4))]
        g, G = gap_and_jacobian(x, pairs, 15)
        assert g[0] == pytest.approx(1.0)

    def test_node_on_facet_plane(self):
        x = np.array([[0.5, 0.5, 0.0], [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        g, _ = gap_and_jacobian(x, [FacetContact(0, (1, 2, 3, 4))], 15)
        assert g[0] == pytest.approx(0.0, abs=1e-15)

    def test_plane_contact(self):
        x = np.array([[0.2, -0.3, 0.7]])
        g, G = gap_and_jacobian(x, [PlaneContact(0, (0, 0, 1), 0.5)], 3)
        assert g[0] == pytest.approx(0.2)
        assert G[:, 0] == pytest.approx([0, 0, 1])

    @pytest.mark.parametrize("facet_size", [3, 4])
    def test_jacobian_matches_finite_differences(self, facet_size):
        rng = np.random.default_rng(3)
        n_nodes = 1 + facet_size
        x0 = np.zeros((n_nodes, 3))
        x0[0] = [0.4, 0.45, 0.8]
        if facet_size == 4:
            x0[1:] = [[0, 0, 0], [1, 0, 0.1], [1.1, 1, 0], [0, 1.05, -0.05]]
        else:
            x0[1:] = [[0, 0, 0], [1, 0, 0.1], [0.4, 1, 0]]
        x0[1:] += 0.05 * rng.standard_normal((facet_size, 3))
        pairs = [FacetContact(0, tuple(range(1, n_nodes)))]
        n_dofs = 3 * n_nodes
        _, G = gap_and_jacobian(x0, pairs, n_dofs)
        step = 1e-7
        for dof in range(n_dofs):
            xp = x0.copy().reshape(-1)
            xm = xp.copy()
            xp[dof] += step
            xm[dof] -= step
            gp, _ = gap_and_jacobian(xp.reshape(-1, 3), pairs, n_dofs)
            gm, _ = gap_and_jacobian(xm.reshape(-1, 3), pairs, n_dofs)
            fd = (gp[0] - gm[0]) / (2 * step)
            assert G[dof, 0] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_degenerate_facet_raises(self):
        x = np.zeros((5, 3))
        x[0] = [0, 0, 1]
        with pytest.raises(DegenerateFacet):
            gap_and_jacobian(x, [FacetContact(0, (1, 2, 3, 4))], 15)
