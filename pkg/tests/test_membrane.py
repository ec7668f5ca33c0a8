import numpy as np
import pytest

from weavesim.errors import DegenerateTriangle
from weavesim.materials import StVkPlaneStressAnalytical
from weavesim.membrane import (
    MembraneMesh,
    lumped_mass,
    membrane_cache,
    membrane_internal_force,
    membrane_strains,
    rect_patch,
    strain_operator,
    von_mises,
)

LAW = StVkPlaneStressAnalytical(2.0e9, 1.5e9)


def single_triangle(law=LAW, thickness=1e-3, density=1000.0):
    nodes = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    tris = np.array([[0, 1, 2]])
    return MembraneMesh(nodes, tris, thickness, density, law)


class TestStrains:
    def test_zero_displacement(self):
        mesh = single_triangle()
        e, f, _ = membrane_strains(mesh, np.zeros(9))
        assert e == pytest.approx(np.zeros((1, 3)), abs=1e-15)
        assert f[0].T @ f[0] == pytest.approx(np.eye(2), abs=1e-15)

    def test_uniform_stretch(self):
        mesh = single_triangle()
        # x -> 1.1 x: node 1 moves by (0.1, 0, 0)
        u = np.zeros(9)
        u[3] = 0.1
        e, _, _ = membrane_strains(mesh, u)
        assert e[0, 0] == pytest.approx(0.5 * (1.1**2 - 1.0))
        assert e[0, 1] == pytest.approx(0.0, abs=1e-15)
        assert e[0, 2] == pytest.approx(0.0, abs=1e-15)

    def test_out_of_plane_rotation_is_strain_free(self):
        mesh = single_triangle()
        angle = 0.7
        q = np.array(
            [
                [1, 0, 0],
                [0, np.cos(angle), -np.sin(angle)],
                [0, np.sin(angle), np.cos(angle)],
            ]
        )
        u = (mesh.nodes @ q.T - mesh.nodes).reshape(-1)
        e, _, _ = membrane_strains(mesh, u)
        assert np.abs(e).max() <= 1e-14


class TestInternalForce:
    def test_zero_state(self):
        mesh = single_triangle()
        assert np.all(membrane_internal_force(mesh, np.zeros(9)) == 0.0)

    def test_hand_assembled_uniform_stretch(self):
        mesh = single_triangle()
        u = np.zeros(9)
        u[3] = 0.1  # stretch along x
        e, f, gamma = membrane_strains(mesh, u)
        s = LAW.stress(e[0])
        b = strain_operator(f, gamma)[0]
        area = membrane_cache(mesh).area[0]
        expected = mesh.thickness * area * b.T @ s
        got = membrane_internal_force(mesh, u)
        assert got == pytest.approx(expected, abs=1e-10 * np.abs(expected).max())

    def test_rigid_rotation_gives_zero_force(self):
        mesh = rect_patch(1.0, 1.0, 2, 2, 1e-3, 1000.0, LAW)
        rng = np.random.default_rng(0)
        q, r = np.linalg.qr(rng.standard_normal((3, 3)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        u = (mesh.nodes @ q.T - mesh.nodes).reshape(-1)
        f = membrane_internal_force(mesh, u)
        stiffness_scale = LAW.lame_mu * mesh.thickness
        assert np.linalg.norm(f, np.inf) <= 1e-9 * stiffness_scale

    def test_force_is_gradient_of_energy(self):
        from weavesim.membrane import strain_energy

        mesh = rect_patch(1.0, 0.8, 2, 2, 1e-3, 1000.0, LAW)
        rng = np.random.default_rng(1)
        u = 1e-3 * rng.standard_normal(mesh.n_dofs)
        f = membrane_internal_force(mesh, u)
        step = 1e-7
        for dof in rng.choice(mesh.n_dofs, 8, replace=False):
            up, um = u.copy(), u.copy()
            up[dof] += step
            um[dof] -= step
            fd = (strain_energy(mesh, up) - strain_energy(mesh, um)) / (2 * step)
            assert f[dof] == pytest.approx(fd, rel=2e-5, abs=1e-8)


class TestMass:
    def test_unit_equilateral_share(self):
        nodes = np.array(
            [[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]], dtype=float
        )
        mesh = MembraneMesh(nodes, np.array([[0, 1, 2]]), 2e-3, 1154.25, LAW)
        m = lumped_mass(mesh)
        area = np.sqrt(3) / 4
        per_node = 1154.25 * 2e-3 * area / 3
        assert m == pytest.approx(np.full(9, per_node))

    def test_two_triangle_square_total(self):
        mesh = rect_patch(1.0, 1.0, 1, 1, 1e-3, 500.0, LAW)
        m = lumped_mass(mesh)
        assert m.reshape(-1, 3)[:, 0].sum() == pytest.approx(500.0 * 1e-3 * 1.0)

    def test_random_mesh_mass_conservation(self):
        mesh = rect_patch(2.0, 1.0, 5, 3, 7.6e-5, 1154.25, LAW)
        rng = np.random.default_rng(2)
        mesh.nodes[:, :2] += 0.01 * rng.standard_normal((mesh.nodes.shape[0], 2))
        m = lumped_mass(mesh)
        total_area = membrane_cache(mesh).area.sum()
        expected = 1154.25 * 7.6e-5 * total_area
        assert m.reshape(-1, 3)[:, 0].sum() == pytest.approx(expected, rel=1e-12)


class TestMisc:
    def test_degenerate_triangle_raises(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
        mesh = MembraneMesh(nodes, np.array([[0, 1, 2]]), 1e-3, 1.0, LAW)
        with pytest.raises(DegenerateTriangle):
            membrane_cache(mesh)

    def test_von_mises(self):
        assert von_mises(np.array([[1.0, 0.0, 0.0]]))[0] == pytest.approx(1.0)
        assert von_mises(np.array([[0.0, 0.0, 1.0]]))[0] == pytest.approx(np.sqrt(3))
