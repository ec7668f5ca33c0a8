"""Total-Lagrangian constant-strain membrane triangles.

Each 3-node triangle carries one central quadrature point.  Strain and
stress are exchanged with constitutive laws as vectors
``e = (E11, E22, 2 E12)`` / ``s = (S11, S22, S12)`` in the element's local
reference frame, and the internal force of an element is
``(h + eps) * Area * B^T s`` with the stress-resultant thickness factor
``h + eps`` matching the bounding-box volume used by the homogenized law
(the clearance cancels in the product).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTriangle

_EDGE_COEFF = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass
class MembraneMesh:
    nodes: np.ndarray  # (n, 3) reference coordinates, m
    triangles: np.ndarray  # (m, 3)
    thickness: float  # stress-resultant factor h + eps, m
    density: float  # kg/m^3
    laws: object  # shared law with stress_batch, or list of per-element laws
    fixed_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    contact_pairs: list = field(default_factory=list)
    rayleigh_alpha: float = 0.0

    @property
    def n_dofs(self):
        return 3 * self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    def law_list(self):
        if isinstance(self.laws, (list, tuple)):
            return list(self.laws)
        return None


@dataclass
class MembraneCache:
    dm_inv: np.ndarray  # (m, 2, 2)
    area: np.ndarray  # (m,)
    frame: np.ndarray  # (m, 3, 2) local in-plane basis vectors as columns
    dofmap: np.ndarray  # (m, 9)


def membrane_cache(mesh):
    cached = getattr(mesh, "_membrane_cache", None)
    if cached is not None:
        return cached
    x = mesh.nodes
    t = mesh.triangles
    t1 = x[t[:, 1]] - x[t[:, 0]]
    t2 = x[t[:, 2]] - x[t[:, 0]]
    cross = np.cross(t1, t2)
    area = 0.5 * np.linalg.norm(cross, axis=1)
    if np.any(area <= 1e-300):
        raise DegenerateTriangle("membrane triangle with near-zero area")
    e1 = t1 / np.linalg.norm(t1, axis=1)[:, None]
    t2_perp = t2 - (np.sum(t2 * e1, axis=1))[:, None] * e1
    e2 = t2_perp / np.linalg.norm(t2_perp, axis=1)[:, None]
    dm = np.zeros((len(t), 2, 2))
    dm[:, 0, 0] = np.sum(t1 * e1, axis=1)
    dm[:, 0, 1] = np.sum(t2 * e1, axis=1)
    dm[:, 1, 1] = np.sum(t2 * e2, axis=1)
    dm_inv = np.linalg.inv(dm)
    frame = np.stack([e1, e2], axis=2)
    dofmap = (3 * t[:, :, None] + np.arange(3)).reshape(-1, 9)
    cached = MembraneCache(dm_inv=dm_inv, area=area, frame=frame, dofmap=dofmap)
    mesh._membrane_cache = cached
    return cached


def membrane_strains(mesh, u):
    """Green-Lagrange strain vectors (E11, E22, 2E12) and deformation data.

    Returns (e, f, gamma) with ``f`` the (m, 3, 2) deformation gradient in
    the local reference frame and ``gamma`` the (m, 3, 2) nodal coefficient
    array used by the strain operator.
    """
    cache = membrane_cache(mesh)
    x = mesh.nodes + u.reshape(-1, 3)
    t = mesh.triangles
    d = np.stack([x[t[:, 1]] - x[t[:, 0]], x[t[:, 2]] - x[t[:, 0]]], axis=2)
    f = d @ cache.dm_inv  # (m, 3, 2): columns = current images of the frame
    c = f.transpose(0, 2, 1) @ f  # F^T F, (m, 2, 2)
    e = np.empty((mesh.n_elements, 3))
    e[:, 0] = 0.5 * (c[:, 0, 0] - 1.0)
    e[:, 1] = 0.5 * (c[:, 1, 1] - 1.0)
    e[:, 2] = c[:, 0, 1]  # 2 E12
    gamma = np.einsum("nj,ejb->enb", _EDGE_COEFF, cache.dm_inv)
    return e, f, gamma


def element_stresses(mesh, e):
    """Stress vectors from the assigned law(s), (m, 3)."""
    laws = mesh.law_list()
    if laws is None:
        return np.asarray(mesh.laws.stress_batch(e))
    s = np.empty_like(e)
    for i, law in enumerate(laws):
        s[i] = law.stress(e[i])
    return s


def strain_operator(f, gamma):
    """B such that delta e = B delta u_e, shape (m, 3, 9)."""
    m = f.shape[0]
    b = np.empty((m, 3, 9))
    for n in range(3):
        cols = slice(3 * n, 3 * n + 3)
        b[:, 0, cols] = gamma[:, n, 0, None] * f[:, :, 0]
        b[:, 1, cols] = gamma[:, n, 1, None] * f[:, :, 1]
        b[:, 2, cols] = (gamma[:, n, 0, None] * f[:, :, 1]
                         + gamma[:, n, 1, None] * f[:, :, 0])
    return b


def membrane_internal_force(mesh, u, return_stress=False):
    """Assembled internal force; one constitutive evaluation per element."""
    cache = membrane_cache(mesh)
    e, f, gamma = membrane_strains(mesh, u)
    s = element_stresses(mesh, e)
    b = strain_operator(f, gamma)
    factor = mesh.thickness * cache.area
    f_e = factor[:, None] * np.einsum("eri,er->ei", b, s)
    f_int = np.zeros(mesh.n_dofs)
    np.add.at(f_int, cache.dofmap.reshape(-1), f_e.reshape(-1))
    if return_stress:
        return f_int, e, s
    return f_int


def lumped_mass(mesh):
    """Row-sum lumped mass vector; total mass is conserved exactly."""
    cache = membrane_cache(mesh)
    m_node = mesh.density * mesh.thickness * cache.area / 3.0
    mass = np.zeros(mesh.n_dofs)
    for n in range(3):
        dofs = 3 * mesh.triangles[:, n]
        for k in range(3):
            np.add.at(mass, dofs + k, m_node)
    return mass


def von_mises(s):
    """Plane-stress von Mises measure of (S11, S22, S12) rows."""
    s = np.atleast_2d(s)
    return np.sqrt(
        s[:, 0] ** 2 - s[:, 0] * s[:, 1] + s[:, 1] ** 2 + 3.0 * s[:, 2] ** 2
    )


def strain_energy(mesh, u):
    """Total strain energy; needs laws exposing ``strain_energy(e)``."""
    cache = membrane_cache(mesh)
    e, _, _ = membrane_strains(mesh, u)
    laws = mesh.law_list()
    factor = mesh.thickness * cache.area
    if laws is None:
        dens = np.array([mesh.laws.strain_energy(row) for row in e])
    else:
        dens = np.array([law.strain_energy(row) for law, row in zip(laws, e)])
    return float(np.sum(factor * dens))


def rect_patch(lx, ly, nx, ny, thickness, density, laws, z=0.0):
    """Regular triangulated rectangle in the z = const plane."""
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    nodes = np.array([(x, y, z) for x in xs for y in ys])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return MembraneMesh(
        nodes=nodes,
        triangles=np.array(tris, dtype=np.int64),
        thickness=thickness,
        density=density,
        laws=laws,
    )
