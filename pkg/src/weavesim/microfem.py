"""Total-Lagrangian St. Venant-Kirchhoff hexahedral statics with contact.

8-node hexahedra, 2x2x2 Gauss quadrature.  The prescribed (constrained)
degrees of freedom drive the problem; there is no external load.  Newton
iterations solve the linearized complementarity subproblem

    K du + G lam = -f_int,  G^T du >= -g,  lam <= 0,  lam^T (G^T du + g) = 0

through the shared active-set QP, so unilateral yarn-yarn contact is
handled implicitly inside every Newton step.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .contact import active_set_qp, gap_and_jacobian
from .errors import ElementInversion, NoConvergence

# natural coordinates of the 8 nodes and the 2x2x2 Gauss points
_XI_NODES = np.array(
    [
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ],
    dtype=float,
)
_G = 1.0 / np.sqrt(3.0)
_XI_GAUSS = _XI_NODES * _G  # same corner layout scaled inward


def _shape_gradients_natural():
    """dN/dxi at every Gauss point, shape (8 gp, 8 nodes, 3)."""
    grads = np.empty((8, 8, 3))
    for g, xi in enumerate(_XI_GAUSS):
        for n, xn in enumerate(_XI_NODES):
            gx = 0.125 * xn[0] * (1 + xi[1] * xn[1]) * (1 + xi[2] * xn[2])
            gy = 0.125 * xn[1] * (1 + xi[0] * xn[0]) * (1 + xi[2] * xn[2])
            gz = 0.125 * xn[2] * (1 + xi[0] * xn[0]) * (1 + xi[1] * xn[1])
            grads[g, n] = (gx, gy, gz)
    return grads


_DN_NATURAL = _shape_gradients_natural()


def reference_gradients(nodes, hexes):
    """Shape gradients in reference coordinates and weighted Jacobians.

    Returns
    -------
    dndx : (n_el, 8 gp, 8 nodes, 3) ndarray
    wdet : (n_el, 8 gp) ndarray
        Quadrature weight (unity) times det(J) per Gauss point.
    """
    coords = nodes[hexes]  # (e, 8, 3)
    jac = np.einsum("gna,enk->egak", _DN_NATURAL, coords)  # M[a,k] = dX_k/dxi_a
    det = np.linalg.det(jac)
    if np.any(det <= 0.0):
        raise ValueError("reference element with non-positive Jacobian")
    jinv = np.linalg.inv(jac)
    # dxi_a/dX_k = (M^-1)[k, a], hence contract over jinv's second axis
    dndx = np.einsum("gna,egka->egnk", _DN_NATURAL, jinv)
    return dndx, det


@dataclass
class AssemblyCache:
    dofmap: np.ndarray  # (n_el, 24)
    dndx: np.ndarray
    wdet: np.ndarray
    lam: np.ndarray  # per-element Lame lambda
    mu: np.ndarray
    free: np.ndarray
    constrained: np.ndarray


def assembly_cache(mesh):
    cached = getattr(mesh, "_assembly_cache", None)
    if cached is None:
        dndx, wdet = reference_gradients(mesh.nodes, mesh.hexes)
        dofmap = (3 * mesh.hexes[:, :, None] + np.arange(3)).reshape(-1, 24)
        lam, mu = mesh.material_params()
        cached = AssemblyCache(
            dofmap=dofmap,
            dndx=dndx,
            wdet=wdet,
            lam=lam,
            mu=mu,
            free=mesh.free_dofs(),
            constrained=mesh.constrained_dofs(),
        )
        mesh._assembly_cache = cached
    return cached


def _element_state(mesh, u_full, elems):
    """Displacement gradient, strain and stress batches for a subset."""
    cache = assembly_cache(mesh)
    dofmap = cache.dofmap[elems]
    dndx = cache.dndx[elems]
    u_e = u_full[dofmap].reshape(len(elems), 8, 3)
    hgrad = np.einsum("enk,egnl->egkl", u_e, dndx)
    f = hgrad + np.eye(3)
    det_f = np.linalg.det(f)
    if np.any(det_f <= 0.0):
        raise ElementInversion(
            f"det(F) = {det_f.min():.3e} <= 0 at a quadrature point"
        )
    e = 0.5 * (hgrad + np.swapaxes(hgrad, 2, 3)
               + np.einsum("egki,egkj->egij", hgrad, hgrad))
    tr = np.trace(e, axis1=2, axis2=3)
    lam = cache.lam[elems][:, None]
    mu = cache.mu[elems][:, None]
    s = (lam * tr)[..., None, None] * np.eye(3) + 2.0 * mu[..., None, None] * e
    return cache, dndx, f, e, s


def element_forces(mesh, u_full, elems=None):
    """Per-element internal force vectors, shape (n_sel, 24)."""
    if elems is None:
        elems = np.arange(mesh.n_elements)
    elems = np.asarray(elems)
    cache, dndx, f, _, s = _element_state(mesh, u_full, elems)
    p = np.einsum("egik,egkj->egij", f, s)
    wdet = cache.wdet[elems]
    f_e = np.einsum("eg,egkl,egnl->enk", wdet, p, dndx)
    return f_e.reshape(len(elems), 24)


def element_stiffness(mesh, u_full, elems=None):
    """Consistent per-element tangent stiffness, shape (n_sel, 24, 24)."""
    if elems is None:
        elems = np.arange(mesh.n_elements)
    elems = np.asarray(elems)
    cache, dndx, f, _, s = _element_state(mesh, u_full, elems)
    wdet = cache.wdet[elems]
    n_sel = len(elems)

    # engineering-Voigt B operator: rows (11, 22, 33, g12, g13, g23)
    b = np.zeros((n_sel, 8, 6, 24))
    cols = np.arange(24).reshape(8, 3)
    for n in range(8):
        for k in range(3):
            col = cols[n, k]
            b[:, :, 0, col] = f[:, :, k, 0] * dndx[:, :, n, 0]
            b[:, :, 1, col] = f[:, :, k, 1] * dndx[:, :, n, 1]
            b[:, :, 2, col] = f[:, :, k, 2] * dndx[:, :, n, 2]
            b[:, :, 3, col] = (f[:, :, k, 0] * dndx[:, :, n, 1]
                               + f[:, :, k, 1] * dndx[:, :, n, 0])
            b[:, :, 4, col] = (f[:, :, k, 0] * dndx[:, :, n, 2]
                               + f[:, :, k, 2] * dndx[:, :, n, 0])
            b[:, :, 5, col] = (f[:, :, k, 1] * dndx[:, :, n, 2]
                               + f[:, :, k, 2] * dndx[:, :, n, 1])

    lam = cache.lam[elems]
    mu = cache.mu[elems]
    c = np.zeros((n_sel, 6, 6))
    c[:, :3, :3] = lam[:, None, None]
    idx = np.arange(3)
    c[:, idx, idx] += 2.0 * mu[:, None]
    c[:, idx + 3, idx + 3] = mu[:, None]

    k_mat = np.einsum("eg,egai,eab,egbj->eij", wdet, b, c, b, optimize=True)
    geo_small = np.einsum("eg,egna,egab,egmb->enm", wdet, dndx, s, dndx,
                          optimize=True)
    k_geo = np.einsum("enm,kl->enkml", geo_small, np.eye(3)).reshape(
        n_sel, 24, 24
    )
    return k_mat + k_geo


def assemble(mesh, u_full, with_stiffness=True):
    """Internal force over all dofs and (optionally) the sparse tangent.

    The returned force vector covers constrained and unconstrained dofs:
    the constrained rows are the ingredients of the reaction forces.  The
    tangent is symmetric for this hyperelastic law.
    """
    cache = assembly_cache(mesh)
    f_e = element_forces(mesh, u_full)
    f_int = np.zeros(mesh.n_dofs)
    np.add.at(f_int, cache.dofmap.reshape(-1), f_e.reshape(-1))
    if not with_stiffness:
        return f_int, None
    k_e = element_stiffness(mesh, u_full)
    rows = np.repeat(cache.dofmap, 24, axis=1).reshape(-1)
    cols = np.tile(cache.dofmap, (1, 24)).reshape(-1)
    k = scipy.sparse.coo_matrix(
        (k_e.reshape(-1), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)
    ).tocsc()
    return f_int, k


def prescribe_affine_boundary(mesh, u0):
    """Constrained-dof displacements for the affine boundary map x = U0 X."""
    u0 = np.asarray(u0, dtype=float)
    coords = mesh.nodes[mesh.constrained_nodes]
    disp = coords @ u0.T - coords
    return disp.reshape(-1)


@dataclass
class RveState:
    """Converged (or partial) microscale solution."""

    u_free: np.ndarray
    u_constrained: np.ndarray
    lam: np.ndarray
    newton_iters: int = 0
    converged: bool = False
    residual: float = np.inf
    residual_history: list = None

    def full_vector(self, mesh):
        u = np.zeros(mesh.n_dofs)
        cache = assembly_cache(mesh)
        u[cache.free] = self.u_free
        u[cache.constrained] = self.u_constrained
        return u


@dataclass
class SolverSettings:
    tol_r: float = 1e-8
    max_newton: int = 30
    max_active_set: int = 50
    max_halvings: int = 4
    tol_g_scale: float = 1e-10  # times mesh thickness
    tol_c_scale: float = 1e-12


def contact_gap(mesh, u_full):
    """Gap vector and constraint Jacobian transpose on the full dof set."""
    x = mesh.nodes + u_full.reshape(-1, 3)
    return gap_and_jacobian(x, mesh.contact_pairs, mesh.n_dofs)


def solve_static(mesh, prescribed, init=None, settings=None):
    """Static equilibrium under prescribed boundary displacements.

    Parameters
    ----------
    mesh : RveMesh
    prescribed : (n_constrained_dofs,) ndarray
        Values for the constrained dofs, ordered like
        ``mesh.constrained_dofs()``.
    init : RveState, optional
        Warm start; its free-dof values seed the Newton iteration.

    Returns
    -------
    RveState

    Raises
    ------
    NoConvergence, ActiveSetCycling, ElementInversion
    """
    settings = settings or SolverSettings()
    cache = assembly_cache(mesh)
    free, cons = cache.free, cache.constrained
    prescribed = np.asarray(prescribed, dtype=float)
    if prescribed.shape != cons.shape:
        raise ValueError("prescribed vector does not match constrained dofs")

    u_full = np.zeros(mesh.n_dofs)
    if init is not None:
        u_full[free] = init.u_free
    u_full[cons] = prescribed

    n_pairs = len(mesh.contact_pairs)
    lam = np.zeros(n_pairs)
    tol_g = settings.tol_g_scale * mesh.bbox.h
    best_res = np.inf
    history = []

    f_int, _ = assemble(mesh, u_full, with_stiffness=False)
    for it in range(settings.max_newton + 1):
        if n_pairs:
            g, G_full = contact_gap(mesh, u_full)
            G = G_full[free]
            contact_force = G @ lam
        else:
            g = np.zeros(0)
            G = None
            contact_force = 0.0

        r = f_int[free] + contact_force
        res = np.linalg.norm(r, ord=np.inf) if r.size else 0.0
        scale = max(
            np.linalg.norm(f_int, ord=np.inf),
            np.linalg.norm(np.atleast_1d(contact_force), ord=np.inf),
        )
        feasible = (not n_pairs) or (
            g.min() >= -tol_g
            and lam.max() <= 0.0 + 1e-300
            and abs(lam @ g)
            <= max(
                settings.tol_c_scale
                * np.abs(lam).sum()
                * (np.abs(g).max() if g.size else 0.0),
                1e-30,
            )
        )
        history.append(res)
        if res <= settings.tol_r * scale and feasible:
            return RveState(
                u_free=u_full[free].copy(),
                u_constrained=prescribed.copy(),
                lam=lam.copy(),
                newton_iters=it,
                converged=True,
                residual=res,
                residual_history=history,
            )
        if it == settings.max_newton:
            break
        best_res = min(best_res, res)

        _, k = assemble(mesh, u_full)
        k_ff = k[free][:, free]
        lu = scipy.sparse.linalg.splu(k_ff.tocsc())

        def apply_kinv(b):
            return lu.solve(np.asarray(b, dtype=float))

        du, lam_new = active_set_qp(
            apply_kinv, G, f_int[free], g if n_pairs else np.zeros(0),
            max_iter=settings.max_active_set,
        )

        # full Newton step; halve only to escape element inversion
        step = 1.0
        for _ in range(settings.max_halvings + 1):
            u_try = u_full.copy()
            u_try[free] += step * du
            try:
                f_try, _ = assemble(mesh, u_try, with_stiffness=False)
                break
            except ElementInversion:
                step *= 0.5
        else:
            raise ElementInversion("could not avoid element inversion")
        u_full = u_try
        f_int = f_try
        lam = lam_new if step == 1.0 else step * lam_new

    raise NoConvergence(
        f"Newton did not converge in {settings.max_newton} iterations "
        f"(residual {best_res:.3e})"
    )


def reaction_forces(mesh, state):
    """Total force on the constrained dofs, as an (n_c, 3) array.

    Computed by the adjacent-volume route: the assembled internal force
    restricted to the constrained rows, plus the contact contribution
    (identically zero when the contact-clearance invariant holds).
    """
    cache = assembly_cache(mesh)
    u_full = state.full_vector(mesh)
    f_int, _ = assemble(mesh, u_full, with_stiffness=False)
    reactions = f_int[cache.constrained]
    if len(mesh.contact_pairs):
        _, G_full = contact_gap(mesh, u_full)
        reactions = reactions + G_full[cache.constrained] @ state.lam
    return reactions.reshape(-1, 3)
