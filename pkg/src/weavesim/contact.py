"""Unilateral contact kinematics and the active-set quadratic program.

Sign conventions (identical at both scales): the gap ``g`` is nonnegative
for admissible states, Lagrange multipliers satisfy ``lam <= 0`` and enter
the balance equation as ``A x + G lam = -f``.  The QP solved per linearized
subproblem is

    A x + G lam = -f,   G^T x >= -g,   lam <= 0,   lam^T (G^T x + g) = 0

with ``A`` the (diagonal) mass matrix at the macroscale or the tangent
stiffness at the microscale.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ActiveSetCycling, DegenerateFacet, IndefiniteSchur

_FACET_AREA_TOL = 1e-14


@dataclass(frozen=True)
class FacetContact:
    """Node-to-facet pair; the facet normal (right-hand rule over the node
    ordering) must point toward the side the node approaches from."""

    node: int
    facet: tuple


@dataclass(frozen=True)
class PlaneContact:
    """Node against a fixed half-space: gap = normal . x - offset."""

    node: int
    normal: tuple
    offset: float


def _skew(v):
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def _facet_frame(coords):
    """Normal direction vector, unit normal and centroid of a 3/4-node facet."""
    if len(coords) == 4:
        c = np.cross(coords[2] - coords[0], coords[3] - coords[1])
    else:
        c = np.cross(coords[1] - coords[0], coords[2] - coords[0])
    norm_c = np.linalg.norm(c)
    if norm_c < _FACET_AREA_TOL:
        raise DegenerateFacet("contact facet has near-zero area")
    return c, c / norm_c, np.mean(coords, axis=0)


def gap_and_jacobian(x, pairs, n_dofs):
    """Signed normal distances and constraint Jacobian for contact pairs.

    Parameters
    ----------
    x : (n_nodes, 3) ndarray
        Current nodal coordinates.
    pairs : sequence of FacetContact / PlaneContact
    n_dofs : int
        Length of the displacement vector the Jacobian acts on (3 per node).

    Returns
    -------
    g : (n_pairs,) ndarray
        Signed gaps, positive when separated.
    G : (n_dofs, n_pairs) ndarray
        Transpose of dg/du, including the rotation of the facet normal.
    """
    n_pairs = len(pairs)
    g = np.zeros(n_pairs)
    G = np.zeros((n_dofs, n_pairs))
    for k, pair in enumerate(pairs):
        if isinstance(pair, PlaneContact):
            n = np.asarray(pair.normal, dtype=float)
            n = n / np.linalg.norm(n)
            g[k] = n @ x[pair.node] - pair.offset
            G[3 * pair.node : 3 * pair.node + 3, k] = n
            continue
        facet = pair.facet
        coords = x[list(facet)]
        c, n, centroid = _facet_frame(coords)
        rel = x[pair.node] - centroid
        g[k] = n @ rel
        G[3 * pair.node : 3 * pair.node + 3, k] = n
        # dn/dv = (I - n n^T)/|c| dc/dv; the centroid shift adds -n/m per node
        proj_rel = (rel - n * (n @ rel)) / np.linalg.norm(c)
        m = len(facet)
        if m == 4:
            d1 = coords[2] - coords[0]
            d2 = coords[3] - coords[1]
            dc = (_skew(d2), -_skew(d1), -_skew(d2), _skew(d1))
        else:
            a = coords[1] - coords[0]
            b = coords[2] - coords[0]
            dc = (_skew(b) - _skew(a), -_skew(b), _skew(a))
        for local, node_id in enumerate(facet):
            grad = -n / m + dc[local].T @ proj_rel
            G[3 * node_id : 3 * node_id + 3, k] += grad
    return g, G


def active_set_qp(
    apply_ainv,
    G,
    f,
    g,
    mu_penalty=None,
    max_iter=50,
):
    """Primal-dual active-set solve of the contact QP.

    Constraints are classified active when either the multiplier pushes
    (``lam < 0``) or the linearized gap is violated (``G^T x + g < 0``); a
    constraint sitting exactly at ``lam = 0, g = 0`` is inactive, which keeps
    degenerate starts deterministic.  Each pass solves the equality-
    constrained saddle system through the dense Schur complement
    ``G_A^T A^{-1} G_A`` (Cholesky).  A rank-deficient active block is
    regularized with ``+ I/mu_penalty`` when a penalty is supplied.

    Parameters
    ----------
    apply_ainv : callable
        Maps a vector or matrix ``b`` to ``A^{-1} b``.
    G : (n, n_c) ndarray
        Constraint Jacobian transpose.
    f, g : ndarray
        Force-like and gap-like right-hand sides of the subproblem.
    mu_penalty : float, optional
        Regularization penalty for rank-deficient active sets.

    Returns
    -------
    x : (n,) ndarray
    lam : (n_c,) ndarray
        KKT pair of the subproblem.
    """
    f = np.asarray(f, dtype=float)
    ainv_f = apply_ainv(f)
    n_c = 0 if G is None else G.shape[1]
    x = -ainv_f
    lam = np.zeros(n_c)
    if n_c == 0:
        return x, lam

    g = np.asarray(g, dtype=float)
    prev_active = None
    for _ in range(max_iter):
        h = G.T @ x + g
        # noise floor keeps released constraints (h = 0 up to roundoff after
        # an equality solve) from flapping back in; proportional scaling
        # preserves the exact invariance of the active set under joint
        # scaling of f and g
        tol_h = 64.0 * np.finfo(float).eps * max(
            np.abs(g).max(initial=0.0), np.abs(h).max(initial=0.0)
        )
        active = (lam < 0.0) | (h < -tol_h)
        if prev_active is not None and np.array_equal(active, prev_active):
            return x, lam
        prev_active = active
        lam = np.zeros(n_c)
        if not active.any():
            x = -ainv_f
            continue
        G_a = G[:, active]
        ainv_Ga = np.asarray(apply_ainv(G_a))
        if ainv_Ga.ndim == 1:
            ainv_Ga = ainv_Ga[:, None]
        schur = G_a.T @ ainv_Ga
        rhs = g[active] - G_a.T @ ainv_f
        try:
            lam_a = scipy.linalg.cho_solve(scipy.linalg.cho_factor(schur), rhs)
        except scipy.linalg.LinAlgError:
            if mu_penalty is None:
                raise IndefiniteSchur(
                    "active-set Schur complement not positive definite; "
                    "supply mu_penalty to regularize"
                ) from None
            schur = schur + np.eye(schur.shape[0]) / mu_penalty
            lam_a = scipy.linalg.cho_solve(scipy.linalg.cho_factor(schur), rhs)
        lam[active] = lam_a
        x = -ainv_f - ainv_Ga @ lam_a
    raise ActiveSetCycling(
        f"active set did not settle in {max_iter} iterations; "
        "consider enabling mu_penalty"
    )


def kkt_residuals(apply_a, G, f, g, x, lam):
    """Residuals of the four KKT conditions, for diagnostics and tests."""
    stationarity = apply_a(x) + (G @ lam if G is not None else 0.0) + f
    if G is None or G.shape[1] == 0:
        return np.linalg.norm(stationarity), 0.0, 0.0, 0.0
    h = G.T @ x + g
    return (
        np.linalg.norm(stationarity),
        max(0.0, -h.min()) if h.size else 0.0,
        max(0.0, lam.max()) if lam.size else 0.0,
        abs(lam @ h),
    )


def solve_contact_qp(m_diag, G, f_tilde, g_tilde, mu_penalty=None, max_iter=50):
    """Active-set contact QP with a diagonal (mass) matrix.

    Thin wrapper over :func:`active_set_qp` for the explicit macroscale
    corrector, where ``A`` is the lumped mass.
    """
    m_diag = np.asarray(m_diag, dtype=float)
    if np.any(m_diag <= 0.0):
        raise ValueError("mass entries must be strictly positive")

    def apply_minv(b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            return b / m_diag
        return b / m_diag[:, None]

    return active_set_qp(apply_minv, G, f_tilde, g_tilde, mu_penalty, max_iter)
