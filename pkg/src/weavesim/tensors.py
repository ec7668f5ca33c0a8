"""Small dense tensor algebra for finite-strain kinematics.

Conventions used throughout the package:

* General second-order tensors (e.g. the deformation gradient ``F``) are
  ``(3, 3)`` float arrays with ``F[i, j] = d x_i / d X_j``.
* Symmetric tensors (strain ``E``, stretch ``U``, stresses) are stored as
  full ``(3, 3)`` arrays; the Voigt component order, wherever a length-6
  vector is exchanged, is ``(11, 22, 33, 12, 13, 23)``.
* ``vec``/``unvec`` use column-major (Fortran) vectorization, i.e.
  ``vec(A) = (A11, A21, A31, A12, A22, A32, A13, A23, A33)``.

All functions are pure; arrays are never modified in place.
"""

import numpy as np

from .errors import NotPositiveDefinite, SingularDeformation, SingularSystem

#: Eigenvalue floor below which a right Cauchy-Green tensor is rejected.
EPS_SPD = 1e-10

#: (i, j) index pairs for the Voigt order (11, 22, 33, 12, 13, 23).
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def sym_to_voigt(a):
    """Pack a symmetric (3, 3) tensor into a 6-vector (11, 22, 33, 12, 13, 23)."""
    return np.array([a[i, j] for i, j in VOIGT_PAIRS])


def voigt_to_sym(v):
    """Unpack a 6-vector (11, 22, 33, 12, 13, 23) into a symmetric (3, 3) tensor."""
    a = np.empty((3, 3))
    for k, (i, j) in enumerate(VOIGT_PAIRS):
        a[i, j] = v[k]
        a[j, i] = v[k]
    return a


def vec9(a):
    """Column-major vectorization of a (3, 3) tensor; bit-exact round trip with unvec9."""
    return np.reshape(np.asarray(a), 9, order="F").copy()


def unvec9(v):
    """Inverse of vec9."""
    return np.reshape(np.asarray(v), (3, 3), order="F").copy()


def jacobi_eigh(a, tol=1e-14, max_sweeps=50):
    """Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Robust for repeated eigenvalues, which closed-form cubic formulas handle
    poorly.  Iterates until the off-diagonal Frobenius norm falls below
    ``tol * ||a||_F``.

    Parameters
    ----------
    a : (3, 3) ndarray
        Symmetric matrix (only the upper triangle is referenced).

    Returns
    -------
    w : (3,) ndarray
        Eigenvalues in ascending order.
    v : (3, 3) ndarray
        Orthonormal eigenvectors as columns, ``a @ v[:, k] = w[k] * v[:, k]``.
    """
    A = np.array(a, dtype=float)
    A = 0.5 * (A + A.T)
    V = np.eye(3)
    norm_a = np.linalg.norm(A)
    if norm_a == 0.0:
        return np.zeros(3), V

    for _ in range(max_sweeps):
        off = np.sqrt(A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2)
        if off * np.sqrt(2.0) < tol * norm_a:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = A[p, q]
            if apq == 0.0:
                continue
            # classic Jacobi rotation annihilating A[p, q]
            theta = 0.5 * (A[q, q] - A[p, p]) / apq
            t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            if theta == 0.0:
                t = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            R = np.eye(3)
            R[p, p] = c
            R[q, q] = c
            R[p, q] = s
            R[q, p] = -s
            A = R.T @ A @ R
            A = 0.5 * (A + A.T)
            V = V @ R

    order = np.argsort(np.diag(A))
    return np.diag(A)[order], V[:, order]


def stretch_from_strain(e):
    """Right stretch tensor from a Green-Lagrange strain tensor.

    Forms the right Cauchy-Green tensor ``C = 2 E + I`` and returns its SPD
    square root ``U = sum_i sqrt(l_i) n_i (x) n_i``.

    Raises
    ------
    NotPositiveDefinite
        If any eigenvalue of ``C`` is at or below ``EPS_SPD`` (inadmissible
        strain, e.g. total collapse of a material line).
    """
    c = 2.0 * np.asarray(e, dtype=float) + np.eye(3)
    w, v = jacobi_eigh(c)
    if np.any(w <= EPS_SPD):
        raise NotPositiveDefinite(
            f"right Cauchy-Green tensor has eigenvalue {w.min():.3e} <= {EPS_SPD:.1e}"
        )
    u = (v * np.sqrt(w)) @ v.T
    return 0.5 * (u + u.T)


def polar_decompose(f):
    """Polar decomposition ``F = R U`` with ``R`` in SO(3) and ``U`` SPD.

    Raises
    ------
    SingularDeformation
        If ``det(F) <= 0``.
    """
    f = np.asarray(f, dtype=float)
    if np.linalg.det(f) <= 0.0:
        raise SingularDeformation(f"det(F) = {np.linalg.det(f):.3e} <= 0")
    c = f.T @ f
    w, v = jacobi_eigh(c)
    if np.any(w <= EPS_SPD):
        raise SingularDeformation("deformation gradient numerically singular")
    sqrt_w = np.sqrt(w)
    u = (v * sqrt_w) @ v.T
    u = 0.5 * (u + u.T)
    u_inv = (v / sqrt_w) @ v.T
    r = f @ u_inv
    return r, u


def biot_to_pk2(t, u):
    """Second Piola-Kirchhoff stress from the symmetric Biot stress.

    Solves the Lyapunov-type equation ``0.5 (S U + U S) = T`` for symmetric
    ``S``.  The 9x9 Kronecker form is reduced to the six-dimensional
    symmetric subspace, assembled explicitly and solved by pivoted LU: the
    system is tiny and clarity beats cleverness here.

    Parameters
    ----------
    t : (3, 3) ndarray
        Symmetric part of the Biot stress tensor.
    u : (3, 3) ndarray
        Right stretch tensor (SPD).

    Raises
    ------
    SingularSystem
        If the reduced 6x6 system is numerically singular.  For SPD ``U``
        this cannot happen (it needs eigenvalues with ``l_i + l_j = 0``) and
        indicates an internal error upstream.
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    a = np.empty((6, 6))
    for k, (i, j) in enumerate(VOIGT_PAIRS):
        basis = np.zeros((3, 3))
        basis[i, j] = 1.0
        basis[j, i] = 1.0
        image = 0.5 * (basis @ u + u @ basis)
        a[:, k] = sym_to_voigt(image)
    rhs = sym_to_voigt(0.5 * (t + t.T))
    try:
        s6 = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("reduced Lyapunov system is singular") from exc
    if not np.all(np.isfinite(s6)):
        raise SingularSystem("reduced Lyapunov system produced non-finite entries")
    return voigt_to_sym(s6)
