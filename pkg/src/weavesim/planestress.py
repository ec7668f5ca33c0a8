"""Numerical plane-stress wrapper for arbitrary 3D constitutive laws.

Given any law with ``evaluate(E) -> S`` (symmetric 3x3 tensors) and a
``tangent6(E)`` in engineering Voigt convention, this module enforces the
membrane condition S33 = S13 = S23 = 0 by Newton iteration on the
out-of-plane strains (E33, E13, E23), and statically condenses the tangent.

The membrane-facing interface trades vectors ``e = (E11, E22, 2 E12)`` and
``s = (S11, S22, S12)``, matching both the triangle element's strain
operator and the surrogate models' feature convention.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PlaneStressNoConvergence, SingularZzBlock

# engineering-Voigt index blocks: membrane (11, 22, 12), out-of-plane (33, 13, 23)
_M_IDX = np.array([0, 1, 3])
_Z_IDX = np.array([2, 4, 5])


@dataclass
class PlaneStressResult:
    sm: np.ndarray  # (3,) in-plane stress (S11, S22, S12)
    tangent: np.ndarray  # (3, 3) condensed d(S11,S22,S12)/d(E11,E22,g12), or None
    ez: np.ndarray  # (3,) converged (E33, E13, E23)
    iterations: int
    sz_norm: float


def _full_strain(em, ez):
    e = np.empty((3, 3))
    e[0, 0], e[1, 1] = em[0, 0], em[1, 1]
    e[0, 1] = e[1, 0] = em[0, 1]
    e[2, 2] = ez[0]
    e[0, 2] = e[2, 0] = ez[1]
    e[1, 2] = e[2, 1] = ez[2]
    return e


class PlaneStressLaw:
    """Stateful plane-stress condensation of a 3D law.

    One instance per quadrature point: the converged out-of-plane strain is
    kept as the warm start for the next call, mirroring the warm-start
    treatment of the wrapped microscale law.
    """

    def __init__(self, law3d, tol_ps=1e-9, max_iter=30, max_halvings=8):
        self.law3d = law3d
        self.tol_ps = tol_ps
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.ez = np.zeros(3)
        self.last_iterations = 0

    def clone(self):
        law3d = self.law3d.clone() if hasattr(self.law3d, "clone") else self.law3d
        return PlaneStressLaw(law3d, self.tol_ps, self.max_iter, self.max_halvings)

    def _jacobian_z(self, e_full):
        """d(S33,S13,S23)/d(E33,E13,E23) from the engineering tangent."""
        d6 = self.law3d.tangent6(e_full, cols=_Z_IDX)
        j = np.empty((3, 3))
        j[:, 0] = d6[_Z_IDX, 2]
        j[:, 1] = 2.0 * d6[_Z_IDX, 4]
        j[:, 2] = 2.0 * d6[_Z_IDX, 5]
        return j

    def evaluate(self, em, with_tangent=True):
        """Enforce the plane-stress condition at the in-plane strain ``em``.

        Parameters
        ----------
        em : (2, 2) ndarray
            In-plane Green-Lagrange strain.
        with_tangent : bool
            Compute the condensed 3x3 tangent (one extra full tangent of
            the wrapped law); skip for stress-only paths.

        Returns
        -------
        PlaneStressResult
        """
        em = np.asarray(em, dtype=float)
        ez = self.ez.copy()

        def out_of_plane(s):
            return np.array([s[2, 2], s[0, 2], s[1, 2]])

        s = self.law3d.evaluate(_full_strain(em, ez))
        sz = out_of_plane(s)
        for it in range(self.max_iter + 1):
            sm = np.array([s[0, 0], s[1, 1], s[0, 1]])
            stress_ref = max(1.0, np.abs(sm).max())
            sz_norm = np.linalg.norm(sz)
            if sz_norm <= self.tol_ps * stress_ref:
                self.ez = ez
                self.last_iterations = it
                tangent = None
                if with_tangent:
                    d6 = self.law3d.tangent6(_full_strain(em, ez), cols=None)
                    dmm = d6[np.ix_(_M_IDX, _M_IDX)]
                    dmz = d6[np.ix_(_M_IDX, _Z_IDX)]
                    dzz = d6[np.ix_(_Z_IDX, _Z_IDX)]
                    dzm = d6[np.ix_(_Z_IDX, _M_IDX)]
                    try:
                        tangent = dmm - dmz @ np.linalg.solve(dzz, dzm)
                    except np.linalg.LinAlgError as exc:
                        raise SingularZzBlock(
                            "condensation block not invertible"
                        ) from exc
                return PlaneStressResult(sm, tangent, ez.copy(), it, sz_norm)
            if it == self.max_iter:
                break

            j = self._jacobian_z(_full_strain(em, ez))
            try:
                dez = np.linalg.solve(j, -sz)
            except np.linalg.LinAlgError as exc:
                raise SingularZzBlock("out-of-plane tangent block singular") from exc

            # backtracking halving on ||Sz|| protects iteratively-evaluated
            # wrapped laws; the final trial is accepted regardless
            step = 1.0
            for _ in range(self.max_halvings + 1):
                ez_try = ez + step * dez
                s_try = self.law3d.evaluate(_full_strain(em, ez_try))
                sz_try = out_of_plane(s_try)
                if np.linalg.norm(sz_try) < sz_norm or step <= 2.0 ** -self.max_halvings:
                    break
                step *= 0.5
            ez, s, sz = ez_try, s_try, sz_try

        raise PlaneStressNoConvergence(
            f"plane-stress Newton failed after {self.max_iter} iterations "
            f"(|Sz| = {np.linalg.norm(sz):.3e})"
        )

    # -- membrane-law interface --------------------------------------------

    def stress(self, e, with_tangent=False):
        em = np.array([[e[0], 0.5 * e[2]], [0.5 * e[2], e[1]]])
        return self.evaluate(em, with_tangent=with_tangent).sm

    def stress_batch(self, e_batch):
        return np.array([self.stress(e) for e in np.asarray(e_batch)])

    def tangent3(self, e):
        em = np.array([[e[0], 0.5 * e[2]], [0.5 * e[2], e[1]]])
        return self.evaluate(em, with_tangent=True).tangent
