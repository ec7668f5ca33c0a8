"""Homogenized 3D constitutive law backed by a microscale RVE solve.

Evaluating the law at a macroscale Green-Lagrange strain runs five steps:

1. right stretch tensor from the strain,
2. static microscale solve under the affine boundary map ``x = U0 X``,
3. reaction forces on the constrained dofs,
4. Biot stress as the volume-scaled moment of the reactions,
5. Lyapunov solve back to the second Piola-Kirchhoff stress.

The converged microscale state is cached and used to warm start the next
evaluation, which makes trajectory-style sampling cheap.
"""

import numpy as np

from .microfem import (
    SolverSettings,
    prescribe_affine_boundary,
    reaction_forces,
    solve_static,
)
from .tensors import biot_to_pk2, stretch_from_strain, sym_to_voigt

#: engineering-Voigt perturbations used for the finite-difference tangent
_VOIGT_COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def _perturbed(e0, k, delta):
    """Engineering-Voigt perturbation: full delta on diagonal components,
    delta/2 on each symmetric off-diagonal entry (gamma convention)."""
    e = np.array(e0, dtype=float)
    i, j = _VOIGT_COMPONENTS[k]
    if i == j:
        e[i, i] += delta
    else:
        e[i, j] += 0.5 * delta
        e[j, i] += 0.5 * delta
    return e


class HomogenizedLaw:
    """Plane 3D constitutive function S0(E0) evaluated through an RVE.

    Parameters
    ----------
    mesh : RveMesh
    settings : SolverSettings, optional
        Microscale Newton settings.  The default tightens ``tol_r`` to
        1e-10: the homogenized stress inherits the solver error, and the
        plane-stress Newton wrapped around this law needs stress noise
        below its own tolerance.
    warm_start : bool
        Reuse the previous converged state as the next initial guess.
    """

    def __init__(self, mesh, settings=None, warm_start=True):
        self.mesh = mesh
        self.settings = settings or SolverSettings(tol_r=1e-10)
        self.warm_start = warm_start
        self.volume = mesh.bbox.volume
        self._warm = None  # (state, u0) of the last converged solve
        self._coords_constrained = mesh.nodes[mesh.constrained_nodes]
        free = mesh.free_dofs()
        self._coords_free = mesh.nodes.reshape(-1)[free].reshape(-1)
        self._free_nodes = free // 3
        self._free_comp = free % 3
        self.snapshot_hook = None  # callable(u0, state), used by ROM training
        self.skew_warning_threshold = 1e-3
        self.last_skew_ratio = 0.0
        self.total_newton_iters = 0
        self.total_evaluations = 0

    def clone(self):
        """Independent instance (own warm-start cache) for parallel use."""
        law = HomogenizedLaw(self.mesh, self.settings, self.warm_start)
        law.skew_warning_threshold = self.skew_warning_threshold
        return law

    # -- core evaluation ---------------------------------------------------

    def _affine_free(self, u0):
        """Free-dof values of the affine field (U0 - I) X."""
        disp = self.mesh.nodes @ (u0 - np.eye(3)).T
        return disp[self._free_nodes, self._free_comp]

    def _solve_at(self, e0, init):
        """Solve at a strain; ``init`` is an optional (state, u0) pair.

        The warm start carries the previous solve's deviation from its own
        affine field, so the initial guess tracks the new boundary data
        instead of lagging a full affine increment behind it.
        """
        u0 = stretch_from_strain(e0)
        prescribed = prescribe_affine_boundary(self.mesh, u0)
        init_state = None
        if init is not None:
            prev_state, prev_u0 = init
            shifted = prev_state.u_free + self._affine_free(u0) \
                - self._affine_free(prev_u0)
            init_state = type(prev_state)(
                u_free=shifted,
                u_constrained=prescribed,
                lam=prev_state.lam,
            )
        state = solve_static(self.mesh, prescribed, init=init_state,
                             settings=self.settings)
        reac = reaction_forces(self.mesh, state)
        b0 = self._coords_constrained.T @ reac / self.volume
        t0 = 0.5 * (b0 + b0.T)
        skew = 0.5 * (b0 - b0.T)
        sym_norm = np.linalg.norm(t0)
        self.last_skew_ratio = (
            np.linalg.norm(skew) / sym_norm if sym_norm > 0.0 else 0.0
        )
        s0 = biot_to_pk2(t0, u0)
        return s0, state, u0

    def evaluate_S0(self, e0):
        """Homogenized stress and the converged microscale state."""
        init = self._warm if self.warm_start else None
        s0, state, u0 = self._solve_at(e0, init)
        self._warm = (state, u0)
        self.total_newton_iters += state.newton_iters
        self.total_evaluations += 1
        if self.snapshot_hook is not None:
            self.snapshot_hook(u0, state)
        return s0, state

    def evaluate(self, e0):
        """Law3D protocol: stress only."""
        return self.evaluate_S0(e0)[0]

    # -- tangent -----------------------------------------------------------

    def tangent6(self, e0, delta=1e-6, cols=None):
        """Finite-difference tangent in engineering Voigt convention.

        Central differences of the homogenized map, warm started from the
        converged base state; off-diagonal columns follow the engineering
        shear convention (column k is d S / d gamma_k).  The full matrix is
        symmetrized; partial evaluations (``cols``) are returned raw for
        use as Newton Jacobian blocks.
        """
        base_init = self._warm if self.warm_start else None
        if base_init is None:
            _, base_state, base_u0 = self._solve_at(e0, None)
            base_init = (base_state, base_u0)
        requested = range(6) if cols is None else cols
        d = np.zeros((6, 6))
        for k in requested:
            sp, _, _ = self._solve_at(_perturbed(e0, k, delta), base_init)
            sm, _, _ = self._solve_at(_perturbed(e0, k, -delta), base_init)
            d[:, k] = (sym_to_voigt(sp) - sym_to_voigt(sm)) / (2.0 * delta)
        if cols is None:
            d = 0.5 * (d + d.T)
        return d
