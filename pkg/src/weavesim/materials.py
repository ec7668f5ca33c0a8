"""Analytical constitutive laws.

Constitutive tangents are exchanged as 6x6 matrices in engineering Voigt
convention: stress rows are plain components (S11, S22, S33, S12, S13, S23)
while strain columns use engineering shears (E11, E22, E33, g12, g13, g23)
with g_ij = 2 E_ij.  With that pairing the tangent of any hyperelastic law
is symmetric.
"""

from dataclasses import dataclass

import numpy as np

from .tensors import sym_to_voigt


@dataclass(frozen=True)
class StVkMaterial:
    """St. Venant-Kirchhoff solid: S = lambda tr(E) I + 2 mu E.

    Parameters are the Lame constants in Pa; ``mu > 0`` and ``lam >= 0``.
    """

    lame_lambda: float
    lame_mu: float

    def __post_init__(self):
        if self.lame_mu <= 0.0 or self.lame_lambda < 0.0:
            raise ValueError("need mu > 0 and lambda >= 0")

    @classmethod
    def from_young_poisson(cls, young, poisson):
        lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
        mu = young / (2.0 * (1.0 + poisson))
        return cls(lam, mu)

    def pk2(self, e):
        """Second Piola-Kirchhoff stress for a Green-Lagrange strain tensor."""
        e = np.asarray(e, dtype=float)
        return self.lame_lambda * np.trace(e) * np.eye(3) + 2.0 * self.lame_mu * e

    def tangent6(self, e=None, cols=None):
        """Constant 6x6 tangent dS/dE in engineering Voigt convention.

        ``cols`` is accepted for interface parity with finite-difference
        tangents; the full (exact) matrix is returned either way.
        """
        lam, mu = self.lame_lambda, self.lame_mu
        d = np.zeros((6, 6))
        d[:3, :3] = lam
        d[np.arange(3), np.arange(3)] += 2.0 * mu
        d[3, 3] = d[4, 4] = d[5, 5] = mu
        return d

    def evaluate(self, e):
        """Law3D protocol alias for :meth:`pk2`."""
        return self.pk2(e)

    def strain_energy(self, e):
        """Strain energy density W(E) in Pa."""
        e = np.asarray(e, dtype=float)
        tr = np.trace(e)
        return 0.5 * self.lame_lambda * tr * tr + self.lame_mu * np.sum(e * e)


class StVkPlaneStressAnalytical:
    """Closed-form plane-stress St. Venant-Kirchhoff membrane law.

    Static condensation of the out-of-plane strain gives
    ``E33 = -lambda (E11 + E22) / (lambda + 2 mu)`` and an in-plane law
    ``Sm = lam_star tr(Em) I + 2 mu Em`` with
    ``lam_star = 2 lambda mu / (lambda + 2 mu)``.

    The membrane strain/stress vectors follow the package convention
    ``e = (E11, E22, 2 E12)`` and ``s = (S11, S22, S12)``.
    """

    def __init__(self, lame_lambda, lame_mu):
        self.lame_lambda = float(lame_lambda)
        self.lame_mu = float(lame_mu)
        self.lam_star = 2.0 * lame_lambda * lame_mu / (lame_lambda + 2.0 * lame_mu)

    def out_of_plane_strain(self, e):
        """Condensed E33 for a membrane strain vector (E11, E22, 2E12)."""
        lam, mu = self.lame_lambda, self.lame_mu
        return -lam * (e[0] + e[1]) / (lam + 2.0 * mu)

    def stress(self, e):
        e = np.asarray(e, dtype=float)
        tr = e[0] + e[1]
        mu = self.lame_mu
        return np.array(
            [
                self.lam_star * tr + 2.0 * mu * e[0],
                self.lam_star * tr + 2.0 * mu * e[1],
                mu * e[2],
            ]
        )

    def stress_batch(self, e):
        e = np.asarray(e, dtype=float)
        tr = e[:, 0] + e[:, 1]
        mu = self.lame_mu
        out = np.empty_like(e)
        out[:, 0] = self.lam_star * tr + 2.0 * mu * e[:, 0]
        out[:, 1] = self.lam_star * tr + 2.0 * mu * e[:, 1]
        out[:, 2] = mu * e[:, 2]
        return out

    def tangent3(self, e=None):
        """Condensed 3x3 tangent d(S11,S22,S12)/d(E11,E22,g12)."""
        ls, mu = self.lam_star, self.lame_mu
        return np.array(
            [
                [ls + 2.0 * mu, ls, 0.0],
                [ls, ls + 2.0 * mu, 0.0],
                [0.0, 0.0, mu],
            ]
        )

    def strain_energy(self, e):
        """Membrane strain energy density per unit reference volume."""
        e = np.asarray(e, dtype=float)
        tr = e[0] + e[1]
        mu = self.lame_mu
        return 0.5 * self.lam_star * tr * tr + mu * (
            e[0] ** 2 + e[1] ** 2 + 0.5 * e[2] ** 2
        )


def stvk_pk2_voigt(material, e):
    """Convenience: St.VK stress of a (3, 3) strain in Voigt 6 storage."""
    return sym_to_voigt(material.pk2(e))
