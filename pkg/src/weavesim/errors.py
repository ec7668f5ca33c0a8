"""Exception hierarchy shared by all weavesim solvers."""


class WeavesimError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(WeavesimError):
    """A tensor required to be SPD has a non-positive eigenvalue."""


class SingularDeformation(WeavesimError):
    """Deformation gradient with det(F) <= 0."""


class SingularSystem(WeavesimError):
    """A small dense system that should be regular is numerically singular."""


class GeometryOverlap(WeavesimError):
    """Yarn solids interpenetrate in the reference configuration."""


class ElementInversion(WeavesimError):
    """det(F) <= 0 at a quadrature point during assembly."""


class NoConvergence(WeavesimError):
    """Newton iteration exceeded its budget."""


class ActiveSetCycling(WeavesimError):
    """Active-set iteration cap reached; consider enabling the penalty."""


class IndefiniteSchur(WeavesimError):
    """Schur complement not positive definite and no penalty supplied."""


class DegenerateFacet(WeavesimError):
    """Contact facet with near-zero area."""


class DegenerateTriangle(WeavesimError):
    """Membrane triangle with near-zero reference area."""


class PlaneStressNoConvergence(WeavesimError):
    """Out-of-plane stress could not be driven to zero."""


class SingularZzBlock(WeavesimError):
    """Out-of-plane tangent block not invertible in the plane-stress solve."""


class ContactNoConvergence(WeavesimError):
    """Predictor-corrector contact iteration failed to converge."""


class NonFiniteState(WeavesimError):
    """NaN or Inf appeared in a dynamic state vector."""


class RankDeficientData(WeavesimError):
    """Regression data does not determine the model parameters."""


class ZeroShearColumn(WeavesimError):
    """Shear stress column is identically zero."""


class CampaignAborted(WeavesimError):
    """Too many consecutive coupon-point failures."""


class EmptySnapshots(WeavesimError):
    """Snapshot matrix has no columns."""


class AllZeroSnapshots(WeavesimError):
    """Multiplier snapshots are identically zero."""


class EmptySeries(WeavesimError):
    """Plot requested with no data series."""
