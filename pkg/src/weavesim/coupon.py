"""Numerical coupon campaigns on a single-element membrane specimen.

The coupon is a right triangle with unit legs, its right-angle node and all
out-of-plane displacements fixed.  A target in-plane strain is imposed
exactly by moving the two free nodes with the 2D right stretch tensor
``U2 = (2 E + I)^(1/2)``: for the constant-strain triangle this is
equivalent to solving the quasistatic coupon problem, with no solver noise
in the training data.

Records are ordered along a boustrophedon (snake) trajectory through the
strain grid so that consecutive evaluations differ in a single component by
one grid spacing, which makes warm starting effective.
"""

import csv
import io
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .errors import CampaignAborted, WeavesimError
from .membrane import MembraneMesh, membrane_strains
from .tensors import stretch_from_strain

COUPON_NODES = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

CSV_HEADER = ["E11", "E22", "gamma12", "S11", "S22", "S12",
              "converged", "newton_iters"]


@dataclass(frozen=True)
class CouponConfig:
    """Strain-grid sampling plan.

    ``ranges`` lists (lo, hi) per component (E11, E22, 2E12); ``n`` points
    per axis.  ``shift`` displaces every grid point, which is how the test
    set is generated (half a spacing keeps it disjoint from training).
    """

    ranges: tuple = ((-0.1, 0.25), (-0.1, 0.25), (-0.1, 0.25))
    n: int = 17
    mode: str = "snake"
    warm_start: bool = True
    shift: tuple = (0.0, 0.0, 0.0)
    max_consecutive_failures: int = 10
    threads: int = 1

    def __post_init__(self):
        for lo, hi in self.ranges:
            if not lo < hi:
                raise ValueError("each range needs lo < hi")
        if self.n < 2:
            raise ValueError("need at least two points per axis")
        if self.mode not in ("snake", "raster"):
            raise ValueError("mode must be 'snake' or 'raster'")

    def axes(self):
        return [np.linspace(lo, hi, self.n) for lo, hi in self.ranges]

    @property
    def spacing(self):
        return [(hi - lo) / (self.n - 1) for lo, hi in self.ranges]


def grid_trajectory(config):
    """Ordered strain targets covering the grid exactly once.

    Snake mode produces single-component unit moves between consecutive
    points; raster mode is plain nested iteration (fast axis first).
    """
    axes = config.axes()
    n = config.n
    if config.mode == "raster":
        idx = [(i1, i2, i3)
               for i3 in range(n) for i2 in range(n) for i1 in range(n)]
    else:
        pos = [0, 0, 0]
        direction = [1, 1, 1]
        idx = [tuple(pos)]
        for _ in range(n**3 - 1):
            for ax in range(3):
                nxt = pos[ax] + direction[ax]
                if 0 <= nxt < n:
                    pos[ax] = nxt
                    break
                direction[ax] = -direction[ax]
            idx.append(tuple(pos))
    shift = np.asarray(config.shift, dtype=float)
    return np.array(
        [(axes[0][i1], axes[1][i2], axes[2][i3]) for i1, i2, i3 in idx]
    ) + shift


def stretch_2d(e_target):
    """2D right stretch from a membrane strain vector (E11, E22, 2E12)."""
    e3 = np.zeros((3, 3))
    e3[0, 0], e3[1, 1] = e_target[0], e_target[1]
    e3[0, 1] = e3[1, 0] = 0.5 * e_target[2]
    u3 = stretch_from_strain(e3)  # stays block-diagonal: E has no z coupling
    return u3[:2, :2]


def coupon_boundary_displacements(e_target):
    """Prescribed displacements of the two free coupon nodes.

    Returns a (2, 2) array: row 0 moves the node at X = (1, 0), row 1 the
    node at X = (0, 1).
    """
    u2 = stretch_2d(e_target)
    return np.array(
        [[u2[0, 0] - 1.0, u2[1, 0]], [u2[0, 1], u2[1, 1] - 1.0]]
    )


def coupon_strain_from_displacements(disp, law=None):
    """Recover the element strain vector from free-node displacements.

    Builds the actual coupon membrane element and evaluates its
    Green-Lagrange strain; used as the oracle that the imposed strain
    matches the target exactly.
    """
    mesh = MembraneMesh(
        nodes=COUPON_NODES.copy(),
        triangles=np.array([[0, 1, 2]]),
        thickness=1.0,
        density=1.0,
        laws=law,
    )
    u = np.zeros(9)
    u[3:5] = disp[0]
    u[6:8] = disp[1]
    e, _, _ = membrane_strains(mesh, u)
    return e[0]


@dataclass
class Dataset:
    """Ordered (strain, stress) records from a campaign."""

    strains: np.ndarray  # (N, 3): E11, E22, 2E12
    stresses: np.ndarray  # (N, 3): S11, S22, S12
    converged: np.ndarray  # (N,) int
    newton_iters: np.ndarray  # (N,) int
    failures: list = field(default_factory=list)

    def __len__(self):
        return self.strains.shape[0]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(len(self)):
            row = [f"{v:.17g}" for v in (*self.strains[i], *self.stresses[i])]
            row += [str(int(self.converged[i])), str(int(self.newton_iters[i]))]
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected dataset header: {header}")
        rows = [r for r in reader if r]
        strains = np.array([[float(v) for v in r[0:3]] for r in rows])
        stresses = np.array([[float(v) for v in r[3:6]] for r in rows])
        conv = np.array([int(r[6]) for r in rows])
        iters = np.array([int(r[7]) for r in rows])
        return cls(strains, stresses, conv, iters)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_csv(fh.read())


def _evaluate_point(law, e):
    s = law.stress(e)
    iters = getattr(law, "last_iterations", 0)
    return s, iters


_WORKER_LAW = None


def _init_worker(law):
    # fork start method: the law arrives by memory inheritance, unpickled
    global _WORKER_LAW
    _WORKER_LAW = law.clone() if hasattr(law, "clone") else law


def _cold_eval(e):
    fresh = _WORKER_LAW.clone() if hasattr(_WORKER_LAW, "clone") else _WORKER_LAW
    return _evaluate_point(fresh, e)


def run_campaign(config, law, progress=None):
    """Drive the coupon through the strain grid and collect the dataset.

    Parameters
    ----------
    config : CouponConfig
    law : membrane law object
        Needs ``stress(e) -> s``; a ``clone()`` method enables cold-start
        and parallel evaluation.
    progress : callable, optional
        Called with (index, total) after each point.

    Raises
    ------
    CampaignAborted
        After ``max_consecutive_failures`` consecutive solver failures.
    """
    points = grid_trajectory(config)
    total = len(points)
    records = []
    failures = []

    if config.threads > 1 and not config.warm_start:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(config.threads, initializer=_init_worker,
                      initargs=(law,)) as pool:
            results = pool.map(_cold_eval, list(points))
        for i, (e, (s, iters)) in enumerate(zip(points, results)):
            records.append((e, s, 1, iters))
            if progress:
                progress(i + 1, total)
    else:
        consecutive = 0
        active_law = law
        for i, e in enumerate(points):
            if not config.warm_start and hasattr(law, "clone"):
                active_law = law.clone()
            try:
                s, iters = _evaluate_point(active_law, e)
            except WeavesimError as exc:
                failures.append(
                    {"index": i, "strain": e.tolist(),
                     "error": type(exc).__name__, "message": str(exc)}
                )
                consecutive += 1
                if consecutive > config.max_consecutive_failures:
                    raise CampaignAborted(
                        f"{consecutive} consecutive failures, last at {e}"
                    ) from exc
                continue
            consecutive = 0
            records.append((e, s, 1, iters))
            if progress:
                progress(i + 1, total)

    strains = np.array([r[0] for r in records]).reshape(-1, 3)
    stresses = np.array([r[1] for r in records]).reshape(-1, 3)
    conv = np.array([r[2] for r in records], dtype=int)
    iters = np.array([r[3] for r in records], dtype=int)
    return Dataset(strains, stresses, conv, iters, failures)
