"""Explicit central-difference dynamics with implicit contact.

The per-step update follows the displacement-then-predictor-corrector
scheme: displacements advance with the old accelerations, the predictor
evaluates one internal force, and corrector passes solve the contact QP on
acceleration increments until they stagnate.  Variable step sizes
``dt_n`` (current) and ``dt_np1`` (next) are supported throughout.
"""

from dataclasses import dataclass, field

import numpy as np

from .contact import gap_and_jacobian, solve_contact_qp
from .errors import ContactNoConvergence, NonFiniteState
from . import membrane as mb


@dataclass
class DynState:
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    t: float = 0.0
    step: int = 0
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def check_finite(self):
        for name, arr in (("u", self.u), ("v", self.v), ("a", self.a)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteState(f"non-finite entries in {name} at t={self.t}")


@dataclass
class StepSettings:
    tol_pc: float = 1e-8  # relative to |a_predictor|_inf
    max_pc: int = 20
    mu_penalty: float = None


class MembraneSystem:
    """Explicit-dynamics view of a membrane mesh plus loads and contact."""

    def __init__(self, mesh, loads=(), prescribed=None):
        self.mesh = mesh
        self.loads = list(loads)
        self.prescribed = prescribed  # callable t -> (dofs, u, v, a) or None
        self.mass = mb.lumped_mass(mesh)
        self.damping_alpha = mesh.rayleigh_alpha
        self._fixed = np.asarray(mesh.fixed_dofs, dtype=np.int64)
        free_mask = np.ones(mesh.n_dofs, dtype=bool)
        free_mask[self._fixed] = False
        if np.any(self.mass[free_mask] <= 0.0):
            raise ValueError("lumped mass must be positive on free dofs")
        self.mass = np.where(self.mass > 0.0, self.mass, 1.0)
        self.last_stress = None

    @property
    def n_dofs(self):
        return self.mesh.n_dofs

    def internal_force(self, u):
        f, _, s = mb.membrane_internal_force(self.mesh, u, return_stress=True)
        self.last_stress = s
        return f

    def external_force(self, t, u):
        f = np.zeros(self.n_dofs)
        for load in self.loads:
            load.add_to(f, t, u, self)
        return f

    def contact(self, u):
        if not self.mesh.contact_pairs:
            return None
        x = self.mesh.nodes + u.reshape(-1, 3)
        g, G = gap_and_jacobian(x, self.mesh.contact_pairs, self.n_dofs)
        if self._fixed.size:
            G[self._fixed, :] = 0.0
        return g, G

    def constrain(self, state):
        """Overwrite fixed/prescribed dofs on a state in place."""
        if self._fixed.size:
            state.u[self._fixed] = 0.0
            state.v[self._fixed] = 0.0
            state.a[self._fixed] = 0.0
        if self.prescribed is not None:
            dofs, u_p, v_p, a_p = self.prescribed(state.t)
            state.u[dofs] = u_p
            state.v[dofs] = v_p
            state.a[dofs] = a_p

    def initial_state(self):
        n = self.n_dofs
        state = DynState(np.zeros(n), np.zeros(n), np.zeros(n))
        # consistent initial acceleration
        f = self.external_force(0.0, state.u) - self.internal_force(state.u)
        state.a = f / self.mass
        self.constrain(state)
        return state

    def stable_dt_estimate(self):
        """Crude wave-speed bound, for warnings only: the assigned law may
        be a black box, so a stiffness probe at zero strain is used."""
        law = self.mesh.laws if mb.MembraneMesh.law_list(self.mesh) is None \
            else self.mesh.law_list()[0]
        tangent = getattr(law, "tangent3", None)
        if tangent is None:
            return None
        try:
            c = np.linalg.eigvalsh(tangent(np.zeros(3))).max()
        except Exception:
            return None
        if c <= 0.0:
            return None
        wave_speed = np.sqrt(c / self.mesh.density)
        cache = mb.membrane_cache(self.mesh)
        t = self.mesh.triangles
        x = self.mesh.nodes
        edges = np.concatenate([
            np.linalg.norm(x[t[:, 1]] - x[t[:, 0]], axis=1),
            np.linalg.norm(x[t[:, 2]] - x[t[:, 1]], axis=1),
            np.linalg.norm(x[t[:, 0]] - x[t[:, 2]], axis=1),
        ])
        del cache
        return edges.min() / wave_speed


class GravityLoad:
    def __init__(self, g=(0.0, 0.0, -9.81)):
        self.g = np.asarray(g, dtype=float)

    def add_to(self, f, t, u, system):
        f += (system.mass.reshape(-1, 3) * self.g).reshape(-1)


class PressureLoad:
    """Follower pressure on the current configuration; positive pressure
    pushes along the triangle normal (right-hand rule of node order)."""

    def __init__(self, pressure):
        self.pressure = pressure

    def add_to(self, f, t, u, system):
        mesh = system.mesh
        x = mesh.nodes + u.reshape(-1, 3)
        tri = mesh.triangles
        areavec = 0.5 * np.cross(
            x[tri[:, 1]] - x[tri[:, 0]], x[tri[:, 2]] - x[tri[:, 0]]
        )
        p = self.pressure(t) if callable(self.pressure) else self.pressure
        contrib = (p / 3.0) * areavec
        for n in range(3):
            dofs = 3 * tri[:, n]
            for k in range(3):
                np.add.at(f, dofs + k, contrib[:, k])


def step_explicit(system, state, dt_n, dt_np1=None, settings=None):
    """Advance one explicit step with implicit contact correction.

    Parameters
    ----------
    system : MembraneSystem or any object with the same surface
    state : DynState at time t_n
    dt_n, dt_np1 : float
        Current and next step sizes (equal when dt_np1 is omitted).

    Returns
    -------
    DynState at time t_n + dt_n.
    """
    settings = settings or StepSettings()
    if dt_np1 is None:
        dt_np1 = dt_n
    mass = system.mass
    t1 = state.t + dt_n

    # 1. displacement update
    u1 = state.u + dt_n * state.v + 0.5 * dt_n**2 * state.a
    new = DynState(u=u1, v=state.v.copy(), a=state.a.copy(),
                   t=t1, step=state.step + 1)
    system.constrain(new)

    # 2a. predictor
    f = system.external_force(t1, new.u) - system.internal_force(new.u)
    alpha = getattr(system, "damping_alpha", 0.0)
    if alpha:
        v_half = state.v + 0.5 * dt_n * state.a
        f = f - alpha * mass * v_half
    a0 = f / mass
    v0 = state.v + 0.5 * dt_n * (state.a + a0)
    new.v, new.a = v0, a0
    system.constrain(new)
    a0 = new.a.copy()

    contact = system.contact if hasattr(system, "contact") else lambda u: None
    coeff = 0.5 * (dt_n * dt_np1 + dt_np1**2)
    u2 = new.u + dt_np1 * new.v + 0.5 * dt_np1**2 * new.a
    lam = np.zeros(0)

    # 2b. corrector iterations on the acceleration increment
    for k in range(settings.max_pc + 1):
        pair = contact(u2)
        if pair is None:
            break
        g, G = pair
        g_tilde = g / coeff
        f_tilde = mass * (new.a - a0)
        da, lam = solve_contact_qp(mass, G, f_tilde, g_tilde,
                                   mu_penalty=settings.mu_penalty)
        new.a = new.a + da
        new.v = new.v + 0.5 * dt_n * da
        u2 = u2 + coeff * da
        scale = max(np.linalg.norm(a0, np.inf), 1e-300)
        if np.linalg.norm(da, np.inf) <= settings.tol_pc * scale:
            break
    else:
        raise ContactNoConvergence(
            f"corrector did not settle in {settings.max_pc} iterations"
        )

    system.constrain(new)
    new.lam = lam
    new.check_finite()
    return new


def run_simulation(system, dt, n_steps, settings=None, observer=None,
                   observe_every=1):
    """March ``n_steps`` constant-size steps; observer(state, system) hooks
    fire every ``observe_every`` steps (and at the initial state)."""
    state = system.initial_state()
    if observer is not None:
        observer(state, system)
    for _ in range(n_steps):
        state = step_explicit(system, state, dt, settings=settings)
        if observer is not None and state.step % observe_every == 0:
            observer(state, system)
    return state
