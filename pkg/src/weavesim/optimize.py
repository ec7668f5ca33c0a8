"""Limited-memory BFGS with a strong-Wolfe polynomial line search.

Small, deterministic implementation tailored to the surrogate-training
problem sizes (hundreds of parameters): two-loop recursion with memory 10,
line search enforcing the strong Wolfe conditions (c1 = 1e-4, c2 = 0.9)
through safeguarded cubic interpolation, and termination on
``||g|| <= tol * (1 + |f|)``.  A failed line search is not fatal: the best
iterate is returned with a flag.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    n_evals: int
    flag: str  # "converged" | "max_iterations" | "line_search_failure"

    @property
    def converged(self):
        return self.flag == "converged"


def _cubic_step(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi):
    """Minimizer of the cubic interpolant; falls back to bisection."""
    d1 = g_lo + g_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    disc = d1 * d1 - g_lo * g_hi
    if disc < 0.0:
        return 0.5 * (a_lo + a_hi)
    d2 = np.sign(a_hi - a_lo) * np.sqrt(disc)
    denom = g_hi - g_lo + 2.0 * d2
    if denom == 0.0:
        return 0.5 * (a_lo + a_hi)
    a = a_hi - (a_hi - a_lo) * (g_hi + d2 - d1) / denom
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    margin = 0.1 * (hi - lo)
    if not (lo + margin <= a <= hi - margin):
        return 0.5 * (a_lo + a_hi)
    return a


def strong_wolfe(fun_grad, x, d, f0, g0, c1=1e-4, c2=0.9, alpha0=1.0,
                 max_bracket=20, max_zoom=25):
    """Line search for f(x + alpha d) meeting the strong Wolfe conditions.

    Returns (alpha, f, g, n_evals) or None when no acceptable step exists
    within the evaluation budget.
    """
    phi0 = f0
    dphi0 = float(g0 @ d)
    if dphi0 >= 0.0:
        return None
    evals = 0

    def phi(alpha):
        nonlocal evals
        f, g = fun_grad(x + alpha * d)
        evals += 1
        return f, g, float(g @ d)

    def zoom(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
        for _ in range(max_zoom):
            a = _cubic_step(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            f, g, dphi = phi(a)
            if f > phi0 + c1 * a * dphi0 or f >= f_lo:
                a_hi, f_hi, d_hi = a, f, dphi
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return a, f, g
                if dphi * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo = a, f, dphi
            if abs(a_hi - a_lo) < 1e-18:
                break
        # interval collapsed (function changes at roundoff level): the lower
        # end satisfies the sufficient-decrease condition by invariant, so
        # accept it rather than abandoning the step
        if a_lo > 0.0:
            f, g, _ = phi(a_lo)
            return a_lo, f, g
        return None

    a_prev, f_prev, d_prev = 0.0, phi0, dphi0
    a = alpha0
    for i in range(max_bracket):
        f, g, dphi = phi(a)
        if f > phi0 + c1 * a * dphi0 or (i > 0 and f >= f_prev):
            out = zoom(a_prev, f_prev, d_prev, a, f, dphi)
            break
        if abs(dphi) <= -c2 * dphi0:
            return a, f, g, evals
        if dphi >= 0.0:
            out = zoom(a, f, dphi, a_prev, f_prev, d_prev)
            break
        a_prev, f_prev, d_prev = a, f, dphi
        a *= 2.0
    else:
        return None
    if out is None:
        return None
    alpha, f, g = out
    return alpha, f, g, evals


def lbfgs_minimize(fun_grad, x0, memory=10, max_iter=2000, grad_tol=1e-8,
                   c1=1e-4, c2=0.9, callback=None):
    """Minimize a smooth function given ``fun_grad(x) -> (f, g)``.

    Deterministic for deterministic inputs; suitable for bitwise-
    reproducible training given a fixed seed.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    n_evals = 1
    best_x, best_f = x.copy(), f
    s_hist, y_hist, rho_hist = [], [], []
    flag = "max_iterations"
    it = 0

    for it in range(1, max_iter + 1):
        gnorm = np.linalg.norm(g)
        if gnorm <= grad_tol * (1.0 + abs(f)):
            flag = "converged"
            break

        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist),
                             reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
        else:
            gamma = 1.0 / max(gnorm, 1.0)
        r = gamma * q
        for (s, y, rho), a in zip(
            zip(s_hist, y_hist, rho_hist), reversed(alphas)
        ):
            b = rho * (y @ r)
            r += (a - b) * s
        d = -r

        out = strong_wolfe(fun_grad, x, d, f, g, c1=c1, c2=c2)
        if out is None:
            flag = "line_search_failure"
            break
        alpha, f_new, g_new, evals = out
        n_evals += evals
        s = alpha * d
        y = g_new - g
        sy = s @ y
        if sy > 1e-16 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x = x + s
        f, g = f_new, g_new
        if f < best_f:
            best_f, best_x = f, x.copy()
        if callback is not None:
            callback(it, x, f, np.linalg.norm(g))

    if f > best_f:
        x, f = best_x, best_f
        _, g = fun_grad(x)
        n_evals += 1
    return MinimizeResult(
        x=x,
        fun=f,
        grad_norm=float(np.linalg.norm(g)),
        iterations=it,
        n_evals=n_evals,
        flag=flag,
    )
