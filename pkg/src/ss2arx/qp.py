"""Dense convex QP solver for the condensed MPC problems.

Problem form::

    minimize    0.5 z' H z + g' z
    subject to  lo <= G z <= hi        (two-sided rows; lo == hi allowed)

with ``H`` symmetric positive definite.  The algorithm is operator-splitting
(ADMM) with a fixed penalty and over-relaxation, followed by an active-set
polish that solves the equality-constrained KKT system on the active rows
identified by the dual signs.  Everything is deterministic for identical
inputs and warm starts.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["QpProblem", "QpStatus", "solve_qp", "UNBOUNDED"]

# box entries at or beyond this magnitude are treated as unbounded
UNBOUNDED = 1e20

RHO = 1.0
ALPHA = 1.6
EPS_REL = 1e-8
EPS_ABS = 1e-10
MAX_ITER = 20000
EPS_INFEAS = 1e-6
CHECK_EVERY = 10


class QpStatus:
    SOLVED = "solved"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpProblem:
    """Dense QP data; validated on construction."""

    H: np.ndarray
    g: np.ndarray
    G: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        g = np.asarray(self.g, dtype=float).ravel()
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        n = H.shape[0]
        if H.shape != (n, n):
            raise ValueError("H must be square")
        sym_err = np.max(np.abs(H - H.T)) if n else 0.0
        if sym_err > 1e-10 * max(1.0, np.max(np.abs(H))):
            raise ValueError(f"H must be symmetric (asymmetry {sym_err:.3e})")
        if g.shape != (n,):
            raise ValueError(f"g must have {n} entries")
        if G.size == 0:
            G = G.reshape(0, n)
        if G.shape[1] != n:
            raise ValueError(f"G must have {n} columns")
        nc = G.shape[0]
        if lo.shape != (nc,) or hi.shape != (nc,):
            raise ValueError("lo/hi must have one entry per constraint row")
        if np.any(lo > hi):
            raise ValueError("lo > hi on some constraint row")
        for name, M in (("H", H), ("g", g), ("G", G)):
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_vars(self):
        return self.H.shape[0]

    @property
    def n_constraints(self):
        return self.G.shape[0]

    def objective(self, z):
        return 0.5 * z @ self.H @ z + self.g @ z


def _residuals(qp, z, y, s, Hz=None):
    """Unscaled primal/dual residual inf-norms and their relative scales."""
    Gz = qp.G @ z if qp.n_constraints else np.zeros(0)
    if Hz is None:
        Hz = qp.H @ z
    Gty = qp.G.T @ y if qp.n_constraints else np.zeros(qp.n_vars)
    r_prim = np.max(np.abs(Gz - s)) if qp.n_constraints else 0.0
    r_dual = np.max(np.abs(Hz + qp.g + Gty))
    scale_prim = max(_inf(Gz), _inf(s))
    scale_dual = max(_inf(Hz), _inf(Gty), _inf(qp.g))
    return r_prim, r_dual, scale_prim, scale_dual


def _inf(v):
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _violation(qp, z):
    if not qp.n_constraints:
        return 0.0
    Gz = qp.G @ z
    return float(max(np.max(qp.lo - Gz, initial=0.0), np.max(Gz - qp.hi, initial=0.0)))


def _polish(qp, z, y):
    """Solve the KKT system on the dual-identified active set.

    Returns a (z, y) candidate or None when no useful candidate exists.
    """
    n, nc = qp.n_vars, qp.n_constraints
    if nc == 0:
        return None
    Gz = qp.G @ z
    equality = qp.lo == qp.hi
    near = 1e-7 * np.maximum(1.0, np.abs(Gz))
    act_lo = equality | (y < -1e-12) | (Gz <= qp.lo + near)
    act_hi = ~equality & ((y > 1e-12) | (Gz >= qp.hi - near))
    # upper wins where both trigger on a non-equality row (can happen when lo ~ hi)
    act_lo = act_lo & ~act_hi
    idx = np.flatnonzero(act_lo | act_hi)
    if idx.size == 0:
        try:
            z_p = np.linalg.solve(qp.H, -qp.g)
        except np.linalg.LinAlgError:
            return None
        return z_p, np.zeros(nc)
    A_act = qp.G[idx]
    b_act = np.where(act_lo[idx], qp.lo[idx], qp.hi[idx])
    k = idx.size
    KKT = np.zeros((n + k, n + k))
    KKT[:n, :n] = qp.H
    KKT[:n, n:] = A_act.T
    KKT[n:, :n] = A_act
    rhs = np.concatenate([-qp.g, b_act])
    sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
    z_p = sol[:n]
    y_p = np.zeros(nc)
    y_p[idx] = sol[n:]
    return z_p, y_p


def solve_qp(qp, warm_start=None, max_iter=MAX_ITER, eps_rel=EPS_REL,
             rho=RHO, alpha=ALPHA):
    """Solve a QpProblem; returns ``(z, status)``.

    ``warm_start`` may be a primal iterate from a previous, similar problem.
    A returned ``solved`` status certifies constraint violation <= 1e-6 and
    primal/dual residuals within the relative tolerance; on iteration-budget
    exhaustion the best iterate is returned with ``max_iterations``.
    """
    n, nc = qp.n_vars, qp.n_constraints
    try:
        H_chol = cho_factor(qp.H + rho * (qp.G.T @ qp.G) if nc else qp.H)
    except np.linalg.LinAlgError:
        raise ValueError("H (plus penalty term) is not positive definite") from None

    if nc == 0:
        z = cho_solve(H_chol, -qp.g)
        return z, QpStatus.SOLVED

    G, GT = qp.G, qp.G.T
    lo, hi = qp.lo, qp.hi
    if warm_start is not None:
        z = np.asarray(warm_start, dtype=float).ravel().copy()
        if z.shape != (n,):
            raise ValueError(f"warm start must have {n} entries")
        s = np.clip(G @ z, lo, hi)
    else:
        z = np.zeros(n)
        s = np.clip(np.zeros(nc), lo, hi)
    y = np.zeros(nc)
    y_chk = y.copy()

    status = QpStatus.MAX_ITERATIONS
    for it in range(1, max_iter + 1):
        z = cho_solve(H_chol, -qp.g + GT @ (rho * s - y))
        Gz = G @ z
        Gz_rel = alpha * Gz + (1.0 - alpha) * s
        s = np.clip(Gz_rel + y / rho, lo, hi)
        y = y + rho * (Gz_rel - s)

        if it % CHECK_EVERY == 0:
            r_prim, r_dual, sc_p, sc_d = _residuals(qp, z, y, s)
            if (r_prim <= EPS_ABS + eps_rel * sc_p
                    and r_dual <= EPS_ABS + eps_rel * sc_d):
                status = QpStatus.SOLVED
                break
            dy = y - y_chk
            dy_norm = _inf(dy)
            if dy_norm > 0:
                support = (hi @ np.maximum(dy, 0.0) + lo @ np.minimum(dy, 0.0))
                if (_inf(GT @ dy) <= EPS_INFEAS * dy_norm
                        and support <= -EPS_INFEAS * dy_norm):
                    return z, QpStatus.INFEASIBLE
            y_chk = y.copy()

    polished = _polish(qp, z, y)
    if polished is not None:
        z_p, y_p = polished
        viol_p = _violation(qp, z_p)
        r_p, d_p, sp_p, sd_p = _residuals(qp, z_p, y_p, np.clip(G @ z_p, lo, hi))
        r_a, d_a, _, _ = _residuals(qp, z, y, s)
        if viol_p <= max(1e-9, _violation(qp, z)) and max(r_p, d_p) <= max(r_a, d_a):
            z = z_p
            if (r_p <= EPS_ABS + eps_rel * sp_p and d_p <= EPS_ABS + eps_rel * sd_p
                    and viol_p <= 1e-6):
                status = QpStatus.SOLVED
    return z, status
