"""Condensed MPC tracking problems over input increments, for SS and ARX models.

Both builders produce the same QP shape: decision vector
``z = [du_0; ...; du_{T-1}]``, cost
``sum_t ||y_{t+1} - r_{t+1}||^2_Wy + ||du_t||^2_Wdu``, and stacked box rows
for du, u and predicted y (in that order).  The only difference is how the
predicted outputs are unrolled: from the state-space recursion with a known
initial state, or from the ARX recursion over past input-output data.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistoryError
from .qp import QpProblem, UNBOUNDED, solve_qp

__all__ = [
    "MpcConfig",
    "ReferenceSignal",
    "EstimatorState",
    "StepDiagnostics",
    "build_ss_mpc_qp",
    "build_arx_mpc_qp",
    "kalman_filter_step",
    "mpc_step_ss",
    "mpc_step_arx",
]


def _bound_vec(value, size, default):
    if value is None:
        return np.full(size, default)
    v = np.asarray(value, dtype=float).ravel()
    if v.size == 1 and size > 1:
        v = np.full(size, v[0])
    if v.shape != (size,):
        raise ValueError(f"bound must have {size} entries, got {v.shape}")
    return v


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, diagonal weights and box bounds of the tracking problem.

    ``w_y`` and ``w_du`` are the diagonals of the output and input-increment
    weights; ``w_du`` must be strictly positive so the condensed Hessian is
    positive definite.  Missing bounds mean unbounded.
    """

    horizon: int
    w_y: np.ndarray
    w_du: np.ndarray
    y_min: np.ndarray = None
    y_max: np.ndarray = None
    u_min: np.ndarray = None
    u_max: np.ndarray = None
    du_min: np.ndarray = None
    du_max: np.ndarray = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        w_y = np.asarray(self.w_y, dtype=float).ravel()
        w_du = np.asarray(self.w_du, dtype=float).ravel()
        if np.any(w_y < 0):
            raise ValueError("output weights must be nonnegative")
        if np.any(w_du <= 0):
            raise ValueError("input-increment weights must be strictly positive")
        m, q = w_y.size, w_du.size
        object.__setattr__(self, "w_y", w_y)
        object.__setattr__(self, "w_du", w_du)
        object.__setattr__(self, "y_min", _bound_vec(self.y_min, m, -UNBOUNDED))
        object.__setattr__(self, "y_max", _bound_vec(self.y_max, m, UNBOUNDED))
        object.__setattr__(self, "u_min", _bound_vec(self.u_min, q, -UNBOUNDED))
        object.__setattr__(self, "u_max", _bound_vec(self.u_max, q, UNBOUNDED))
        object.__setattr__(self, "du_min", _bound_vec(self.du_min, q, -UNBOUNDED))
        object.__setattr__(self, "du_max", _bound_vec(self.du_max, q, UNBOUNDED))
        for lo, hi, what in ((self.y_min, self.y_max, "y"),
                             (self.u_min, self.u_max, "u"),
                             (self.du_min, self.du_max, "du")):
            if np.any(lo > hi):
                raise ValueError(f"{what}_min exceeds {what}_max")

    @property
    def n_outputs(self):
        return self.w_y.size

    @property
    def n_inputs(self):
        return self.w_du.size


@dataclass(frozen=True)
class ReferenceSignal:
    """Output reference indexed by absolute simulation time."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(v)):
            raise ValueError("reference contains non-finite entries")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def window(self, t, horizon):
        """References ``r[t+1] .. r[t+horizon]`` as a (horizon, m) array."""
        if t + 1 + horizon > len(self):
            raise ValueError(
                f"reference of length {len(self)} too short for step {t} "
                f"with horizon {horizon}")
        return self.values[t + 1:t + 1 + horizon]


@dataclass(frozen=True)
class EstimatorState:
    """Current state estimate of an observer/Kalman filter."""

    x_hat: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("state estimate contains non-finite entries")
        x.flags.writeable = False
        object.__setattr__(self, "x_hat", x)


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step solver outcome: QP status and predicted horizon cost."""

    status: str
    predicted_cost: float


def _condense(step_resp, y_free, u_prev, refs, cfg):
    """Assemble the QP from prediction pieces shared by both model classes.

    ``step_resp[t, j]`` (as (T, T) blocks of (m, q)) maps ``du_j`` to
    ``y_{t+1}``; ``y_free`` is the (T, m) predicted output with all du = 0.
    """
    T = cfg.horizon
    m, q = cfg.n_outputs, cfg.n_inputs
    S = step_resp
    refs = np.atleast_2d(np.asarray(refs, dtype=float))
    if refs.shape != (T, m):
        raise ValueError(f"need {T} reference rows of dimension {m}, got {refs.shape}")
    u_prev = np.asarray(u_prev, dtype=float).ravel()
    if u_prev.shape != (q,):
        raise ValueError(f"u_prev must have {q} entries")

    Wy = np.tile(cfg.w_y, T)
    Wdu = np.tile(cfg.w_du, T)
    err_free = (y_free - refs).ravel()
    H = 2.0 * (S.T @ (Wy[:, None] * S) + np.diag(Wdu))
    H = 0.5 * (H + H.T)
    g = 2.0 * (S.T @ (Wy * err_free))

    nz = q * T
    # constraint rows: du box, then u box (cumulative sums), then y box
    G_du = np.eye(nz)
    G_u = np.kron(np.tril(np.ones((T, T))), np.eye(q))
    rows = [G_du, G_u, S]
    lo = [np.tile(cfg.du_min, T),
          np.tile(cfg.u_min - u_prev, T),
          np.tile(cfg.y_min, T) - y_free.ravel()]
    hi = [np.tile(cfg.du_max, T),
          np.tile(cfg.u_max - u_prev, T),
          np.tile(cfg.y_max, T) - y_free.ravel()]
    # unbounded rows stay unbounded regardless of the free-response shift
    lo = np.concatenate(lo)
    hi = np.concatenate(hi)
    lo = np.where(lo < -UNBOUNDED, -UNBOUNDED, lo)
    hi = np.where(hi > UNBOUNDED, UNBOUNDED, hi)
    return QpProblem(H=H, g=g, G=np.vstack(rows), lo=lo, hi=hi)


def build_ss_mpc_qp(dss, x0, u_prev, refs, cfg):
    """Condensed tracking QP for a state-space prediction model.

    Predictions are unrolled from ``x0`` with ``u_t = u_{t-1} + du_t``; the
    returned problem is in the stacked du vector.
    """
    n, q, m = dss.n_states, dss.n_inputs, dss.n_outputs
    if cfg.n_outputs != m or cfg.n_inputs != q:
        raise ValueError("config dimensions do not match the model")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (n,):
        raise ValueError(f"x0 must have {n} entries")
    T = cfg.horizon
    # markov[i] = C A^i B, cumulative sums give the step response
    markov = np.empty((T, m, q))
    CA = dss.C.copy()
    y_free = np.empty((T, m))
    u_prev_arr = np.asarray(u_prev, dtype=float).ravel()
    x_free = x0
    for i in range(T):
        markov[i] = CA @ dss.B
        CA = CA @ dss.A
        x_free = dss.A @ x_free + dss.B @ u_prev_arr
        y_free[i] = dss.C @ x_free
    step = np.cumsum(markov, axis=0)
    S = np.zeros((m * T, q * T))
    for t in range(T):
        for j in range(t + 1):
            S[t * m:(t + 1) * m, j * q:(j + 1) * q] = step[t - j]
    return _condense(S, y_free, u_prev_arr, refs, cfg)


def _arx_markov(arx, count):
    """First ``count`` impulse-response matrices of the ARX recursion."""
    m, q = arx.n_outputs, arx.n_inputs
    H = np.zeros((count, m, q))
    for j in range(count):
        Hj = arx.u_coeffs[j].copy() if j < arx.order else np.zeros((m, q))
        for i in range(min(j, arx.order)):
            Hj += arx.y_coeffs[i] @ H[j - 1 - i]
        H[j] = Hj
    return H


def build_arx_mpc_qp(arx, history, u_prev, refs, cfg):
    """Condensed tracking QP with predictions unrolled from an ARX recursion.

    The free response comes from the rolling history with all future inputs
    held at ``u_prev``; the forced response uses the model's step-response
    coefficients, giving the same QP structure as the state-space builder.
    """
    m, q = arx.n_outputs, arx.n_inputs
    if cfg.n_outputs != m or cfg.n_inputs != q:
        raise ValueError("config dimensions do not match the model")
    p = arx.order
    if len(history.y_past) < p or len(history.u_past) < p:
        raise InsufficientHistoryError(
            f"history holds {len(history)} steps but the ARX model has order {p}")
    T = cfg.horizon
    u_prev_arr = np.asarray(u_prev, dtype=float).ravel()

    ys = [np.asarray(y) for y in history.y_past[:p]]
    us = [np.asarray(u) for u in history.u_past[:p]]
    y_free = np.empty((T, m))
    for t in range(T):
        y_next = arx.u_coeffs[0] @ u_prev_arr
        for i in range(p):
            y_next = y_next + arx.y_coeffs[i] @ ys[i]
            if i >= 1:
                y_next = y_next + arx.u_coeffs[i] @ us[i - 1]
        y_free[t] = y_next
        ys = [y_next] + ys[:-1]
        us = [u_prev_arr] + us[:-1]

    step = np.cumsum(_arx_markov(arx, T), axis=0)
    S = np.zeros((m * T, q * T))
    for t in range(T):
        for j in range(t + 1):
            S[t * m:(t + 1) * m, j * q:(j + 1) * q] = step[t - j]
    return _condense(S, y_free, u_prev_arr, refs, cfg)


def kalman_filter_step(dss, K, est, u, y):
    """One predictor update: ``x+ = A x + B u + K (y - C x)``."""
    x = est.x_hat if isinstance(est, EstimatorState) else np.asarray(est, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    innovation = y - dss.C @ x
    return EstimatorState(dss.A @ x + dss.B @ u + np.asarray(K) @ innovation)


def _step(qp, u_prev, refs, y_free, cfg, warm):
    z, status = solve_qp(qp, warm_start=warm)
    q = cfg.n_inputs
    du = z[:q]
    u = np.asarray(u_prev, dtype=float).ravel() + du
    Wy = np.tile(cfg.w_y, cfg.horizon)
    err_free = (np.asarray(y_free) - np.atleast_2d(refs)).ravel()
    const = err_free @ (Wy * err_free)
    diag = StepDiagnostics(status=status, predicted_cost=float(qp.objective(z) + const))
    return u, du, diag, z


def mpc_step_ss(dss, state, u_prev, refs, cfg, warm=None):
    """One receding-horizon step with the state-space QP.

    ``state`` is the current state estimate (EstimatorState or array).
    Returns ``(u_applied, du, diagnostics)``; the full decision vector is
    available from the lower-level builder + solver when needed.
    """
    x0 = state.x_hat if isinstance(state, EstimatorState) else state
    qp = build_ss_mpc_qp(dss, x0, u_prev, refs, cfg)
    y_free = _free_response_from_qp(qp, cfg)
    u, du, diag, _ = _step(qp, u_prev, refs, y_free, cfg, warm)
    return u, du, diag


def mpc_step_arx(arx, history, u_prev, refs, cfg, warm=None):
    """One receding-horizon step with the ARX QP (same contract as mpc_step_ss)."""
    qp = build_arx_mpc_qp(arx, history, u_prev, refs, cfg)
    y_free = _free_response_from_qp(qp, cfg)
    u, du, diag, _ = _step(qp, u_prev, refs, y_free, cfg, warm)
    return u, du, diag


def _free_response_from_qp(qp, cfg):
    # y rows are the last m*T constraint rows; their upper bound is
    # y_max - y_free, so recover y_free where y_max is finite, else from y_min.
    T, m = cfg.horizon, cfg.n_outputs
    hi = qp.hi[-m * T:]
    lo = qp.lo[-m * T:]
    ymax = np.tile(cfg.y_max, T)
    ymin = np.tile(cfg.y_min, T)
    y_free = np.where(np.abs(ymax) < UNBOUNDED, ymax - hi, ymin - lo)
    # rows unbounded on both sides contribute zero tracking error only if the
    # weight is zero; rebuild those from the linear term instead
    both_unbounded = (np.abs(ymax) >= UNBOUNDED) & (np.abs(ymin) >= UNBOUNDED)
    if np.any(both_unbounded):
        raise ValueError("free response not recoverable from fully unbounded y rows")
    return y_free.reshape(T, m)
