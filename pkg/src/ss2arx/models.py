"""Linear state-space and ARX model types, exact discretization, and open-loop simulation.

Conventions used throughout:

* state-space models are ``x[t+1] = A x[t] + B u[t]``, ``y[t] = C x[t]``
  with ``n`` states, ``q`` inputs and ``m`` outputs;
* an ARX model of order ``p`` is
  ``y[t] = sum_i(y_coeffs[i-1] @ y[t-i] + u_coeffs[i-1] @ u[t-i])``, ``i = 1..p``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import InsufficientHistoryError

__all__ = [
    "ContinuousStateSpace",
    "DiscreteStateSpace",
    "ArxModel",
    "IoHistory",
    "discretize_exact",
    "char_poly",
    "simulate_ss",
    "simulate_arx",
]


def _frozen_matrix(M, name, ndim=2):
    """Copy to a float array, require finite entries, and make it read-only."""
    M = np.array(M, dtype=float)
    if M.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    M.flags.writeable = False
    return M


@dataclass(frozen=True)
class ContinuousStateSpace:
    """Continuous-time linear model ``dx/dt = A_c x + B_c u``, ``y = C x``."""

    A_c: np.ndarray
    B_c: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A_c", _frozen_matrix(self.A_c, "A_c"))
        object.__setattr__(self, "B_c", _frozen_matrix(self.B_c, "B_c"))
        object.__setattr__(self, "C", _frozen_matrix(self.C, "C"))
        n = self.A_c.shape[0]
        if self.A_c.shape != (n, n):
            raise ValueError("A_c must be square")
        if self.B_c.shape[0] != n:
            raise ValueError("B_c must have as many rows as A_c")
        if self.C.shape[1] != n:
            raise ValueError("C must have as many columns as A_c")

    @property
    def n_states(self):
        return self.A_c.shape[0]

    @property
    def n_inputs(self):
        return self.B_c.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class DiscreteStateSpace:
    """Discrete-time linear model ``x[t+1] = A x[t] + B u[t]``, ``y[t] = C x[t]``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen_matrix(self.A, "A"))
        object.__setattr__(self, "B", _frozen_matrix(self.B, "B"))
        object.__setattr__(self, "C", _frozen_matrix(self.C, "C"))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n:
            raise ValueError("B must have as many rows as A")
        if self.C.shape[1] != n:
            raise ValueError("C must have as many columns as A")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be strictly positive, got {self.dt}")

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class ArxModel:
    """MIMO ARX model: ``p`` lagged output coefficient matrices and input coefficient matrices.

    ``y_coeffs[i]`` is the (m, m) matrix multiplying ``y[t-i-1]`` and
    ``u_coeffs[i]`` the (m, q) matrix multiplying ``u[t-i-1]``.
    """

    order: int
    y_coeffs: tuple = field(repr=False)
    u_coeffs: tuple = field(repr=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be a positive integer")
        if len(self.y_coeffs) != self.order or len(self.u_coeffs) != self.order:
            raise ValueError("need exactly `order` coefficient matrices per side")
        ys = tuple(_frozen_matrix(M, f"y_coeffs[{i}]") for i, M in enumerate(self.y_coeffs))
        us = tuple(_frozen_matrix(M, f"u_coeffs[{i}]") for i, M in enumerate(self.u_coeffs))
        m = ys[0].shape[0]
        if any(M.shape != (m, m) for M in ys):
            raise ValueError("all output coefficient matrices must be (m, m)")
        q = us[0].shape[1]
        if any(M.shape != (m, q) for M in us):
            raise ValueError("all input coefficient matrices must be (m, q)")
        object.__setattr__(self, "y_coeffs", ys)
        object.__setattr__(self, "u_coeffs", us)

    @property
    def n_outputs(self):
        return self.y_coeffs[0].shape[0]

    @property
    def n_inputs(self):
        return self.u_coeffs[0].shape[1]


@dataclass(frozen=True)
class IoHistory:
    """Rolling window of past outputs and inputs feeding an ARX recursion.

    ``y_past[0]`` is the newest output ``y[t]`` and ``u_past[0]`` the newest
    input ``u[t-1]``; entries age toward the end of each tuple.  ``push``
    returns a new window shifted by one step, discarding the oldest entries.
    """

    y_past: tuple
    u_past: tuple

    def __post_init__(self):
        ys = tuple(np.array(y, dtype=float).ravel() for y in self.y_past)
        us = tuple(np.array(u, dtype=float).ravel() for u in self.u_past)
        if not ys or not us:
            raise ValueError("history must contain at least one output and one input")
        if any(y.shape != ys[0].shape for y in ys):
            raise ValueError("output history entries have inconsistent dimensions")
        if any(u.shape != us[0].shape for u in us):
            raise ValueError("input history entries have inconsistent dimensions")
        for v in ys + us:
            if not np.all(np.isfinite(v)):
                raise ValueError("history contains non-finite entries")
            v.flags.writeable = False
        object.__setattr__(self, "y_past", ys)
        object.__setattr__(self, "u_past", us)

    def __len__(self):
        return min(len(self.y_past), len(self.u_past))

    def push(self, y, u):
        """Age the window by one step: ``y`` is the new ``y[t]``, ``u`` the new ``u[t-1]``."""
        ys = (np.asarray(y, dtype=float).ravel(),) + self.y_past[:-1]
        us = (np.asarray(u, dtype=float).ravel(),) + self.u_past[:-1]
        return IoHistory(ys, us)

    @staticmethod
    def zeros(p, m, q):
        """All-zero history window of depth ``p`` for m outputs / q inputs."""
        return IoHistory(tuple(np.zeros(m) for _ in range(p)),
                         tuple(np.zeros(q) for _ in range(p)))


def discretize_exact(css, dt):
    """Zero-order-hold discretization of a continuous-time model.

    Computes ``A = exp(A_c dt)`` and ``B = int_0^dt exp(A_c s) ds B_c`` in one
    matrix exponential of the augmented block matrix ``[[A_c, B_c], [0, 0]] dt``;
    ``C`` carries over unchanged.

    Parameters
    ----------
    css : ContinuousStateSpace
    dt : float
        Sample time in seconds, strictly positive.

    Returns
    -------
    DiscreteStateSpace
    """
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be strictly positive, got {dt}")
    n, q = css.n_states, css.n_inputs
    M = np.zeros((n + q, n + q))
    M[:n, :n] = css.A_c
    M[:n, n:] = css.B_c
    E = expm(M * dt)
    return DiscreteStateSpace(A=E[:n, :n], B=E[:n, n:], C=css.C, dt=dt)


def char_poly(A):
    """Coefficients ``[c_1, ..., c_n]`` of ``det(lambda I - A)`` (monic, leading 1 omitted).

    Uses the Faddeev-LeVerrier trace recurrence: deterministic, real
    arithmetic only, and satisfies ``A^n + c_1 A^(n-1) + ... + c_n I = 0``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("A contains non-finite entries")
    I = np.eye(n)
    Mk = I
    c = np.empty(n)
    for k in range(1, n + 1):
        AM = A @ Mk
        c[k - 1] = -np.trace(AM) / k
        Mk = AM + c[k - 1] * I
    return c


def simulate_ss(dss, x0, inputs, noise=None):
    """Roll a discrete state-space model forward over an input sequence.

    Parameters
    ----------
    dss : DiscreteStateSpace
    x0 : (n,) array_like
        Initial state.
    inputs : (N, q) array_like
        Input sequence ``u[0..N-1]``, N >= 1.
    noise : (w, v) pair of array_like, optional
        Process noise ``w`` of shape (N, n) added to each transition and
        measurement noise ``v`` of shape (N+1, m) added to each output.

    Returns
    -------
    states : (N+1, n) ndarray
    outputs : (N+1, m) ndarray
        Outputs ``y[0..N]`` including the initial output.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, q, m = dss.n_states, dss.n_inputs, dss.n_outputs
    N = U.shape[0]
    if N < 1 or U.shape[1] != q:
        raise ValueError(f"inputs must be (N, {q}) with N >= 1, got {U.shape}")
    if x0.shape != (n,):
        raise ValueError(f"x0 must have {n} entries, got {x0.shape}")
    if noise is not None:
        W = np.atleast_2d(np.asarray(noise[0], dtype=float))
        V = np.atleast_2d(np.asarray(noise[1], dtype=float))
        if W.shape != (N, n):
            raise ValueError(f"process noise must be ({N}, {n}), got {W.shape}")
        if V.shape != (N + 1, m):
            raise ValueError(f"measurement noise must be ({N + 1}, {m}), got {V.shape}")
    else:
        W = np.zeros((N, n))
        V = np.zeros((N + 1, m))
    X = np.empty((N + 1, n))
    Y = np.empty((N + 1, m))
    X[0] = x0
    for k in range(N):
        Y[k] = dss.C @ X[k] + V[k]
        X[k + 1] = dss.A @ X[k] + dss.B @ U[k] + W[k]
    Y[N] = dss.C @ X[N] + V[N]
    return X, Y


def simulate_arx(arx, history, inputs):
    """Iterate an ARX recursion over an input sequence.

    Each produced output and consumed input is pushed into a (local copy of
    the) rolling history; the given `history` is not modified.  Returns the
    (N, m) array of produced outputs.
    """
    p = arx.order
    if len(history.y_past) < p or len(history.u_past) < p:
        raise InsufficientHistoryError(
            f"history holds {len(history)} steps but the ARX model has order {p}")
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    if U.shape[1] != arx.n_inputs:
        raise ValueError(f"inputs must have {arx.n_inputs} columns, got {U.shape[1]}")
    ys = [np.asarray(y) for y in history.y_past[:p]]
    us = [np.asarray(u) for u in history.u_past[:p]]
    out = np.empty((U.shape[0], arx.n_outputs))
    for t in range(U.shape[0]):
        u_now = U[t]
        y_next = arx.u_coeffs[0] @ u_now
        for i in range(p):
            y_next = y_next + arx.y_coeffs[i] @ ys[i]
            if i >= 1:
                y_next = y_next + arx.u_coeffs[i] @ us[i - 1]
        out[t] = y_next
        ys = [y_next] + ys[:-1]
        us = [u_now] + us[:-1]
    return out
