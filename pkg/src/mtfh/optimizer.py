"""Discrete alternating minimisation of the tri-factorisation hashing objective.

Variables (all codes are stored as float64 arrays holding exactly -1.0/+1.0):

    U     n1 x q1   codes of modality X in its native length
    V     n2 x q2   codes of modality Y in its native length
    Uhat  n2 x q1   auxiliary: Y samples expressed in the q1-bit space
    Vhat  n1 x q2   auxiliary: X samples expressed in the q2-bit space
    H1,H2 q1 x q2   real correlation matrices

Objective::

    alpha ||S - U Uhat^T / q1||^2 + (1 - alpha) ||S - Vhat V^T / q2||^2
      + beta (||Uhat - V H1^T||^2 + ||Vhat - U H2||^2)
      + lambda (||H1||^2 + ||H2||^2)
"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

SCHEMES = ("ercd", "dcc")


class CorrelationPair(NamedTuple):
    H1: np.ndarray
    H2: np.ndarray


@dataclass(frozen=True)
class OptimizerConfig:
    q1: int
    q2: int
    alpha: float = 0.5
    beta: float = 0.1
    lam: float = 0.1
    rounds: int = 3
    max_iter: int = 20
    tol: float = 1e-4
    seed: int = 0
    scheme: str = "ercd"

    def __post_init__(self):
        if self.q1 < 1 or self.q2 < 1:
            raise ValueError("code lengths must be >= 1")
        if not 0 < self.alpha <= 1:
            # alpha = 1 is admitted as a boundary case for the column solvers
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.rounds < 1 or self.rounds % 2 == 0:
            raise ValueError(f"rounds must be an odd integer >= 1, got {self.rounds}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class TrainState:
    U: np.ndarray
    V: np.ndarray
    Uhat: np.ndarray
    Vhat: np.ndarray
    H: CorrelationPair
    objective_trace: list = field(default_factory=list)
    initial_objective: float = float("nan")

    @property
    def n_iter(self):
        return len(self.objective_trace)


def sign(x):
    """Elementwise sign with sign(0) = +1."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def _as_array(S):
    return np.asarray(getattr(S, "S", S), dtype=np.float64)


def check_dims(S, st, cfg):
    n1, n2 = S.shape
    q1, q2 = cfg.q1, cfg.q2
    expected = {"U": (n1, q1), "V": (n2, q2), "Uhat": (n2, q1), "Vhat": (n1, q2)}
    for name, shape in expected.items():
        got = getattr(st, name).shape
        if got != shape:
            raise ValueError(f"dimension mismatch: {name} is {got}, expected {shape}")
    for name, H in zip(("H1", "H2"), st.H):
        if H.shape != (q1, q2):
            raise ValueError(f"dimension mismatch: {name} is {H.shape}, expected {(q1, q2)}")


def objective(S, st, cfg):
    S = _as_array(S)
    check_dims(S, st, cfg)
    a, b, lam = cfg.alpha, cfg.beta, cfg.lam
    H1, H2 = st.H
    val = (a * np.sum((S - st.U @ st.Uhat.T / cfg.q1) ** 2)
           + (1 - a) * np.sum((S - st.Vhat @ st.V.T / cfg.q2) ** 2)
           + b * (np.sum((st.Uhat - st.V @ H1.T) ** 2) + np.sum((st.Vhat - st.U @ H2) ** 2))
           + lam * (np.sum(H1 ** 2) + np.sum(H2 ** 2)))
    return float(val)


def update_H(st, beta, lam):
    """Closed-form ridge solutions for H1 and H2 given the four code matrices.

    With lam == 0 the normal equations may be singular; a minimum-norm
    least-squares solve is used instead.
    """
    U, V, Uhat, Vhat = st.U, st.V, st.Uhat, st.Vhat
    if lam > 0:
        ridge = lam / beta
        # H1 = Uhat^T V (V^T V + ridge I)^-1, solved through the symmetric system
        H1 = np.linalg.solve(V.T @ V + ridge * np.eye(V.shape[1]), V.T @ Uhat).T
        H2 = np.linalg.solve(U.T @ U + ridge * np.eye(U.shape[1]), U.T @ Vhat)
        return CorrelationPair(H1, H2)
    H1t, _, rank1, _ = np.linalg.lstsq(V, Uhat, rcond=None)
    H2, _, rank2, _ = np.linalg.lstsq(U, Vhat, rcond=None)
    if rank1 < V.shape[1] or rank2 < U.shape[1]:
        warnings.warn("H-step system is singular with lambda=0; using the minimum-norm solution",
                      RuntimeWarning, stacklevel=2)
    return CorrelationPair(H1t.T, H2)


def _others(q, l):
    if not 0 <= l < q:
        raise IndexError(f"column index {l} out of range for {q} columns")
    return np.arange(q) != l


def u_column_solution(l, st, S, cfg):
    S = _as_array(S)
    a, b, q1 = cfg.alpha, cfg.beta, cfg.q1
    keep = _others(q1, l)
    H2 = st.H.H2
    uhat, h2 = st.Uhat[:, l], H2[l]
    p1 = a / q1 * (S @ uhat) + b * (st.Vhat @ h2)
    Up = st.U[:, keep]
    arg = p1 - a / q1 ** 2 * (Up @ (st.Uhat[:, keep].T @ uhat)) - b * (Up @ (H2[keep] @ h2))
    return sign(arg)


def uhat_column_solution(l, st, S, cfg):
    S = _as_array(S)
    a, b, q1 = cfg.alpha, cfg.beta, cfg.q1
    keep = _others(q1, l)
    u = st.U[:, l]
    p2 = a / q1 * (S.T @ u) + b * (st.V @ st.H.H1[l])
    arg = p2 - a / q1 ** 2 * (st.Uhat[:, keep] @ (st.U[:, keep].T @ u))
    return sign(arg)


def v_column_solution(t, st, S, cfg):
    S = _as_array(S)
    a, b, q2 = 1.0 - cfg.alpha, cfg.beta, cfg.q2
    keep = _others(q2, t)
    H1 = st.H.H1
    vhat, h1 = st.Vhat[:, t], H1[:, t]
    p3 = a / q2 * (S.T @ vhat) + b * (st.Uhat @ h1)
    Vp = st.V[:, keep]
    arg = p3 - a / q2 ** 2 * (Vp @ (st.Vhat[:, keep].T @ vhat)) - b * (Vp @ (H1[:, keep].T @ h1))
    return sign(arg)


def vhat_column_solution(k, st, S, cfg):
    # The cross term is Vhat' V'^T v (n1-vector); see module docstring for shapes.
    S = _as_array(S)
    a, b, q2 = 1.0 - cfg.alpha, cfg.beta, cfg.q2
    keep = _others(q2, k)
    v = st.V[:, k]
    p4 = a / q2 * (S @ v) + b * (st.U @ st.H.H2[:, k])
    arg = p4 - a / q2 ** 2 * (st.Vhat[:, keep] @ (st.V[:, keep].T @ v))
    return sign(arg)


COLUMN_SOLVERS = {
    "U": u_column_solution,
    "Uhat": uhat_column_solution,
    "V": v_column_solution,
    "Vhat": vhat_column_solution,
}


def coordinate_pass(B, column_solver, order, on_column=None):
    """One sweep of discrete coordinate descent over columns in ``order``.

    Updated columns are visible to later columns of the same sweep.
    """
    B = np.array(B, dtype=np.float64, copy=True)
    for l in order:
        B[:, l] = column_solver(B, int(l))
        if on_column is not None:
            on_column(B, int(l))
    return B


def ercd_update(B, column_solver, r, rng, on_column=None):
    """Ensemble randomised coordinate descent.

    Runs ``r`` independent random-order sweeps, each starting from ``B``,
    and returns the entrywise majority vote. Pass ``tau`` draws its column
    order from the ``tau``-th child stream of ``rng``.
    """
    if r < 1 or r % 2 == 0:
        raise ValueError(f"ensemble rounds must be odd and >= 1, got {r}")
    B = np.asarray(B, dtype=np.float64)
    q = B.shape[1]
    total = np.zeros_like(B)
    for pass_rng in rng.spawn(r):
        total += coordinate_pass(B, column_solver, pass_rng.permutation(q), on_column)
    return sign(total)


def dcc_update(B, column_solver, on_column=None):
    """Discrete cyclic coordinate descent: one sweep in column order."""
    B = np.asarray(B, dtype=np.float64)
    return coordinate_pass(B, column_solver, range(B.shape[1]), on_column)


def init_state(n1, n2, cfg):
    rng = np.random.default_rng(cfg.seed)
    H = CorrelationPair(rng.standard_normal((cfg.q1, cfg.q2)),
                        rng.standard_normal((cfg.q1, cfg.q2)))

    def codes(shape):
        return np.where(rng.random(shape) < 0.5, -1.0, 1.0)

    return TrainState(U=codes((n1, cfg.q1)), V=codes((n2, cfg.q2)),
                      Uhat=codes((n2, cfg.q1)), Vhat=codes((n1, cfg.q2)), H=H)


def train_codes(S, cfg, monitor: Callable[[str, TrainState], None] | None = None):
    """Learn U, V, Uhat, Vhat, H1, H2 for affinity ``S``.

    ``monitor(event, state)`` is called after every H-step, after every
    single column update under the dcc scheme, and after every ensemble vote
    under ercd. The objective is recorded once per outer iteration.
    """
    S = _as_array(S)
    if S.ndim != 2 or min(S.shape) < 1:
        raise ValueError(f"affinity must be a non-empty 2-D matrix, got shape {S.shape}")
    n1, n2 = S.shape
    st = init_state(n1, n2, cfg)
    prev = objective(S, st, cfg)
    if not np.isfinite(prev):
        raise FloatingPointError("objective is non-finite at initialisation")
    st.initial_objective = prev

    for it in range(cfg.max_iter):
        st.H = update_H(st, cfg.beta, cfg.lam)
        if monitor is not None:
            monitor("H", st)
        for k, (name, solver) in enumerate(COLUMN_SOLVERS.items()):
            def column(B, l, name=name, solver=solver):
                return solver(l, replace(st, **{name: B}), S, cfg)

            on_column = None
            if monitor is not None and cfg.scheme == "dcc":
                def on_column(B, l, name=name):
                    monitor(f"{name}[{l}]", replace(st, **{name: B}))

            if cfg.scheme == "dcc":
                new = dcc_update(getattr(st, name), column, on_column)
            else:
                step_rng = np.random.default_rng([cfg.seed, it, k])
                new = ercd_update(getattr(st, name), column, cfg.rounds, step_rng)
            setattr(st, name, new)
            if monitor is not None and cfg.scheme != "dcc":
                monitor(name, st)

        obj = objective(S, st, cfg)
        if not np.isfinite(obj):
            raise FloatingPointError(f"objective became non-finite at iteration {it + 1}")
        st.objective_trace.append(obj)
        log.debug("iteration %d objective %.6g", it + 1, obj)
        if abs(prev - obj) < cfg.tol * max(abs(prev), np.finfo(float).tiny):
            break
        prev = obj
    return st
