"""Dense pseudolinear regression (PLR) with exponential forgetting.

The regressor is the estimated state of the innovations model, rebuilt from
past *estimated* residuals, so ordinary recursive least squares applies to
the output coefficients:

    eps[t]   = y[t] - chat[t-1]* zhat[t]          (prediction residual)
    chat[t]  = chat[t-1] + Phi[t-1] zhat[t] eps[t]* / (delta + zhat[t]* Phi[t-1] zhat[t])
    zhat[t+1]= A zhat[t] + b eps[t]

with ``Phi = Phat^-1`` maintained by the matrix inversion identity and the
weighted covariance pair updated as ``Phat <- delta Phat + z z*``,
``d <- delta d + z y*``.  Cost is O(n^2) per step.

This is the correctness reference for the fast square-root filter: every
fast-path quantity is checked against trajectories produced here.  Both
``Phat`` and ``Phi`` are carried (redundantly) so the inversion-identity
invariant stays directly testable; ``plr_step_direct`` re-solves the normal
equations from scratch each step and exists purely as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConditioningError, ConfigError
from .validation import as_complex_matrix, as_complex_vector, check_forgetting


@dataclass
class DensePlrState:
    """Mutable single-owner state of a dense PLR run."""

    t: int
    delta: float
    A: np.ndarray
    b: np.ndarray
    Phat: np.ndarray
    Phi: np.ndarray
    d: np.ndarray
    chat: np.ndarray
    zhat: np.ndarray
    # trajectory capture for displacement oracles; disabled by default
    record: bool = False
    zhat_trace: list = field(default_factory=list)
    eps_trace: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.b.shape[0]


def plr_init(A, b, P0, c0=None, delta: float = 0.99, z1=None, record: bool = False) -> DensePlrState:
    """Start a PLR run.

    ``P0`` must be Hermitian positive definite.  The prewindowed default sets
    ``zhat = 0`` and ``chat = 0``; the implied initial cross-covariance is
    ``d0 = P0 c0``.
    """
    A = as_complex_matrix(A, name="A")
    n = A.shape[0]
    b = as_complex_vector(b, n, name="b")
    delta = check_forgetting(delta)
    P0 = as_complex_matrix(P0, (n, n), name="P0")
    if np.linalg.norm(P0 - P0.conj().T) > 1e-12 * max(1.0, np.linalg.norm(P0)):
        raise ConfigError("P0 must be Hermitian")
    try:
        np.linalg.cholesky(P0)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("P0 must be positive definite") from exc
    c0 = np.zeros(n, dtype=complex) if c0 is None else as_complex_vector(c0, n, name="c0")
    z1 = np.zeros(n, dtype=complex) if z1 is None else as_complex_vector(z1, n, name="z1")
    return DensePlrState(
        t=0,
        delta=delta,
        A=A,
        b=b,
        Phat=P0.copy(),
        Phi=np.linalg.inv(P0),
        d=P0 @ c0,
        chat=c0.copy(),
        zhat=z1.copy(),
        record=record,
    )


def _ingest_regressor(state: DensePlrState, z: np.ndarray, y: complex) -> complex:
    """RLS core: update covariances and coefficients for one (regressor, output) pair.

    Kept separate from the state advance so the least-squares behaviour can be
    tested with exogenously supplied regressors.
    """
    eps = y - np.vdot(state.chat, z)
    Pz = state.Phi @ z
    denom = state.delta + float(np.real(np.vdot(z, Pz)))
    if denom <= 0.0:
        raise ConditioningError(f"nonpositive gain denominator {denom:.3g}; state invariants violated")
    state.chat = state.chat + Pz * (np.conj(eps) / denom)
    Phi = (state.Phi - np.outer(Pz, Pz.conj()) / denom) / state.delta
    state.Phi = 0.5 * (Phi + Phi.conj().T)
    Phat = state.delta * state.Phat + np.outer(z, z.conj())
    state.Phat = 0.5 * (Phat + Phat.conj().T)
    state.d = state.delta * state.d + z * np.conj(y)
    return eps


def _advance(state: DensePlrState, eps: complex) -> None:
    if state.record:
        state.zhat_trace.append(state.zhat.copy())
        state.eps_trace.append(eps)
    state.zhat = state.A @ state.zhat + state.b * eps
    state.t += 1


def plr_step(state: DensePlrState, y: complex) -> complex:
    """Process one measurement; returns the prediction residual."""
    eps = _ingest_regressor(state, state.zhat, y)
    _advance(state, eps)
    return eps


def plr_step_direct(state: DensePlrState, y: complex) -> complex:
    """Oracle variant: identical contract to ``plr_step`` but solves the
    accumulated normal equations afresh each step (O(n^3))."""
    z = state.zhat
    eps = y - np.vdot(state.chat, z)
    Phat = state.delta * state.Phat + np.outer(z, z.conj())
    state.Phat = 0.5 * (Phat + Phat.conj().T)
    state.d = state.delta * state.d + z * np.conj(y)
    try:
        state.chat = np.linalg.solve(state.Phat, state.d)
        state.Phi = np.linalg.inv(state.Phat)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("empirical covariance is singular") from exc
    _advance(state, eps)
    return eps


def plr_step_aposteriori(state: DensePlrState, y: complex) -> complex:
    """Dense PLR with the coefficient update driven by the a-posteriori residual.

    The new coefficients satisfy the implicit relation
    ``chat[t] = chat[t-1] + Phi zhat eps_post* / (delta + zhat* Phi zhat)`` with
    ``eps_post = y - chat[t]* zhat``; the rank-one solve is closed-form.  The
    covariance pair and the state advance (which keeps using the prediction
    residual) are unchanged.  Returns the a-posteriori residual.
    """
    z = state.zhat
    eps_prior = y - np.vdot(state.chat, z)
    Pz = state.Phi @ z
    s = float(np.real(np.vdot(z, Pz)))
    denom = state.delta + s
    if denom <= 0.0:
        raise ConditioningError(f"nonpositive gain denominator {denom:.3g}")
    rhs = state.chat + Pz * (np.conj(y) / denom)
    state.chat = rhs - Pz * (np.vdot(z, rhs) / (state.delta + 2.0 * s))
    eps_post = y - np.vdot(state.chat, z)
    Phi = (state.Phi - np.outer(Pz, Pz.conj()) / denom) / state.delta
    state.Phi = 0.5 * (Phi + Phi.conj().T)
    Phat = state.delta * state.Phat + np.outer(z, z.conj())
    state.Phat = 0.5 * (Phat + Phat.conj().T)
    state.d = state.delta * state.d + z * np.conj(y)
    _advance(state, eps_prior)
    return eps_post


def lms_step(state: DensePlrState, y: complex, mu: float) -> complex:
    """Least-mean-squares variant: the inverse covariance weighting is replaced
    by a scalar step size, ``chat <- chat + mu zhat eps*`` (gradient descent on
    the squared residual).  Covariance bookkeeping and the state advance are
    identical to ``plr_step``."""
    if mu <= 0.0:
        raise ConfigError(f"step size must be positive, got {mu}")
    z = state.zhat
    eps = y - np.vdot(state.chat, z)
    state.chat = state.chat + mu * z * np.conj(eps)
    Pz = state.Phi @ z
    denom = state.delta + float(np.real(np.vdot(z, Pz)))
    Phi = (state.Phi - np.outer(Pz, Pz.conj()) / denom) / state.delta
    state.Phi = 0.5 * (Phi + Phi.conj().T)
    Phat = state.delta * state.Phat + np.outer(z, z.conj())
    state.Phat = 0.5 * (Phat + Phat.conj().T)
    state.d = state.delta * state.d + z * np.conj(y)
    _advance(state, eps)
    return eps


def predict_next(state: DensePlrState) -> complex:
    """One-step-ahead prediction ``chat[t]* zhat[t+1]`` from the current state."""
    if state.t < 1:
        raise ConfigError("predict_next requires at least one processed sample")
    return complex(np.vdot(state.chat, state.zhat))
