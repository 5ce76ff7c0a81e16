"""Square-root displacement filter (SRDF).

A fast implementation of the dense pseudolinear regression in ``plr``: the
state coordinates are rescaled at every step by the upper-triangular square
root ``R`` of the weighted empirical covariance, so the covariance is the
identity in working coordinates and only O(alpha^2 n) work is needed per
step, where ``alpha`` is the (small) displacement rank.

Working quantities, all expressed in the coordinates of the current square
root:

    u           transformed regressor state            R^-1 zhat
    kappa_coef  transported coefficients               R* chat
    beta        transformed innovation gain            R^-1 b
    gen         eigendecomposition of the transformed
                displacement  R^-1 (P - A P A*/delta) R^-*
    advance     factored triangular form of            R^-1 A R

The per-step square-root coordinate change ``W = R_new^-1 R_old`` is itself a
rank-one-generated triangular factor, so every transport above costs O(n).
The transformed advance is rebuilt from the generator by the partial-sum
factorization in ``advance_from_generator``; its diagonal phases are pinned
to those of ``A``, which survive triangular similarity.

``A`` must be upper triangular and nonsingular (e.g. a TIB form).  The exact
initializer costs O(n^3); for TIB systems a rank-one O(n) initializer is
available that is exact at ``delta = 1`` and carries an O(1 - delta)
inconsistency otherwise.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .displacement import ALPHA_CAP, TRUNC_TOL, EvdGenerator, dense_displacement, subspace_evd_update
from .exceptions import ConditioningError, ConfigError, FactorizationError, IndefiniteFactorError
from .model import StateSpaceModel, _decode_complex_array, _encode_complex_array, solve_stein
from .tib import FactoredTriangular, RankOneUTFactor, TibSystem, ut_factor
from .validation import as_complex_matrix, as_complex_vector, check_forgetting


def ut_cholesky(P) -> np.ndarray:
    """Upper-triangular ``R`` with positive diagonal such that ``P = R R*``."""
    P = as_complex_matrix(P, name="P")
    n = P.shape[0]
    rev = slice(None, None, -1)
    try:
        L = np.linalg.cholesky(P[rev, :][:, rev])
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("matrix is not positive definite") from exc
    return L[rev, :][:, rev]


@dataclass(frozen=True)
class WTransform:
    """Square-root coordinate change ``W`` with ``W^-1 W^-* = delta I + u u*``.

    ``W^-1 = sqrt(delta) F`` where ``F`` is the rank-one UT factor of
    ``I + u u* / delta``, so applying ``W``, ``W^-1`` and ``W^-*`` are all O(n).
    """

    delta: float
    u: np.ndarray
    factor: RankOneUTFactor

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.factor.solve(v) / np.sqrt(self.delta)

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt(self.delta) * self.factor.apply(v)

    def apply_inverse_adjoint(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt(self.delta) * self.factor.apply_adjoint(v)

    def inverse_dense(self) -> np.ndarray:
        return np.sqrt(self.delta) * self.factor.to_dense()

    def to_dense(self) -> np.ndarray:
        return np.linalg.inv(self.inverse_dense())


def compute_w(u, delta: float) -> WTransform:
    """Build the coordinate change for regressor ``u`` (always well defined)."""
    delta = check_forgetting(delta)
    u = as_complex_vector(u, name="u")
    return WTransform(delta=delta, u=u, factor=ut_factor(-1.0 / delta, u))


def gamma_of(u, delta: float) -> float:
    """Scalar of the polar split ``W = delta^-1/2 Q (I - gamma u u*)`` with unitary ``Q``.

    The smaller root of ``2 gamma - gamma^2 ||u||^2 = 1/(delta + ||u||^2)``,
    written in a cancellation-free form (limit ``1/(2 delta)`` as ``u -> 0``).
    """
    delta = check_forgetting(delta)
    u = as_complex_vector(u, name="u")
    s = float(np.linalg.norm(u) ** 2)
    return 1.0 / ((delta + s) * (1.0 + np.sqrt(delta / (delta + s))))


@dataclass(frozen=True)
class TriangularAdvance:
    """Factored triangular representation of the transformed advance matrix."""

    rep: FactoredTriangular

    @property
    def n(self) -> int:
        return self.rep.n

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.rep.apply(v)

    def solve(self, v: np.ndarray) -> np.ndarray:
        return self.rep.solve(v)

    def diagonal(self) -> np.ndarray:
        return self.rep.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.rep.to_dense()


def advance_from_generator(gen: EvdGenerator, delta: float, phases) -> TriangularAdvance:
    """Rebuild the transformed advance from the displacement generator.

    Solves ``Atil Atil* = delta (I - V D V*)`` for the unique upper-triangular
    ``Atil`` whose diagonal has the prescribed phases, one generator column at
    a time: starting from ``sqrt(delta) I``, each column contributes a
    rank-one UT factor (negative-signature columns first, so every
    intermediate stays positive definite).  O(alpha^2 n).
    """
    delta = check_forgetting(delta)
    phases = as_complex_vector(phases, name="phases")
    if phases.shape[0] != gen.n:
        raise ConfigError("phases length must match the generator dimension")
    if gen.rank and float(np.max(gen.D)) >= 1.0:
        raise FactorizationError(
            f"delta (I - V D V*) is not positive definite: max eigenvalue {np.max(gen.D):.12g} >= 1"
        )
    sqd = np.sqrt(delta)
    factors: list[RankOneUTFactor] = []
    if gen.rank:
        Y = gen.columns()
        # negative-signature columns first (always well posed); positive ones
        # ascending, so the worst-conditioned downdate comes last and no
        # subsequent solve passes through its factor
        order = np.lexsort((gen.D, np.sign(gen.D)))
        for idx in order:
            x = Y[:, idx] / sqd
            for F in factors:
                x = F.solve(x)
            sign = 1.0 if gen.D[idx] > 0 else -1.0
            try:
                factors.append(ut_factor(delta * sign, x))
            except IndefiniteFactorError as exc:
                raise FactorizationError(
                    "advance factorization failed on a positive-signature column; "
                    "remedies: larger forgetting factor or exact re-initialization",
                    column=int(idx),
                ) from exc
    return TriangularAdvance(FactoredTriangular(scale=sqd, factors=tuple(factors), phases=phases))


@dataclass
class StepTrace:
    """Diagnostics captured by the most recent step."""

    eps: complex
    mu: np.ndarray
    gamma: float
    rank: int
    seconds: float


@dataclass
class SrdfState:
    """Mutable single-owner state of a fast filter run.

    After ``t`` processed samples, ``u`` holds the next regressor and
    ``kappa_coef``, ``beta``, ``gen``, ``advance`` are all expressed in the
    coordinates of the current square root.
    """

    t: int
    delta: float
    u: np.ndarray
    kappa_coef: np.ndarray
    beta: np.ndarray
    gen: EvdGenerator
    advance: TriangularAdvance
    phases: np.ndarray
    alpha_cap: int = ALPHA_CAP
    trunc_tol: float = TRUNC_TOL
    last_w: WTransform | None = None
    trace: StepTrace | None = None
    rank_trace: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.u.shape[0]


def _check_triangular_model(A: np.ndarray) -> np.ndarray:
    """The fast filter requires an upper-triangular, nonsingular advance."""
    if np.linalg.norm(np.tril(A, -1)) > 1e-13 * max(1.0, np.linalg.norm(A)):
        raise ConfigError("fast filter requires an upper-triangular advance matrix")
    d = np.diag(A)
    if np.min(np.abs(d)) == 0.0:
        raise ConfigError("advance matrix must be nonsingular (nonzero diagonal)")
    return d / np.abs(d)


def rho_covariance(A, b, rho: float, delta: float, tol: float = 1e-12) -> np.ndarray:
    """Initial covariance whose displacement is the rank-one ``rho^2 b b*``.

    Solves ``P - (1/delta) A P A* = rho^2 b b*`` via the plain Stein solver on
    the rescaled advance ``A / sqrt(delta)``.
    """
    delta = check_forgetting(delta)
    A = as_complex_matrix(A, name="A")
    return solve_stein(A / np.sqrt(delta), b, sigma2=rho**2, tol=tol)


def transformed_displacement(P0, A, delta: float, R0=None):
    """Dense helper: square root of ``P0`` and the transformed displacement.

    Returns ``(R0, R0^-1 (P0 - A P0 A*/delta) R0^-*)``.  Split out of the
    exact initializer so degenerate advances (even ``A = 0``) can be probed.
    """
    P0 = as_complex_matrix(P0, name="P0")
    A = as_complex_matrix(A, P0.shape, name="A")
    if R0 is None:
        R0 = ut_cholesky(P0)
    disp = dense_displacement(P0, A, delta)
    tmp = scipy.linalg.solve_triangular(R0, disp, lower=False)
    Yd = scipy.linalg.solve_triangular(R0, tmp.conj().T, lower=False).conj().T
    return R0, 0.5 * (Yd + Yd.conj().T)


def srdf_init_exact(model: StateSpaceModel, P0, delta: float, z1=None, c0=None,
                    alpha_cap: int = ALPHA_CAP, trunc_tol: float = TRUNC_TOL):
    """Dense O(n^3) initialization from an arbitrary positive definite ``P0``.

    Returns ``(state, R0)``; the square root ``R0`` is exposed for shadow
    verification and is not retained by the filter.
    """
    delta = check_forgetting(delta)
    phases = _check_triangular_model(model.A)
    R0, Yd = transformed_displacement(P0, model.A, delta)
    gen = EvdGenerator.from_matrix(Yd, trunc_tol=trunc_tol, alpha_cap=alpha_cap)
    advance = advance_from_generator(gen, delta, phases)
    beta = scipy.linalg.solve_triangular(R0, model.b, lower=False)
    n = model.n
    if z1 is None:
        u = np.zeros(n, dtype=complex)
    else:
        u = scipy.linalg.solve_triangular(R0, as_complex_vector(z1, n, name="z1"), lower=False)
    if c0 is None:
        kappa = np.zeros(n, dtype=complex)
    else:
        kappa = R0.conj().T @ as_complex_vector(c0, n, name="c0")
    state = SrdfState(t=0, delta=delta, u=u, kappa_coef=kappa, beta=beta, gen=gen,
                      advance=advance, phases=phases, alpha_cap=alpha_cap, trunc_tol=trunc_tol)
    return state, R0


def srdf_init_tib_fast(tib: TibSystem, rho: float, delta: float,
                       alpha_cap: int = ALPHA_CAP, trunc_tol: float = TRUNC_TOL) -> SrdfState:
    """O(n) prewindowed initialization for TIB architectures.

    Takes the initial covariance as the scalar matrix ``(rho^2 r / sigma^2) I``
    and its displacement as the rank-one ``kappa b b*`` seen through that
    square root — exact at ``delta = 1``, off by O(1 - delta) otherwise (the
    discrepancy is forgotten geometrically).
    """
    delta = check_forgetting(delta)
    if rho <= 0:
        raise ConfigError(f"rho must be positive, got {rho}")
    phases = _check_triangular_model(tib.A)
    rho_r = rho / np.sqrt(tib.kappa)
    n = tib.n
    bnorm = float(np.linalg.norm(tib.b))
    gen = EvdGenerator(V=(tib.b / bnorm)[:, None], D=np.array([tib.kappa * bnorm**2]),
                       alpha_cap=alpha_cap)
    advance = TriangularAdvance(FactoredTriangular(
        scale=float(np.sqrt(delta)) * tib.factored.scale,
        factors=tib.factored.factors,
        phases=tib.factored.phases,
    ))
    return SrdfState(
        t=0,
        delta=delta,
        u=np.zeros(n, dtype=complex),
        kappa_coef=np.zeros(n, dtype=complex),
        beta=tib.b / rho_r,
        gen=gen,
        advance=advance,
        phases=phases,
        alpha_cap=alpha_cap,
        trunc_tol=trunc_tol,
    )


def _advance_coordinates(state: SrdfState, v: np.ndarray, eps: complex) -> None:
    """Shared tail of both step variants.

    ``v`` holds the innovation-corrected coefficients still in the previous
    coordinates; everything is transported through the new square root, the
    generator and the factored advance are refreshed, and the regressor is
    advanced.
    """
    started = time.perf_counter()
    u = state.u
    delta = state.delta
    W = compute_w(u, delta)
    kappa = W.apply_inverse_adjoint(v)
    beta = W.apply(state.beta)
    Au = state.advance.apply(u)
    k = state.gen.rank
    stacked = np.empty((state.n, k + 2), dtype=complex)
    if k:
        stacked[:, :k] = state.gen.V
    stacked[:, k] = u
    stacked[:, k + 1] = Au
    w_stacked = W.apply(stacked)
    WV = w_stacked[:, :k]
    Wu = w_stacked[:, k]
    mu = w_stacked[:, k + 1]
    gen = subspace_evd_update(
        state.gen,
        scale=delta,
        terms=[(1, 1.0, Wu), (-1, 1.0 / delta, mu)],
        basis_transform=(lambda _: WV) if k else None,
        trunc_tol=state.trunc_tol,
    )
    try:
        advance = advance_from_generator(gen, delta, state.phases)
    except FactorizationError as exc:
        exc.step = state.t + 1
        raise
    u_next = advance.apply(Wu) + beta * eps
    state.u = u_next
    state.kappa_coef = kappa
    state.beta = beta
    state.gen = gen
    state.advance = advance
    state.last_w = W
    state.t += 1
    state.trace = StepTrace(eps=eps, mu=mu, gamma=gamma_of(u, delta), rank=gen.rank,
                            seconds=time.perf_counter() - started)
    state.rank_trace.append(gen.rank)


def srdf_step(state: SrdfState, y: complex) -> complex:
    """Process one measurement; returns the prediction residual.

    The residual is formed with the transported coefficients and the current
    regressor in matching coordinates, then the coefficient innovation is
    applied before the coordinate change.  Total cost O(alpha^2 n).
    """
    u = state.u
    eps = complex(y) - np.vdot(state.kappa_coef, u)
    s = float(np.linalg.norm(u) ** 2)
    v = state.kappa_coef + u * (np.conj(eps) / (state.delta + s))
    _advance_coordinates(state, v, eps)
    return eps


def srdf_step_aposteriori(state: SrdfState, y: complex) -> complex:
    """Step variant whose coefficient update uses the a-posteriori residual.

    The implicit relation ``kappa_new = kappa + u eps_post* / (delta + ||u||^2)``
    with ``eps_post = y - kappa_new* u`` is solved in closed form (a rank-one
    solve).  The regressor advance keeps using the prediction residual.
    Returns the a-posteriori residual.
    """
    u = state.u
    y = complex(y)
    eps_prior = y - np.vdot(state.kappa_coef, u)
    s = float(np.linalg.norm(u) ** 2)
    rhs = state.kappa_coef + u * (np.conj(y) / (state.delta + s))
    v = rhs - u * (np.vdot(u, rhs) / (state.delta + 2.0 * s))
    eps_post = y - np.vdot(v, u)
    _advance_coordinates(state, v, eps_prior)
    return eps_post


def predict_next(state: SrdfState) -> complex:
    """One-step-ahead prediction from the current transported state."""
    if state.t < 1:
        raise ConfigError("predict_next requires at least one processed sample")
    return complex(np.vdot(state.kappa_coef, state.u))


def estimated_impulse_response(state: SrdfState, lags: int) -> np.ndarray:
    """Impulse response implied by the current coefficient estimate.

    Coordinate-free: transported coefficients paired with the transformed
    advance and gain give exactly ``chat* A^j b``.  O(alpha n lags).
    """
    if lags < 1:
        raise ConfigError(f"lags must be >= 1, got {lags}")
    h = np.empty(lags, dtype=complex)
    w = state.beta.copy()
    for j in range(lags):
        h[j] = np.vdot(state.kappa_coef, w)
        w = state.advance.apply(w)
    return h


# ---------------------------------------------------------------------------
# State snapshots
# ---------------------------------------------------------------------------

def state_to_dict(state: SrdfState) -> dict:
    return {
        "t": state.t,
        "delta": state.delta,
        "alpha_cap": state.alpha_cap,
        "trunc_tol": state.trunc_tol,
        "u": _encode_complex_array(state.u),
        "kappa_coef": _encode_complex_array(state.kappa_coef),
        "beta": _encode_complex_array(state.beta),
        "phases": _encode_complex_array(state.phases),
        "gen": {
            "V": _encode_complex_array(state.gen.V),
            "D": list(map(float, state.gen.D)),
        },
        "advance": {
            "scale": state.advance.rep.scale,
            "factors": [
                {"c": F.c, "xi": _encode_complex_array(F.xi)} for F in state.advance.rep.factors
            ],
        },
    }


def state_from_dict(doc: dict) -> SrdfState:
    try:
        t = int(doc["t"])
        delta = float(doc["delta"])
        alpha_cap = int(doc["alpha_cap"])
        trunc_tol = float(doc["trunc_tol"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("snapshot is missing scalar fields") from exc
    u = _decode_complex_array(doc["u"], "u")
    n = u.shape[0]
    kappa = _decode_complex_array(doc["kappa_coef"], "kappa_coef")
    beta = _decode_complex_array(doc["beta"], "beta")
    phases = _decode_complex_array(doc["phases"], "phases")
    D = np.asarray(doc["gen"]["D"], dtype=float)
    V = _decode_complex_array(doc["gen"]["V"], "gen.V").reshape(n, D.shape[0])
    gen = EvdGenerator(V=V, D=D, alpha_cap=alpha_cap)
    factors = tuple(
        ut_factor(float(entry["c"]), _decode_complex_array(entry["xi"], "xi"))
        for entry in doc["advance"]["factors"]
    )
    advance = TriangularAdvance(FactoredTriangular(
        scale=float(doc["advance"]["scale"]), factors=factors, phases=phases))
    return SrdfState(t=t, delta=delta, u=u, kappa_coef=kappa, beta=beta, gen=gen,
                     advance=advance, phases=phases, alpha_cap=alpha_cap, trunc_tol=trunc_tol)


def save_state(state: SrdfState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_dict(state), fh)


def load_state(path) -> SrdfState:
    with open(path, encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))
