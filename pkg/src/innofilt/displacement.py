"""Displacement structure of the weighted empirical covariance.

For the covariance recursion ``P <- delta P + z z*`` the matrix

    P - (1/delta) A P A*

has low rank: each step perturbs it by one positive and one (scaled) negative
rank-one term, so its rank never grows beyond the rank of the initial
displacement plus four.  The fast filter carries only an eigendecomposition
``V D V*`` of this small matrix (the generator), updated exactly inside the
low-dimensional subspace spanned by the transformed basis and the new terms.

``dense_displacement`` and ``generator_fgh_oracle`` are dense reference
routes used by the tests; ``subspace_evd_update`` is the production update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, RankOverflowError
from .model import StateSpaceModel
from .validation import as_complex_matrix, as_complex_vector

#: Default relative eigenvalue cutoff below which displacement directions are dropped.
TRUNC_TOL = 1e-12

#: Default generator rank ceiling: the structural bound (four update terms plus a
#: rank-one start) with one slack direction for roundoff transients.
ALPHA_CAP = 6


@dataclass(frozen=True)
class SignatureVector:
    """Diagonal of a signature matrix: entries in {-1, +1}."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=int).ravel()
        if e.size and not np.all(np.isin(e, (-1, 1))):
            raise ConfigError("signature entries must be +1 or -1")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def alpha(self) -> int:
        return self.entries.shape[0]

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EvdGenerator:
    """Eigendecomposition-induced generator ``V D V*`` of a Hermitian low-rank matrix.

    ``V`` has orthonormal columns, ``D`` is real and nonzero; the signature is
    implicit in ``sign(D)`` and the conventional generator columns are
    ``V |D|^{1/2}``.  Immutable; updates return new values.
    """

    V: np.ndarray
    D: np.ndarray
    alpha_cap: int = ALPHA_CAP

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        D = np.asarray(self.D, dtype=float).ravel()
        if V.ndim != 2 or V.shape[1] != D.shape[0]:
            raise ConfigError(f"V {V.shape} and D {D.shape} are not conformal")
        k = D.shape[0]
        if k > self.alpha_cap:
            raise RankOverflowError(f"generator rank {k} exceeds cap {self.alpha_cap}")
        if k:
            gram = V.conj().T @ V
            if np.linalg.norm(gram - np.eye(k)) > 1e-10:
                raise ConfigError("generator basis is not orthonormal")
            if np.any(D == 0.0):
                raise ConfigError("generator eigenvalues must be nonzero")
        V = V.copy()
        D = D.copy()
        V.flags.writeable = False
        D.flags.writeable = False
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def rank(self) -> int:
        return self.D.shape[0]

    def signature(self) -> SignatureVector:
        return SignatureVector(entries=np.sign(self.D).astype(int))

    def columns(self) -> np.ndarray:
        """Generator columns ``V |D|^{1/2}`` (shape ``(n, rank)``)."""
        return self.V * np.sqrt(np.abs(self.D))[None, :]

    def reconstruct(self) -> np.ndarray:
        return (self.V * self.D[None, :]) @ self.V.conj().T

    @classmethod
    def empty(cls, n: int, alpha_cap: int = ALPHA_CAP) -> "EvdGenerator":
        return cls(V=np.zeros((n, 0), dtype=complex), D=np.zeros(0), alpha_cap=alpha_cap)

    @classmethod
    def from_matrix(cls, M, trunc_tol: float = TRUNC_TOL,
                    alpha_cap: int = ALPHA_CAP) -> "EvdGenerator":
        """Dense eigendecomposition of a Hermitian matrix, truncated to significant part."""
        M = as_complex_matrix(M, name="M")
        lam, E = np.linalg.eigh(0.5 * (M + M.conj().T))
        amax = float(np.max(np.abs(lam), initial=0.0))
        if amax == 0.0:
            return cls.empty(M.shape[0], alpha_cap)
        keep = np.abs(lam) > trunc_tol * amax
        return cls(V=E[:, keep], D=lam[keep], alpha_cap=alpha_cap)


def dense_displacement(P, A, delta: float) -> np.ndarray:
    """Exact dense displacement ``P - (1/delta) A P A*`` (oracle)."""
    P = as_complex_matrix(P, name="P")
    A = as_complex_matrix(A, P.shape, name="A")
    M = P - (A @ P @ A.conj().T) / delta
    return 0.5 * (M + M.conj().T)


def generator_fgh_oracle(model: StateSpaceModel, zhat_traj, eps_traj, delta: float,
                         X0, S0, t: int):
    """Closed-form generator of the displacement after ``t`` estimation steps.

    Collapses the covariance sum: with the residual-weighted running column

        fhat[s] = sum_{j<=s} delta^(s-j) (A zhat_j + b eps_j / 2) conj(eps_j)

    the displacement at time ``t`` equals

        - (1/delta) (A zhat_t)(A zhat_t)* + delta^(t-1) zhat_1 zhat_1*
        + ghat ghat* - hhat hhat* + delta^t X0 S0 X0*

    where ``ghat = (fhat[t-1] + b)/sqrt(2)`` and ``hhat = (fhat[t-1] - b)/sqrt(2)``.
    Returns the stacked columns and their signature.  Dense; oracle only.
    """
    if t < 1:
        raise ConfigError("t must be >= 1")
    zhat_traj = np.asarray(zhat_traj, dtype=complex)
    eps_traj = as_complex_vector(eps_traj, name="eps_traj")
    if zhat_traj.ndim != 2 or zhat_traj.shape[0] < t or eps_traj.shape[0] < t:
        raise ConfigError(f"trajectories must cover at least {t} steps")
    n = model.n
    A, b = model.A, model.b
    fhat = np.zeros(n, dtype=complex)
    for j in range(1, t):  # 1-based j up to t-1
        zj = zhat_traj[j - 1]
        ej = eps_traj[j - 1]
        fhat = delta * fhat + (A @ zj + 0.5 * b * ej) * np.conj(ej)
    ghat = (fhat + b) / np.sqrt(2.0)
    hhat = (fhat - b) / np.sqrt(2.0)
    cols = [
        (A @ zhat_traj[t - 1]) / np.sqrt(delta),
        delta ** ((t - 1) / 2.0) * zhat_traj[0],
        ghat,
        hhat,
    ]
    signs = [-1, 1, 1, -1]
    if X0 is not None:
        X0 = np.asarray(X0, dtype=complex)
        if X0.ndim == 1:
            X0 = X0[:, None]
        if X0.shape[0] != n:
            raise ConfigError("X0 rows must match the model order")
        s0 = S0.entries if isinstance(S0, SignatureVector) else np.asarray(S0, dtype=int).ravel()
        if X0.shape[1] != s0.shape[0]:
            raise ConfigError("X0 and S0 are not conformal")
        for k in range(X0.shape[1]):
            cols.append(delta ** (t / 2.0) * X0[:, k])
            signs.append(int(s0[k]))
    X = np.column_stack(cols)
    return X, SignatureVector(entries=np.asarray(signs, dtype=int))


def subspace_evd_update(gen: EvdGenerator, scale: float, terms,
                        basis_transform=None, trunc_tol: float = TRUNC_TOL) -> EvdGenerator:
    """Exact eigendecomposition of ``scale * (B V) D (B V)* + sum_i s_i w_i v_i v_i*``.

    ``terms`` is a sequence of ``(sign, weight, vector)`` triples (at most
    four); ``basis_transform`` is an optional linear operator applied to the
    basis columns, given as a callable acting on an ``(n, k)`` array.  The
    update orthonormalizes ``[B V | v_1 .. v_m]``, eigensolves the projected
    (k+m) x (k+m) matrix, and drops eigenvalues below ``trunc_tol`` times the
    update scale: O(n (k+m)^2) total.

    The truncation threshold is anchored to the larger of the output spectrum
    and the input terms' magnitudes.  Roundoff enters at the input scale, so
    an output-relative cutoff would stop filtering it once the rank-one terms
    nearly cancel and the surviving spectrum is much smaller than the inputs.

    Raises ``RankOverflowError`` when the surviving rank exceeds the cap —
    which signals either violated displacement structure or a too-tight
    truncation tolerance.
    """
    terms = list(terms)
    if len(terms) > 4:
        raise ConfigError("at most four rank-one terms per update")
    n = gen.n
    if basis_transform is None:
        BV = gen.V
    else:
        BV = basis_transform(gen.V) if gen.rank else gen.V
    vecs = []
    signs = []
    weights = []
    for sign, weight, vec in terms:
        if sign not in (-1, 1):
            raise ConfigError("term sign must be +1 or -1")
        if weight < 0:
            raise ConfigError("term weight must be nonnegative")
        vecs.append(as_complex_vector(vec, n, name="term vector"))
        signs.append(float(sign))
        weights.append(float(weight))
    m = len(vecs)
    if gen.rank + m == 0:
        return gen
    U0 = np.empty((n, gen.rank + m), dtype=complex)
    if gen.rank:
        U0[:, : gen.rank] = BV
    for i, v in enumerate(vecs):
        U0[:, gen.rank + i] = v
    Q, _ = np.linalg.qr(U0)
    p = Q.shape[1]
    H = np.zeros((p, p), dtype=complex)
    if gen.rank:
        C = Q.conj().T @ BV
        H += scale * (C * gen.D[None, :]) @ C.conj().T
    for s, w, v in zip(signs, weights, vecs):
        q = Q.conj().T @ v
        H += (s * w) * np.outer(q, q.conj())
    H = 0.5 * (H + H.conj().T)
    lam, E = np.linalg.eigh(H)
    amax = float(np.max(np.abs(lam), initial=0.0))
    input_scale = abs(scale) * float(np.max(np.abs(gen.D), initial=0.0))
    for s, w, v in zip(signs, weights, vecs):
        input_scale = max(input_scale, w * float(np.linalg.norm(v) ** 2))
    anchor = max(amax, input_scale)
    if anchor == 0.0:
        return EvdGenerator.empty(n, gen.alpha_cap)
    keep = np.abs(lam) > trunc_tol * anchor
    k_new = int(np.count_nonzero(keep))
    if k_new > gen.alpha_cap:
        raise RankOverflowError(
            f"updated generator rank {k_new} exceeds cap {gen.alpha_cap}; "
            "displacement structure violated or truncation too tight"
        )
    return EvdGenerator(V=Q @ E[:, keep], D=lam[keep], alpha_cap=gen.alpha_cap)
