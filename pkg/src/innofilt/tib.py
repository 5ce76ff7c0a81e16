"""Triangular input balanced (TIB) forms and rank-one triangular factor algebra.

A pair ``(A, b)`` with upper-triangular ``A`` is in (upper) TIB form when

    I - A A* = kappa * b b*,        kappa = sigma2 / r > 0,

subject to ``kappa * ||b||^2 <= 1``.  Such systems have a controllability
Gramian proportional to the identity, which makes the adaptive estimation of
the output coefficients well conditioned, and they admit an O(n) factored
representation built from a single rank-one triangular factor.

The workhorse here is ``ut_factor``: the unique upper-triangular factor ``F``
with positive diagonal of ``F F* = I - c xi xi*``.  Its entries are generated
by one vector pair, so applying, adjoint-applying, and solving with ``F`` are
all O(n).  Products of such factors (plus a diagonal phase) represent the
transformed advance matrices used by the fast filter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, IndefiniteFactorError, StabilityError
from .model import STABILITY_MARGIN, StateSpaceModel, _decode_complex_array, _encode_complex_array, spectral_radius
from .validation import as_complex_vector

#: Relative floor for the trailing Schur complements of ``I - c xi xi*``;
#: below this the factor is treated as indefinite.
_PIVOT_FLOOR = 1e-13


def _suffix_exclusive(w: np.ndarray) -> np.ndarray:
    """s[i] = sum_{j > i} w[j] along axis 0."""
    s = np.cumsum(w[::-1], axis=0)[::-1]
    out = np.zeros_like(s)
    out[:-1] = s[1:]
    return out


def _prefix_exclusive(w: np.ndarray) -> np.ndarray:
    """s[i] = sum_{j < i} w[j] along axis 0."""
    s = np.cumsum(w, axis=0)
    out = np.zeros_like(s)
    out[1:] = s[:-1]
    return out


def _col(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Broadcast a length-n vector against v, which may be (n,) or (n, m)."""
    return a if v.ndim == 1 else a[:, None]


@dataclass(frozen=True)
class RankOneUTFactor:
    """Upper-triangular factor of ``I - c xi xi*`` with positive diagonal.

    Entries: ``F[j, j] = f[j]`` and ``F[i, j] = xi[i] * g[j]`` for ``i < j``.
    ``t`` holds the backward partial sums driving the recursion and
    ``partial`` the trailing Schur complements ``1 - c * sum_{k >= j} |xi_k|^2``
    (length ``n + 1``, last entry 1), which make all four triangular kernels
    one-pass vectorized operations.
    """

    c: float
    xi: np.ndarray
    t: np.ndarray
    f: np.ndarray
    g: np.ndarray
    partial: np.ndarray

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """F @ v for v of shape (n,) or (n, m)."""
        return _col(self.f, v) * v + _col(self.xi, v) * _suffix_exclusive(_col(self.g, v) * v)

    def apply_adjoint(self, v: np.ndarray) -> np.ndarray:
        """F* @ v."""
        return _col(self.f, v) * v + _col(np.conj(self.g), v) * _prefix_exclusive(
            _col(np.conj(self.xi), v) * v
        )

    def solve(self, v: np.ndarray) -> np.ndarray:
        """F^-1 @ v in O(n), using the telescoping of the Schur complements."""
        f = _col(self.f, v)
        w = _col(self.g * self.partial[:-1], v) * v / f
        sigma = _suffix_exclusive(w) / _col(self.partial[1:], v)
        return (v - _col(self.xi, v) * sigma) / f

    def solve_adjoint(self, v: np.ndarray) -> np.ndarray:
        """F^-* @ v in O(n)."""
        f = _col(self.f, v)
        e = _col(np.conj(self.xi), v) * v / f
        pi = _col(self.partial[:-1], v) * _prefix_exclusive(e / _col(self.partial[1:], v))
        return (v - _col(np.conj(self.g), v) * pi) / f

    def to_dense(self) -> np.ndarray:
        F = np.diag(self.f.astype(complex))
        n = self.n
        for i in range(n - 1):
            F[i, i + 1 :] = self.xi[i] * self.g[i + 1 :]
        return F


def ut_factor(c: float, xi) -> RankOneUTFactor:
    """Build the UT factor of ``I - c xi xi*``.

    Requires ``c * ||xi||^2 < 1`` (positive definiteness); otherwise raises
    ``IndefiniteFactorError``.  For ``c <= 0`` the factorization always exists.
    """
    xi = as_complex_vector(xi, name="xi")
    n = xi.shape[0]
    if n < 1:
        raise ConfigError("xi must be nonempty")
    c = float(c)
    s2 = np.abs(xi) ** 2
    suffix = np.empty(n + 1)
    suffix[:-1] = np.cumsum(s2[::-1])[::-1]
    suffix[-1] = 0.0
    partial = 1.0 - c * suffix
    if partial[0] <= _PIVOT_FLOOR * max(1.0, abs(c) * suffix[0]):
        raise IndefiniteFactorError(
            f"I - c xi xi* is numerically indefinite: c*||xi||^2 = {c * suffix[0]:.12g}"
        )
    t = -c / partial[1:]
    f = np.sqrt(partial[:-1] / partial[1:])
    g = np.conj(xi) * t / f
    return RankOneUTFactor(c=c, xi=xi, t=t, f=f, g=g, partial=partial)


@dataclass(frozen=True)
class FactoredTriangular:
    """Product form ``scale * F(1) ... F(k) * diag(phases)`` of an upper-triangular matrix.

    Matrix-vector products and solves cost O(k n).
    """

    scale: float
    factors: tuple
    phases: np.ndarray

    def __post_init__(self):
        phases = as_complex_vector(self.phases, name="phases")
        if np.max(np.abs(np.abs(phases) - 1.0), initial=0.0) > 1e-12:
            raise ConfigError("phases must have unit modulus")
        if not self.scale > 0.0:
            raise ConfigError("scale must be positive")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def n(self) -> int:
        return self.phases.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        w = _col(self.phases, v) * v
        for F in reversed(self.factors):
            w = F.apply(w)
        return self.scale * w

    def solve(self, v: np.ndarray) -> np.ndarray:
        x = v / self.scale
        for F in self.factors:
            x = F.solve(x)
        return _col(np.conj(self.phases), x) * x

    def diagonal(self) -> np.ndarray:
        d = np.full(self.n, self.scale, dtype=complex)
        for F in self.factors:
            d = d * F.f
        return d * self.phases

    def to_dense(self) -> np.ndarray:
        M = self.scale * np.eye(self.n, dtype=complex)
        for F in self.factors:
            M = M @ F.to_dense()
        return M @ np.diag(self.phases)


@dataclass(frozen=True)
class TibSystem:
    """A TIB pair ``(A, b)`` with its scaling constants and factored form.

    ``r = sigma2 / kappa`` is the Gramian level: the controllability Gramian
    of a TIB pair equals ``r/sigma2 * I`` and the stationary state covariance
    under innovations of variance ``sigma2`` equals ``r * I``.
    """

    A: np.ndarray
    b: np.ndarray
    kappa: float
    r: float
    sigma2: float
    factored: FactoredTriangular

    def __post_init__(self):
        n = self.b.shape[0]
        if self.A.shape != (n, n):
            raise ConfigError("A and b are not conformal")
        if not (self.kappa > 0 and self.r > 0 and self.sigma2 > 0):
            raise ConfigError("kappa, r, sigma2 must be positive")
        if abs(self.kappa * self.r - self.sigma2) > 1e-12 * self.sigma2:
            raise ConfigError("kappa must equal sigma2 / r")
        if np.any(np.tril(self.A, -1)):
            raise ConfigError("A must be upper triangular")
        if np.max(np.abs(np.diag(self.A))) >= 1.0:
            raise StabilityError("TIB diagonal must have modulus < 1")
        k_bn = self.kappa * np.linalg.norm(self.b) ** 2
        if k_bn > 1.0 + 1e-12:
            raise ConfigError(f"kappa * ||b||^2 = {k_bn:.6g} must be <= 1")
        # Probe the defining equation with matvecs; the full Frobenius check
        # is O(n^3) and lives in verify_tib.
        rng = np.random.default_rng(12345)
        for _ in range(3):
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            v /= np.linalg.norm(v)
            resid = v - self.A @ (self.A.conj().T @ v) - self.kappa * self.b * np.vdot(self.b, v)
            if np.linalg.norm(resid) > 1e-9 * n:
                raise ConfigError("defining equation violated: (A, b) is not TIB at the stated kappa")

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def to_model(self, c) -> StateSpaceModel:
        return StateSpaceModel(A=self.A, b=self.b, c=c)

    def impulse_response(self, c, lags: int) -> np.ndarray:
        """``h[j] = c* A^j b`` through the factored form: O(lags * n)."""
        c = as_complex_vector(c, self.n, name="c")
        if lags < 1:
            raise ConfigError(f"lags must be >= 1, got {lags}")
        h = np.empty(lags, dtype=complex)
        w = self.b.copy()
        for j in range(lags):
            h[j] = np.vdot(c, w)
            w = self.factored.apply(w)
        return h


def tib_from_eigenvalues(eigs, kappa: float, sigma2: float = 1.0) -> TibSystem:
    """Construct the TIB pair with prescribed eigenvalues (any order).

    The entries follow a backward recursion on the trailing partial products
    of the eigenvalue moduli; ``b`` is chosen real nonnegative, which picks a
    canonical representative of the diagonal-unitary equivalence class.  The
    result satisfies ``I - A A* = kappa b b*`` with ``diag(A)`` equal to the
    prescribed eigenvalues in the given order.
    """
    eigs = as_complex_vector(eigs, name="eigs")
    n = eigs.shape[0]
    if n < 1:
        raise ConfigError("need at least one eigenvalue")
    if kappa <= 0 or sigma2 <= 0:
        raise ConfigError("kappa and sigma2 must be positive")
    mods = np.abs(eigs)
    if np.max(mods) >= 1.0:
        raise StabilityError(f"all eigenvalues must satisfy |lambda| < 1; max is {np.max(mods):.6g}")
    if np.min(mods) == 0.0:
        raise ConfigError("zero eigenvalues are not allowed (A must be nonsingular)")
    mod2 = mods**2
    # partial[j] = prod_{k >= j} |lambda_k|^2  (0-based), partial[n] = 1;
    # this equals the trailing Schur complement 1 - kappa * sum_{k >= j} b_k^2.
    partial = np.empty(n + 1)
    partial[-1] = 1.0
    partial[:-1] = np.cumprod(mod2[::-1])[::-1]
    t = -kappa / partial[1:]
    b = np.sqrt((1.0 - mod2) * partial[1:] / kappa)
    f = mods.copy()
    g = (b * t / f).astype(complex)
    factor = RankOneUTFactor(c=float(kappa), xi=b.astype(complex), t=t, f=f, g=g, partial=partial)
    phases = eigs / mods
    factored = FactoredTriangular(scale=1.0, factors=(factor,), phases=phases)
    A = factored.to_dense()
    np.fill_diagonal(A, eigs)  # pin the diagonal to the prescribed values exactly
    return TibSystem(A=A, b=b.astype(complex), kappa=float(kappa), r=float(sigma2 / kappa),
                     sigma2=float(sigma2), factored=factored)


def verify_tib(A, b, kappa: float) -> float:
    """Frobenius residual of the defining equation, ``||I - A A* - kappa b b*||_F``."""
    A = np.asarray(A, dtype=complex)
    b = as_complex_vector(b, A.shape[0], name="b")
    n = A.shape[0]
    return float(np.linalg.norm(np.eye(n) - A @ A.conj().T - kappa * np.outer(b, b.conj()), "fro"))


def gramian_series(A, b, tol: float = 1e-10, maxiter: int = 100_000) -> np.ndarray:
    """Controllability Gramian ``sum_j A^j b b* A^{*j}`` by direct summation.

    Intentionally a different route from ``solve_stein`` so the two can check
    each other.  The tail is bounded geometrically using the spectral radius
    estimate.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    b = as_complex_vector(b, n, name="b")
    rho = spectral_radius(A)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise StabilityError(f"gramian series diverges: spectral radius estimate {rho:.8g}")
    G = np.zeros((n, n), dtype=complex)
    w = b.copy()
    denom = max(1.0 - rho**2, STABILITY_MARGIN)
    for _ in range(maxiter):
        G += np.outer(w, w.conj())
        w = A @ w
        if np.linalg.norm(w) ** 2 / denom <= tol:
            break
    else:
        raise StabilityError("gramian series did not converge within the iteration budget")
    return 0.5 * (G + G.conj().T)


# ---------------------------------------------------------------------------
# Serialization (same layout as the plain model format, plus the TIB constants)
# ---------------------------------------------------------------------------

def tib_to_dict(tib: TibSystem) -> dict:
    return {
        "n": tib.n,
        "A": _encode_complex_array(tib.A),
        "b": _encode_complex_array(tib.b),
        "kappa": tib.kappa,
        "r": tib.r,
        "sigma2": tib.sigma2,
    }


def tib_from_dict(doc: dict) -> TibSystem:
    try:
        n = int(doc["n"])
        kappa = float(doc["kappa"])
        sigma2 = float(doc["sigma2"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("TIB document must carry n, kappa, sigma2") from exc
    A = _decode_complex_array(doc["A"], "A").reshape(n, n)
    eigs = np.diag(A)
    rebuilt = tib_from_eigenvalues(eigs, kappa, sigma2)
    # The canonical representative is unique, so rebuilding from the diagonal
    # must reproduce the stored entries.
    if np.linalg.norm(rebuilt.A - A) > 1e-8 * max(1.0, np.linalg.norm(A)):
        raise ConfigError("stored TIB matrix is not the canonical form for its diagonal")
    return rebuilt


def save_tib(tib: TibSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tib_to_dict(tib), fh)


def load_tib(path) -> TibSystem:
    with open(path, encoding="utf-8") as fh:
        return tib_from_dict(json.load(fh))
