"""Innovations-form state-space systems.

The model is

    z[t+1] = A z[t] + b eps[t]
    y[t]   = c* z[t] + eps[t]

with a single output channel: ``y`` and ``eps`` are complex scalars while the
state ``z`` is a complex n-vector.  The innovation drives both the output and
the state update, so the one-step predictor is linear in ``c`` — which is what
the adaptive estimators in this package exploit.

This module is deliberately plain dense numpy: it is the ground-truth layer
that every fast-path test is checked against.  All types are immutable after
construction and all operations are pure functions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConditioningError, ConfigError, StabilityError
from .validation import as_complex_matrix, as_complex_vector

#: Tolerance used by the power-iteration spectral radius estimate.
SPECTRAL_TOL = 1e-10

#: A system is rejected as "not convergently stable" when its spectral radius
#: exceeds 1 minus this margin.
STABILITY_MARGIN = 1e-8


def spectral_radius(A: np.ndarray, tol: float = SPECTRAL_TOL, maxiter: int = 2000) -> float:
    """Estimate the spectral radius of ``A``.

    Triangular matrices are handled exactly (max modulus of the diagonal);
    otherwise a power iteration is run until the estimate changes by less
    than ``tol`` or ``maxiter`` is reached.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 0:
        return 0.0
    if not np.any(np.tril(A, -1)) or not np.any(np.triu(A, 1)):
        return float(np.max(np.abs(np.diag(A))))
    rng = np.random.default_rng(0)
    best = 0.0
    for _ in range(2):  # two starts guard against an unlucky initial vector
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(maxiter):
            w = A @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                est = 0.0
                break
            if abs(nw - est) <= tol * max(1.0, nw):
                est = nw
                break
            est = nw
            v = w / nw
        best = max(best, est)
    return float(best)


@dataclass(frozen=True)
class StateSpaceModel:
    """Stable innovations-form system ``(A, b, c)`` of order ``n``.

    ``A`` must be stable (spectral radius < 1).  Nonsingularity of ``A`` is
    assumed by the fast filter but is not enforced here, so that degenerate
    systems (e.g. ``A = 0``) remain usable as test fixtures for the dense
    operations.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = as_complex_matrix(self.A, name="A")
        if A.shape[0] != A.shape[1]:
            raise ConfigError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        if n < 1:
            raise ConfigError("order must be at least 1")
        b = as_complex_vector(self.b, n, name="b")
        c = as_complex_vector(self.c, n, name="c")
        rho = spectral_radius(A)
        if rho >= 1.0:
            raise StabilityError(f"A must be stable; spectral radius estimate {rho:.6g} >= 1")
        A = A.copy()
        b = b.copy()
        c = c.copy()
        A.flags.writeable = False
        b.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def is_upper_triangular(self, tol: float = 1e-14) -> bool:
        low = np.linalg.norm(np.tril(self.A, -1))
        return low <= tol * max(1.0, np.linalg.norm(self.A))


@dataclass(frozen=True)
class TimeSeries:
    """A finite measurement sequence, optionally paired with its innovations."""

    samples: np.ndarray
    innovations: np.ndarray | None = None

    def __post_init__(self):
        s = as_complex_vector(self.samples, name="samples")
        if s.shape[0] < 1:
            raise ConfigError("time series must be nonempty")
        object.__setattr__(self, "samples", s)
        if self.innovations is not None:
            e = as_complex_vector(self.innovations, s.shape[0], name="innovations")
            object.__setattr__(self, "innovations", e)

    def __len__(self) -> int:
        return self.samples.shape[0]


def impulse_response(model: StateSpaceModel, lags: int) -> np.ndarray:
    """First ``lags`` impulse-response samples ``h[j] = c* A^j b``, ``j = 0..lags-1``."""
    if lags < 1:
        raise ConfigError(f"lags must be >= 1, got {lags}")
    h = np.empty(lags, dtype=complex)
    w = model.b.copy()
    for j in range(lags):
        h[j] = np.vdot(model.c, w)
        w = model.A @ w
    return h


def coefficient_impulse_response(model: StateSpaceModel, coef, lags: int) -> np.ndarray:
    """Impulse response of ``(A, b)`` paired with an estimated coefficient vector."""
    coef = as_complex_vector(coef, model.n, name="coef")
    if lags < 1:
        raise ConfigError(f"lags must be >= 1, got {lags}")
    h = np.empty(lags, dtype=complex)
    w = model.b.copy()
    for j in range(lags):
        h[j] = np.vdot(coef, w)
        w = model.A @ w
    return h


def simulate(model: StateSpaceModel, innovations, initial_state=None):
    """Drive the model with an innovation sequence.

    Returns ``(TimeSeries, states)`` where ``states`` has shape ``(T+1, n)``:
    ``states[k]`` is the state entering step ``k+1`` (``states[0]`` is the
    initial state, zero in the prewindowed default).
    """
    eps = as_complex_vector(innovations, name="innovations")
    T = eps.shape[0]
    if T < 1:
        raise ConfigError("innovations must be nonempty")
    n = model.n
    if initial_state is None:
        z = np.zeros(n, dtype=complex)
    else:
        z = as_complex_vector(initial_state, n, name="initial_state").copy()
    states = np.empty((T + 1, n), dtype=complex)
    y = np.empty(T, dtype=complex)
    for t in range(T):
        states[t] = z
        y[t] = np.vdot(model.c, z) + eps[t]
        z = model.A @ z + model.b * eps[t]
    states[T] = z
    return TimeSeries(samples=y, innovations=eps), states


def solve_stein(A, b, sigma2: float = 1.0, tol: float = 1e-10, method: str = "series") -> np.ndarray:
    """Solve ``P - A P A* = sigma2 * b b*`` for stable ``A``.

    ``method="series"`` accumulates the convergent series by repeated
    squaring; ``method="direct"`` solves the vectorized linear system.  Both
    return a Hermitian matrix whose residual is verified against ``tol``.
    """
    A = as_complex_matrix(A, name="A")
    n = A.shape[0]
    b = as_complex_vector(b, n, name="b")
    if sigma2 <= 0:
        raise ConfigError(f"sigma2 must be positive, got {sigma2}")
    rho = spectral_radius(A)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise StabilityError(
            f"solve_stein requires spectral radius < {1.0 - STABILITY_MARGIN}; estimate {rho:.8g}"
        )
    Q = sigma2 * np.outer(b, b.conj())
    if method == "series":
        P = Q.copy()
        M = A.copy()
        for _ in range(128):
            term = M @ P @ M.conj().T
            P = P + term
            M = M @ M
            if np.linalg.norm(term, "fro") <= 0.01 * tol:
                break
    elif method == "direct":
        lhs = np.eye(n * n, dtype=complex) - np.kron(A.conj(), A)
        vec = np.linalg.solve(lhs, Q.reshape(-1, order="F"))
        P = vec.reshape((n, n), order="F")
    else:
        raise ConfigError(f"unknown method {method!r}")
    P = 0.5 * (P + P.conj().T)
    resid = np.linalg.norm(P - A @ P @ A.conj().T - Q, "fro")
    if resid > tol:
        raise StabilityError(f"Stein solve did not meet tolerance: residual {resid:.3g} > {tol:.3g}")
    return P


def predictor_spectral_radius(A, b, c) -> float:
    """Exact spectral radius of the one-step predictor matrix ``A - b c*``.

    The innovations form is only a genuine prediction-error model when this
    is below one (the model is then invertible: its own residuals can be
    reconstructed from the measurements).
    """
    A = as_complex_matrix(A, name="A")
    b = as_complex_vector(b, A.shape[0], name="b")
    c = as_complex_vector(c, A.shape[0], name="c")
    F = A - np.outer(b, c.conj())
    return float(np.max(np.abs(np.linalg.eigvals(F))))


def draw_invertible_coefficient(rng, A, b, radius_bound: float = 0.98, max_tries: int = 500) -> np.ndarray:
    """Draw a unit-norm random output map that keeps the innovations model invertible.

    Rejection-samples circular complex Gaussian directions until the predictor
    matrix is stable with the requested margin.
    """
    A = as_complex_matrix(A, name="A")
    n = A.shape[0]
    b = as_complex_vector(b, n, name="b")
    for _ in range(max_tries):
        c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        c /= np.linalg.norm(c)
        if predictor_spectral_radius(A, b, c) < radius_bound:
            return c
    raise ConfigError(
        "no invertible unit-norm coefficient found; this architecture needs "
        "different eigenvalues or a larger kappa"
    )


def apply_similarity(model: StateSpaceModel, T, max_condition: float = 1e12) -> StateSpaceModel:
    """Change of state coordinates ``(A, b, c) -> (T A T^-1, T b, T^-* c)``.

    The impulse response is invariant under this map.  Raises
    ``ConditioningError`` when ``T`` is singular or has condition number above
    ``max_condition``.
    """
    T = as_complex_matrix(T, (model.n, model.n), name="T")
    sv = np.linalg.svd(T, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > max_condition:
        cond = np.inf if sv[-1] == 0.0 else sv[0] / sv[-1]
        raise ConditioningError(f"similarity transform condition {cond:.3g} exceeds {max_condition:.3g}")
    A_new = T @ np.linalg.solve(T.T, model.A.T).T  # T A T^-1 via a single solve
    b_new = T @ model.b
    c_new = np.linalg.solve(T.conj().T, model.c)
    return StateSpaceModel(A=A_new, b=b_new, c=c_new)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _encode_complex_array(x: np.ndarray) -> list:
    flat = np.asarray(x, dtype=complex).ravel()
    return [[float(v.real), float(v.imag)] for v in flat]


def _decode_complex_array(pairs, name: str) -> np.ndarray:
    try:
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError
    except ValueError as exc:
        raise ConfigError(f"{name} must be an array of [re, im] pairs") from exc
    return arr[:, 0] + 1j * arr[:, 1]


def model_to_dict(model: StateSpaceModel) -> dict:
    return {
        "n": model.n,
        "A": _encode_complex_array(model.A),
        "b": _encode_complex_array(model.b),
        "c": _encode_complex_array(model.c),
    }


def model_from_dict(doc: dict) -> StateSpaceModel:
    try:
        n = int(doc["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("model document must carry an integer 'n'") from exc
    A = _decode_complex_array(doc["A"], "A").reshape(n, n)  # row-major
    b = _decode_complex_array(doc["b"], "b")
    c = _decode_complex_array(doc["c"], "c")
    return StateSpaceModel(A=A, b=b, c=c)


def save_model(model: StateSpaceModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> StateSpaceModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def write_time_series(ts: TimeSeries, path) -> None:
    """CSV with header ``t,y_re,y_im``; the imaginary column is dropped for real data."""
    y = ts.samples
    real_only = not np.any(y.imag)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if real_only:
            writer.writerow(["t", "y_re"])
            for t, v in enumerate(y, start=1):
                writer.writerow([t, repr(float(v.real))])
        else:
            writer.writerow(["t", "y_re", "y_im"])
            for t, v in enumerate(y, start=1):
                writer.writerow([t, repr(float(v.real)), repr(float(v.imag))])


def read_time_series(path) -> TimeSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip() != "t" or header[1].strip() != "y_re":
            raise ConfigError(f"{path}: expected CSV header 't,y_re[,y_im]'")
        has_imag = len(header) >= 3 and header[2].strip() == "y_im"
        values = []
        for row in reader:
            if not row:
                continue
            re = float(row[1])
            im = float(row[2]) if has_imag else 0.0
            values.append(re + 1j * im)
    if not values:
        raise ConfigError(f"{path}: empty time series")
    return TimeSeries(samples=np.asarray(values, dtype=complex))
