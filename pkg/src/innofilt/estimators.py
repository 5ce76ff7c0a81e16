"""Estimator-style wrappers around the filter cores.

Thin sklearn-compatible classes (``get_params`` / ``set_params`` / ``fit``)
so the filters compose with the wider ecosystem.  ``fit`` consumes a 1-D
measurement sequence and exposes the learned quantities as trailing-underscore
attributes; ``partial_fit`` continues a run on further samples, which is the
natural streaming interface for these algorithms.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import plr, srdf
from .exceptions import ConfigError
from .model import StateSpaceModel, coefficient_impulse_response
from .tib import TibSystem
from .validation import check_time_series


class _SequentialMixin:
    """Shared fit/predict plumbing for the one-step-ahead filters."""

    def fit(self, y, y_ignored=None):
        """Reset and process the full sequence ``y``; returns ``self``."""
        self._reset()
        return self.partial_fit(y)

    def partial_fit(self, y, y_ignored=None):
        """Continue the run on further samples (initializes on first call)."""
        y = check_time_series(y)
        if not hasattr(self, "state_") or self.state_ is None:
            self._reset()
        res = [self._step(v) for v in y]
        self.residuals_ = np.concatenate([self.residuals_, np.asarray(res, dtype=complex)])
        self.n_samples_seen_ = self.residuals_.shape[0]
        return self

    def predict_next(self) -> complex:
        """One-step-ahead prediction of the next measurement."""
        self._check_fitted()
        return self._predict_next()

    def _check_fitted(self):
        if not hasattr(self, "state_") or self.state_ is None or self.n_samples_seen_ < 1:
            raise ConfigError("estimator has not been fitted yet")


class PlrEstimator(_SequentialMixin, BaseEstimator):
    """Dense pseudolinear regression with forgetting (O(n^2) per step).

    Parameters
    ----------
    model : StateSpaceModel or TibSystem
        Fixed filter architecture ``(A, b)``; only the output map is learned.
    delta : float
        Forgetting factor in (0, 1].
    initial_covariance : float or array
        Scalar level (times identity) or full matrix for the covariance prior.
    variant : str
        "recursive" (default), "direct" (oracle normal-equation solve), or
        "aposteriori".
    """

    def __init__(self, model, delta=0.99, initial_covariance=1.0, initial_coef=None,
                 variant="recursive"):
        self.model = model
        self.delta = delta
        self.initial_covariance = initial_covariance
        self.initial_coef = initial_coef
        self.variant = variant

    def _arch(self):
        m = self.model
        if isinstance(m, TibSystem):
            return m.A, m.b
        if isinstance(m, StateSpaceModel):
            return m.A, m.b
        raise ConfigError("model must be a StateSpaceModel or TibSystem")

    def _reset(self):
        A, b = self._arch()
        P0 = self.initial_covariance
        if np.isscalar(P0):
            P0 = float(P0) * np.eye(A.shape[0])
        self.state_ = plr.plr_init(A, b, P0, c0=self.initial_coef, delta=self.delta)
        self.residuals_ = np.zeros(0, dtype=complex)
        self.n_samples_seen_ = 0
        steps = {
            "recursive": plr.plr_step,
            "direct": plr.plr_step_direct,
            "aposteriori": plr.plr_step_aposteriori,
        }
        if self.variant not in steps:
            raise ConfigError(f"unknown variant {self.variant!r}")
        self._step_fn = steps[self.variant]

    def _step(self, y):
        return self._step_fn(self.state_, y)

    def _predict_next(self):
        return plr.predict_next(self.state_)

    @property
    def coef_(self) -> np.ndarray:
        self._check_fitted()
        return self.state_.chat.copy()

    def impulse_response(self, lags: int) -> np.ndarray:
        self._check_fitted()
        A, b = self._arch()
        shell = StateSpaceModel(A=A, b=b, c=np.zeros(A.shape[0]))
        return coefficient_impulse_response(shell, self.state_.chat, lags)


class LmsEstimator(PlrEstimator):
    """Least-mean-squares variant: a scalar step size replaces the covariance weighting.

    ``step_size`` may be a positive float or a callable ``t -> mu_t`` (1-based
    step index).  On TIB architectures a natural default is
    ``(1 - delta) / r``, which matches the asymptotic gain of the dense
    estimator; pass ``step_size="auto"`` to use it.
    """

    def __init__(self, model, delta=0.99, initial_covariance=1.0, initial_coef=None,
                 step_size="auto"):
        super().__init__(model, delta=delta, initial_covariance=initial_covariance,
                         initial_coef=initial_coef, variant="recursive")
        self.step_size = step_size

    def _reset(self):
        super()._reset()
        mu = self.step_size
        if mu == "auto":
            if not isinstance(self.model, TibSystem):
                raise ConfigError("step_size='auto' requires a TibSystem")
            level = (1.0 - self.delta) / self.model.r if self.delta < 1.0 else 0.5 / self.model.r
            self._mu_fn = lambda t: level
        elif callable(mu):
            self._mu_fn = mu
        else:
            self._mu_fn = lambda t, _mu=float(mu): _mu

    def _step(self, y):
        return plr.lms_step(self.state_, y, self._mu_fn(self.state_.t + 1))


class SrdfEstimator(_SequentialMixin, BaseEstimator):
    """Fast square-root displacement filter (O(alpha^2 n) per step).

    Parameters
    ----------
    system : TibSystem or StateSpaceModel
        Architecture; must have an upper-triangular nonsingular advance.
        ``init="tib-fast"`` requires a TibSystem.
    delta, rho : float
        Forgetting factor and initial-covariance scale.
    init : str
        "tib-fast" (O(n)) or "exact" (dense O(n^3) from the rank-one-
        displacement covariance induced by ``rho``).
    variant : str
        "prediction" (default) or "aposteriori".
    """

    def __init__(self, system, delta=0.99, rho=1.0, init="tib-fast", variant="prediction",
                 alpha_cap=None, trunc_tol=None):
        self.system = system
        self.delta = delta
        self.rho = rho
        self.init = init
        self.variant = variant
        self.alpha_cap = alpha_cap
        self.trunc_tol = trunc_tol

    def _reset(self):
        kwargs = {}
        if self.alpha_cap is not None:
            kwargs["alpha_cap"] = self.alpha_cap
        if self.trunc_tol is not None:
            kwargs["trunc_tol"] = self.trunc_tol
        if self.init == "tib-fast":
            if not isinstance(self.system, TibSystem):
                raise ConfigError("init='tib-fast' requires a TibSystem")
            self.state_ = srdf.srdf_init_tib_fast(self.system, self.rho, self.delta, **kwargs)
        elif self.init == "exact":
            if isinstance(self.system, TibSystem):
                A, b = self.system.A, self.system.b
                model = self.system.to_model(np.zeros(self.system.n))
            elif isinstance(self.system, StateSpaceModel):
                A, b, model = self.system.A, self.system.b, self.system
            else:
                raise ConfigError("system must be a StateSpaceModel or TibSystem")
            P0 = srdf.rho_covariance(A, b, self.rho, self.delta)
            self.state_, _ = srdf.srdf_init_exact(model, P0, self.delta, **kwargs)
        else:
            raise ConfigError(f"unknown init {self.init!r}")
        if self.variant == "prediction":
            self._step_fn = srdf.srdf_step
        elif self.variant == "aposteriori":
            self._step_fn = srdf.srdf_step_aposteriori
        else:
            raise ConfigError(f"unknown variant {self.variant!r}")
        self.residuals_ = np.zeros(0, dtype=complex)
        self.n_samples_seen_ = 0

    def _step(self, y):
        return self._step_fn(self.state_, y)

    def _predict_next(self):
        return srdf.predict_next(self.state_)

    @property
    def rank_trace_(self) -> np.ndarray:
        self._check_fitted()
        return np.asarray(self.state_.rank_trace, dtype=int)

    def impulse_response(self, lags: int) -> np.ndarray:
        self._check_fitted()
        return srdf.estimated_impulse_response(self.state_, lags)
