"""Estimator-style facade over a simulation run.

``fit`` integrates the configured problem; ``predict`` and ``transform``
evaluate the final fields at query points. Hyperparameters are the
configuration fields, so ``get_params`` / ``set_params`` and cloning work
as for any scikit-learn estimator.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .config import ProblemConfig


def check_points(X, config: ProblemConfig) -> np.ndarray:
    """Validate query points: finite, shape (n, 2), inside the domain."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected points of shape (n, 2), got {X.shape}")
    slack = 1e-12 * max(config.Lx, config.Ly)
    if (X[:, 0].min() < -slack or X[:, 0].max() > config.Lx + slack
            or X[:, 1].min() < -slack or X[:, 1].max() > config.Ly + slack):
        raise ValueError("query points outside the domain")
    return X


class SlipFlowSimulator(TransformerMixin, BaseEstimator):
    """Run a miscible-flow simulation and query its final state.

    Parameters
    ----------
    config : dict, optional
        Nested configuration (same layout as the TOML file) used as base.
    nu0, d, k, T, dt, nx, ny, m_reg, law : optional
        Overrides of the corresponding configuration fields.

    Attributes
    ----------
    config_ : ProblemConfig
    records_ : list of EnergyRecord
    state_ : State
    summary_ : dict
    """

    def __init__(self, config=None, nu0=None, d=None, k=None, T=None, dt=None,
                 nx=None, ny=None, m_reg=None, law=None):
        self.config = config
        self.nu0 = nu0
        self.d = d
        self.k = k
        self.T = T
        self.dt = dt
        self.nx = nx
        self.ny = ny
        self.m_reg = m_reg
        self.law = law

    def _build_config(self) -> ProblemConfig:
        base = ProblemConfig.from_dict(self.config or {})
        over = {name: value for name, value in self.get_params(deep=False).items()
                if name != "config" and value is not None}
        return base.replace(**over) if over else base

    def fit(self, X=None, y=None):
        """Integrate the problem. ``X`` and ``y`` are ignored."""
        from .diagnostics import trajectory_monitors
        from .stepper import run

        cfg = self._build_config()
        res = run(cfg)
        self.config_ = cfg
        self.spaces_ = res.problem.spaces
        self.records_ = res.records
        self.state_ = res.final
        self.summary_ = trajectory_monitors(res.records, cfg, res.initial_record)
        return self

    def predict(self, X) -> np.ndarray:
        """Final velocity at points ``X`` (n, 2)."""
        check_is_fitted(self, "state_")
        X = check_points(X, self.config_)
        return self.spaces_.evaluate(self.state_.u, X)

    def transform(self, X) -> np.ndarray:
        """Columns ``(u_x, u_y, p, C)`` of the final state at points ``X``; ``p`` has zero mean."""
        check_is_fitted(self, "state_")
        X = check_points(X, self.config_)
        u = self.spaces_.evaluate(self.state_.u, X)
        p = self.spaces_.evaluate_pressure(self.state_.p, X) - self.spaces_.pressure_mean(self.state_.p)
        C = self.spaces_.evaluate(self.state_.C, X)
        return np.column_stack([u, p, C])

    def score(self, X=None, y=None) -> float:
        """Negative final total energy (larger is calmer); for API completeness."""
        check_is_fitted(self, "records_")
        return -float(self.records_[-1].total) if self.records_ else 0.0
