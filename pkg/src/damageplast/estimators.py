"""Estimator-style wrappers around evolution and verification.

The fitted object is the trajectory. Time is the only sample axis: methods
taking ``X`` expect query times (one column), and the piecewise-constant
interpolant of the stored states answers them.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_scenario, check_times
from .energetics import default_competitors, verify_trajectory
from .solver import run_evolution

FEATURE_NAMES = ("E_total", "W_part", "J_part", "G_part", "H_part", "diss_cum", "min_chi", "max_normD")


class IncrementalEnergyMinimizer(TransformerMixin, BaseEstimator):
    """Time-incremental minimization of a scenario.

    Parameters
    ----------
    scenario : Scenario
    n_steps : int or None
        Overrides the number of time steps of the scenario.
    stationarity_tol, am_max_sweeps : optional overrides of the solver settings.
    """

    def __init__(self, scenario=None, n_steps=None, stationarity_tol=None, am_max_sweeps=None):
        self.scenario = scenario
        self.n_steps = n_steps
        self.stationarity_tol = stationarity_tol
        self.am_max_sweeps = am_max_sweeps

    def _effective_scenario(self):
        sc = check_scenario(self.scenario)
        if self.n_steps is not None:
            sc = replace(sc, time=replace(sc.time, n_steps=int(self.n_steps))).validated()
        changes = {
            k: v
            for k, v in (("stationarity_tol", self.stationarity_tol), ("am_max_sweeps", self.am_max_sweeps))
            if v is not None
        }
        if changes:
            sc = replace(sc, solver=replace(sc.solver, **changes)).validated()
        return sc

    def fit(self, X=None, y=None):
        """Run the evolution; ``X`` and ``y`` are ignored."""
        sc = self._effective_scenario()
        self.scenario_ = sc
        self.trajectory_ = run_evolution(sc)
        self.times_ = self.trajectory_.times
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def _index(self, X):
        check_is_fitted(self, "trajectory_")
        t = check_times(X, self.scenario_.time.T)
        idx = np.searchsorted(self.times_, t, side="right") - 1
        return np.clip(idx, 0, len(self.times_) - 1)

    def predict(self, X):
        """Stored states at the query times, as a list of :class:`StateFields`."""
        return [self.trajectory_[k].fields for k in self._index(X)]

    def transform(self, X):
        """Energy parts, cumulative dissipation and field extremes at the query times."""
        rows = []
        for k in self._index(X):
            s = self.trajectory_[k]
            d = s.fields.d
            w = self.scenario_.disc.weights
            rows.append(
                [
                    s.energy.total,
                    *s.energy.as_tuple(),
                    s.diss_cum,
                    float(s.fields.chi.min()),
                    float(np.sqrt((d * d) @ w).max()),
                ]
            )
        return np.array(rows, dtype=float).reshape(-1, len(FEATURE_NAMES))

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)


class EnergeticVerifier(BaseEstimator):
    """Stability sampling and energy-balance check of a trajectory.

    ``fit`` takes the trajectory as ``X``. ``predict`` answers, per query
    time, whether the stored state passed stability sampling.
    """

    def __init__(self, scenario=None, specs=None, conditions=False, samples=1000):
        self.scenario = scenario
        self.specs = specs
        self.conditions = conditions
        self.samples = samples

    def fit(self, X, y=None):
        sc = check_scenario(self.scenario)
        specs = self.specs if self.specs is not None else default_competitors(sc.verification)
        self.scenario_ = sc
        self.times_ = X.times
        self.report_ = verify_trajectory(X, sc, specs, self.conditions, self.samples)
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        t = check_times(X, self.scenario_.time.T)
        idx = np.clip(np.searchsorted(self.times_, t, side="right") - 1, 0, len(self.times_) - 1)
        if not self.report_.stability:
            return np.zeros(len(idx), dtype=bool)
        ok = np.array([not r.violated for r in self.report_.stability])
        return ok[idx]

    def score(self, X=None, y=None):
        """Fraction of stored steps without a stability finding."""
        check_is_fitted(self, "report_")
        if not self.report_.stability:
            return 0.0
        return float(np.mean([not r.violated for r in self.report_.stability]))
