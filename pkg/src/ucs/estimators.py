"""scikit-learn style wrappers.

The design matrix ``X`` is the measurement matrix (M samples x N features)
and ``y`` the measurements, so ``coef_`` is the reconstructed signal and
``predict(X)`` re-measures it.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state, check_X_y

from .samplers import ChainState, FixedAlphabet, b_mcmc, initial_point, l_mcmc, quantize_to_alphabet
from .sla import SlaConfig, mix_seeds, sla_mcmc


def _check_noise(noise_var):
    if noise_var is None or not float(noise_var) > 0 or not np.isfinite(noise_var):
        raise ValueError("noise_var must be a finite positive number")
    return float(noise_var)


class _SignalRegressor(RegressorMixin, BaseEstimator):
    def _validate(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        return X, y

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_

    def _seeds(self):
        rs = check_random_state(self.random_state)
        return [np.random.default_rng(int(s)) for s in rs.randint(0, 2**31 - 1, size=self.n_seeds)]


class SLARegressor(_SignalRegressor):
    """Size- and level-adaptive reconstruction; ``n_seeds`` runs are averaged."""

    def __init__(self, noise_var=None, r1=50, r2=10, r3=10, r4a=10, r4b=10, max_total=240,
                 z_init=7, k1=10.0, k2=10.0, c=1.5, q=2, r0=1, level_bits=8.0, n_seeds=1,
                 random_state=None):
        self.noise_var = noise_var
        self.r1 = r1
        self.r2 = r2
        self.r3 = r3
        self.r4a = r4a
        self.r4b = r4b
        self.max_total = max_total
        self.z_init = z_init
        self.k1 = k1
        self.k2 = k2
        self.c = c
        self.q = q
        self.r0 = r0
        self.level_bits = level_bits
        self.n_seeds = n_seeds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        noise = _check_noise(self.noise_var)
        cfg = SlaConfig(r1=self.r1, r2=self.r2, r3=self.r3, r4a=self.r4a, r4b=self.r4b,
                        max_total=self.max_total, z_init=self.z_init, k1=self.k1, k2=self.k2,
                        c=self.c, q=self.q, r0=self.r0, level_bits=self.level_bits)
        runs = [sla_mcmc(y, X, noise, cfg, rng) for rng in self._seeds()]
        self.estimates_ = [r[0] for r in runs]
        self.traces_ = [r[1] for r in runs]
        self.coef_ = mix_seeds(self.estimates_)
        self.levels_ = self.traces_[0].levels
        self.n_levels_ = self.traces_[0].n_levels
        return self


class LMCMCRegressor(_SignalRegressor):
    """Level-adaptive sampler with a fixed number of levels."""

    def __init__(self, noise_var=None, n_levels=7, n_iter=100, c=1.5, q=2, n_seeds=1,
                 random_state=None):
        self.noise_var = noise_var
        self.n_levels = n_levels
        self.n_iter = n_iter
        self.c = c
        self.q = q
        self.n_seeds = n_seeds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        noise = _check_noise(self.noise_var)
        if self.n_levels < 1:
            raise ValueError("n_levels must be positive")
        xs = initial_point(X, y)
        lo, hi = float(xs.min()), float(xs.max())
        levels = np.linspace(lo, hi if hi > lo else lo + 1.0, self.n_levels)
        u0 = quantize_to_alphabet(xs, levels)
        ests, lvs = [], []
        for rng in self._seeds():
            st = ChainState(X, y, u0, levels, noise, q=self.q, c=self.c, r0=1, rng=rng)
            est, lv, _ = l_mcmc(st, self.n_iter)
            ests.append(est)
            lvs.append(lv)
        self.estimates_ = ests
        self.coef_ = mix_seeds(ests)
        self.levels_ = lvs[0]
        self.n_levels_ = int(np.unique(self.estimates_[0]).size)
        return self


class BMCMCRegressor(_SignalRegressor):
    """Annealed Gibbs sampler over a fixed reproduction grid.

    ``levels=None`` uses the smallest uniform grid of step ``1/ceil(ln N)``
    that covers the initial point ``X.T @ y``.  ``r0=1`` starts the schedule
    above zero so the first sweep does not scramble that initial point.
    """

    def __init__(self, noise_var=None, levels=None, n_iter=100, c=1.5, q=2, r0=1, n_seeds=1,
                 random_state=None):
        self.noise_var = noise_var
        self.levels = levels
        self.r0 = r0
        self.n_iter = n_iter
        self.c = c
        self.q = q
        self.n_seeds = n_seeds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        noise = _check_noise(self.noise_var)
        if self.levels is None:
            xs = initial_point(X, y)
            alphabet = FixedAlphabet.covering(X.shape[1], float(xs.min()), float(xs.max()))
        else:
            alphabet = FixedAlphabet(np.asarray(self.levels, dtype=float))
        ests = []
        for rng in self._seeds():
            w = b_mcmc(y, X, alphabet, noise, self.n_iter, c=self.c, q=self.q, rng=rng, r0=self.r0)
            ests.append(alphabet.levels[w])
        self.estimates_ = ests
        self.coef_ = mix_seeds(ests)
        self.levels_ = np.asarray(alphabet.levels)
        self.n_levels_ = alphabet.size
        return self


class LeastSquaresBaseline(_SignalRegressor):
    """Minimum-norm least squares; the reference every sampler should beat."""

    def fit(self, X, y):
        X, y = self._validate(X, y)
        self.coef_ = np.linalg.lstsq(X, y, rcond=None)[0]
        return self
