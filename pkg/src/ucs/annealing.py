"""Boltzmann weights, categorical draws and the logarithmic cooling law."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class AnnealingSchedule:
    """Inverse temperature ``s_t = ln(t + r0) / (c * n * delta_q_hat)``.

    ``delta_q_hat`` stands in for the largest single-site energy change.
    A true upper bound (see :func:`estimate_delta_q`) keeps the convergence
    guarantee but cools far too slowly for finite runs; the samplers
    default to ``delta_q_hat = 1 / (100 n)``, i.e. ``s_t = 100 ln(t + r0) / c``.
    """

    c: float
    n: int
    delta_q_hat: float
    r0: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("temperature constant must be positive")
        if not self.delta_q_hat > 0 or not math.isfinite(self.delta_q_hat):
            raise ValueError("delta_q_hat must be finite and positive")
        if self.n < 1:
            raise ValueError("n must be positive")

    def s(self, t):
        return schedule_s(t, self)

    def shifted(self, r):
        """Schedule continuing after ``r`` more super-iterations."""
        return AnnealingSchedule(self.c, self.n, self.delta_q_hat, self.r0 + r)


def schedule_s(t, sched: AnnealingSchedule) -> float:
    x = t + sched.r0
    if x < 1:
        raise ValueError(f"t + r0 = {x} < 1 has no defined temperature")
    return math.log(x) / (sched.c * sched.n * sched.delta_q_hat)


def boltzmann_weights(energies, s):
    """Normalised ``exp(-s * E)`` over candidates.

    Energies are shifted by their minimum first.  ``s = inf`` puts all
    mass on the first minimiser; infinite energies get zero weight.
    """
    e = np.asarray(energies, dtype=float)
    if s < 0 or math.isnan(s):
        raise ValueError("inverse temperature must be non-negative")
    finite = np.isfinite(e)
    if not finite.any():
        raise ValueError("no candidate has finite energy")
    if np.any(np.isnan(e)):
        raise ValueError("energies contain NaN")
    w = np.zeros(e.size)
    if math.isinf(s):
        w[int(np.argmin(np.where(finite, e, np.inf)))] = 1.0
        return w
    shifted = e[finite] - e[finite].min()
    w[finite] = np.exp(-s * shifted)
    return w / w.sum()


def sample_categorical(p, uniform):
    """Inverse-CDF draw: first index whose cumulative mass exceeds ``uniform``."""
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, uniform * cdf[-1], side="right"))
    return min(idx, len(p) - 1)


def entropy_change_bound(n, q, alphabet_size):
    """Upper bound on |N * delta H_q| for one substitution.

    A substitution moves one observation out of and one into each of the
    ``q + 1`` affected contexts; every such move changes
    ``S log S - sum n log n`` by at most ``log2(N) + log2(e)``.
    """
    return 2 * (q + 1) * (math.log2(max(n, 2)) + max(math.log2(max(alphabet_size, 1)), LOG2E))


def estimate_delta_q(phi, levels, c4, q, y=None):
    """Computable upper bound on the largest single-site energy change.

    With ``r = y - phi w`` and a level step ``d`` at entry ``n``,
    ``|delta ||r||^2| <= d^2 ||phi_n||^2 + 2 |d| |phi_n' r|`` and
    ``|phi_n' r| <= ||phi_n|| (||y|| + ||phi||_2 sqrt(N) max|level|)``.
    """
    phi = np.asarray(phi, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if not np.all(np.isfinite(levels)):
        raise ValueError("level span must be finite")
    m, n = phi.shape
    span = float(levels.max() - levels.min()) if levels.size else 0.0
    entropy_term = entropy_change_bound(n, q, levels.size)
    if span == 0.0:
        return entropy_term
    if math.isinf(c4):
        raise ValueError("c4 is infinite; a noise variance > 0 is required")
    col_norm = np.sqrt(np.max(np.sum(phi * phi, axis=0)))
    y_norm = 0.0 if y is None else float(np.linalg.norm(y))
    op_norm = float(np.linalg.norm(phi, 2))
    lmax = float(np.max(np.abs(levels)))
    corr = col_norm * (y_norm + op_norm * math.sqrt(n) * lmax)
    return entropy_term + c4 * (col_norm**2 * span**2 + 2.0 * span * corr)
