"""Least-squares reproduction levels for a symbol sequence.

Given ``y ~ phi @ levels[u]`` the residual only depends on the per-symbol
column sums ``mu[:, b] = phi[:, u == b].sum(axis=1)``.  The optimal levels
solve the |Z| x |Z| normal equations ``omega @ levels = theta`` with
``omega = mu.T @ mu`` and ``theta = mu.T @ y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RIDGE_SCALE = 1e-8


class SolveError(ArithmeticError):
    """The normal equations could not be solved even after regularisation."""


@dataclass
class AdaptiveAlphabet:
    """Levels ``map(Z)`` indexed by symbol id, plus per-symbol populations."""

    levels: np.ndarray
    population: np.ndarray = None

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        if self.population is None:
            self.population = np.zeros(self.levels.size, dtype=np.int64)
        self.population = np.asarray(self.population, dtype=np.int64)

    @classmethod
    def from_sequence(cls, levels, u):
        levels = np.asarray(levels, dtype=float)
        pop = np.bincount(np.asarray(u, dtype=np.int64), minlength=levels.size)
        return cls(levels, pop)

    @property
    def size(self):
        return self.levels.size

    @property
    def symbols(self):
        return list(range(self.levels.size))

    def span(self):
        return float(self.levels.max() - self.levels.min()) if self.size else 0.0


@dataclass
class LevelSolver:
    mu: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    population: np.ndarray
    ridge: float | None = None
    yy: float = field(default=0.0)

    @property
    def size(self):
        return self.mu.shape[1]

    def ridge_value(self):
        """Explicit ridge, or ``RIDGE_SCALE * trace(omega) / |Z|`` by default."""
        if self.ridge is not None:
            return float(self.ridge)
        return RIDGE_SCALE * float(np.trace(self.omega)) / self.size


def column_sums(phi, u, n_levels):
    """``mu[m, b] = sum of phi[m, n] over n with u[n] == b``."""
    u = np.asarray(u, dtype=np.int64)
    onehot = np.zeros((u.size, n_levels))
    onehot[np.arange(u.size), u] = 1.0
    return phi @ onehot


def build_solver(phi, y, u, n_levels, ridge=None) -> LevelSolver:
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=np.int64)
    if u.size and (u.min() < 0 or u.max() >= n_levels):
        raise ValueError("sequence holds symbols outside the alphabet")
    mu = column_sums(phi, u, n_levels)
    return LevelSolver(
        mu=mu,
        omega=mu.T @ mu,
        theta=mu.T @ y,
        population=np.bincount(u, minlength=n_levels).astype(np.int64),
        ridge=ridge,
        yy=float(y @ y),
    )


def update_symbol(solver: LevelSolver, phi, y, n, old_sym, new_sym):
    """Move entry ``n`` from ``old_sym`` to ``new_sym``; refresh the two touched rows/columns."""
    if old_sym == new_sym:
        return solver
    col = phi[:, n]
    mu = solver.mu
    mu[:, old_sym] -= col
    mu[:, new_sym] += col
    for b in (old_sym, new_sym):
        row = mu.T @ mu[:, b]
        solver.omega[b, :] = row
        solver.omega[:, b] = row
        solver.theta[b] = mu[:, b] @ y
    solver.population[old_sym] -= 1
    solver.population[new_sym] += 1
    return solver


def _solve_active(omega, theta, active, ridge):
    a = omega[np.ix_(active, active)] + ridge * np.eye(active.size)
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.solve(a, theta[active])
        except np.linalg.LinAlgError as exc:
            raise SolveError(str(exc)) from exc
    z = np.linalg.solve(c, theta[active])
    return np.linalg.solve(c.T, z)


def solve_map_opt(solver: LevelSolver, previous=None) -> np.ndarray:
    """Least-squares levels for the populated symbols.

    Empty symbols are left out of the solve and keep their ``previous``
    value (zero when no previous mapping is given).
    """
    k = solver.size
    out = np.zeros(k) if previous is None else np.array(previous, dtype=float)
    active = np.flatnonzero(solver.population > 0)
    if active.size == 0:
        return out
    sol = _solve_active(solver.omega, solver.theta, active, solver.ridge_value())
    if not np.all(np.isfinite(sol)):
        raise SolveError("non-finite level solution")
    out[active] = sol
    return out


def fast_residual(solver: LevelSolver, levels, y) -> float:
    """``||y - phi @ levels[u]||^2`` from the column sums, O(M |Z|)."""
    r = np.asarray(y, dtype=float) - solver.mu @ np.asarray(levels, dtype=float)
    return float(r @ r)


def gram_residual(yy, omega, theta, levels):
    """Same residual from ``omega``/``theta`` alone: ``y'y - 2 l'theta + l'omega l``."""
    levels = np.asarray(levels, dtype=float)
    return float(yy - 2.0 * levels @ theta + levels @ omega @ levels)
