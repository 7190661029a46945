"""Annealed Gibbs samplers over fixed and adaptive reproduction alphabets.

Both samplers minimise the energy

    E(w) = N * H_q(w) + c4 * ||y - phi @ levels[w]||^2,   c4 = log2(e) / (2 sigma^2)

one entry at a time, visiting the entries in a fresh random order every
super-iteration.  The fixed-alphabet sampler (:func:`b_mcmc`) keeps the
levels constant; the level-adaptive sampler (:func:`l_mcmc`) re-fits the
least-squares levels for every candidate symbol.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .annealing import LOG2E, AnnealingSchedule, estimate_delta_q
from .levels import RIDGE_SCALE

MAX_DENSE_CELLS = 1 << 24
# default schedule: s_t = ENERGY_SCALE * ln(t + r0) / c.  Typical single-site
# energy gaps are tens to thousands of bits, so this is cold enough to settle
# within a few hundred sweeps while the first sweeps still move freely.
ENERGY_SCALE = 100.0


def energy_constant(noise_var):
    """``c4 = log2(e) / (2 sigma^2)``: nats-to-bits scaled likelihood weight."""
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    return LOG2E / (2.0 * noise_var)


def energy(phi, y, levels, u, q, noise_var):
    """From-scratch ``N * H_q(u) + c4 * ||y - phi @ levels[u]||^2``."""
    from .entropy import empirical_entropy

    u = np.asarray(u, dtype=np.int64)
    r = np.asarray(y, dtype=float) - np.asarray(phi, dtype=float) @ np.asarray(levels)[u]
    return u.size * empirical_entropy(u, q) + energy_constant(noise_var) * float(r @ r)


def initial_point(phi, y):
    """``phi.T @ y``: a cheap preliminary estimate."""
    return np.asarray(phi, dtype=float).T @ np.asarray(y, dtype=float)


def quantize_to_alphabet(x, levels):
    """Index of the nearest level for every entry of ``x``; ties go to the lower level."""
    x = np.asarray(x, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if levels.size == 0:
        raise ValueError("alphabet is empty")
    order = np.argsort(levels, kind="stable")
    lv = levels[order]
    hi = np.clip(np.searchsorted(lv, x, side="left"), 0, lv.size - 1)
    lo = np.clip(hi - 1, 0, lv.size - 1)
    pick = np.where(np.abs(x - lv[lo]) <= np.abs(lv[hi] - x), lo, hi)
    return order[pick].astype(np.int64)


@dataclass(frozen=True)
class FixedAlphabet:
    """Uniform reproduction grid with step ``1/gamma``, ``gamma = ceil(ln N)``."""

    levels: np.ndarray

    @classmethod
    def grid(cls, n, c3):
        gamma = math.ceil(math.log(n))
        half = int(round(c3 * gamma * gamma))
        return cls(np.arange(-half, half + 1) / gamma)

    @classmethod
    def covering(cls, n, x_min, x_max):
        """Smallest symmetric grid that spans ``[x_min, x_max]``."""
        gamma = math.ceil(math.log(n))
        half = math.ceil(max(abs(x_min), abs(x_max)) * gamma)
        return cls.grid(n, half / gamma**2)

    @property
    def size(self):
        return len(self.levels)


def _dense_guard(k, q):
    if k ** (q + 1) > MAX_DENSE_CELLS:
        raise ValueError(f"|Z|={k} with q={q} needs {k ** (q + 1)} count cells")


def _resolve_delta(delta_q_hat, n, phi, levels, c4, q, y):
    if delta_q_hat is None:
        return 1.0 / (ENERGY_SCALE * n)
    if isinstance(delta_q_hat, str):
        if delta_q_hat != "bound":
            raise ValueError(f"unknown delta_q_hat mode {delta_q_hat!r}")
        return estimate_delta_q(phi, levels, c4, q, y)
    return float(delta_q_hat)


def _sweep_randomness(rng, n):
    return rng.permutation(n).astype(np.int64), rng.random(n)


def b_mcmc(y, phi, alphabet, sigma_z_sq, r, c=1.5, q=2, rng=None, *, delta_q_hat=None,
           r0=0, init=None, s_override=None, trace=None):
    """Fixed-alphabet annealed Gibbs sampler.

    Starts from the quantised ``phi.T @ y`` (or ``init``) and returns the
    symbol sequence after ``r`` super-iterations; ``alphabet.levels[w]``
    is the estimate.  With ``r0=0`` the first sweep runs at ``s=0`` and
    forgets the initial point; ``r0=1`` keeps it.  ``trace``, if a list,
    receives one ``(t, s, H_q, residual, energy)`` row per super-iteration.
    """
    rng = np.random.default_rng(rng)
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    levels = np.asarray(getattr(alphabet, "levels", alphabet), dtype=float)
    m, n = phi.shape
    k = levels.size
    q = int(q)
    _dense_guard(k, q)
    c4 = energy_constant(sigma_z_sq)
    if init is None:
        w = quantize_to_alphabet(initial_point(phi, y), levels)
    else:
        w = np.array(init, dtype=np.int64)
    if r == 0:
        return w
    sched = AnnealingSchedule(c, n, _resolve_delta(delta_q_hat, n, phi, levels, c4, q, y), r0)
    phit = np.ascontiguousarray(phi.T)
    col_sq = np.einsum("ij,ij->j", phi, phi)
    xlx = K.xlog2x_table(n)
    counts, tot = K.dense_counts(w, q, k)
    for t in range(1, r + 1):
        s = sched.s(t) if s_override is None else s_override
        order, unif = _sweep_randomness(rng, n)
        res = y - phi @ levels[w]
        acc = np.array([K.nh_from_counts(counts, tot, xlx), float(res @ res)])
        K.bmcmc_sweep(order, unif, s, w, levels, phit, col_sq, res, c4, q, counts, tot, xlx, acc)
        if trace is not None:
            res = y - phi @ levels[w]
            nh = K.nh_from_counts(counts, tot, xlx)
            rr = float(res @ res)
            trace.append((t, s, nh / n, rr, nh + c4 * rr))
    return w


class ChainState:
    """Everything one level-adaptive chain carries between sweeps.

    ``u`` holds symbol ids ``0..k-1`` and ``levels`` their real values.
    ``mut`` is the transposed column-sum matrix (k x M), ``omega``/``theta``
    the normal equations, ``acc = [N * H_q, residual]``.
    """

    def __init__(self, phi, y, u, levels, noise_var, *, q=2, c=1.5, delta_q_hat=None, r0=0,
                 rng=None, ridge_rel=RIDGE_SCALE):
        self.phi = np.asarray(phi, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.m, self.n = self.phi.shape
        self.phit = np.ascontiguousarray(self.phi.T)
        self.col_sq = np.einsum("ij,ij->j", self.phi, self.phi)
        self.phity = self.phit @ self.y
        self.yy = float(self.y @ self.y)
        self.noise_var = float(noise_var)
        self.c4 = energy_constant(noise_var)
        self.q = int(q)
        self.c = float(c)
        self.delta_q_hat = delta_q_hat
        self.r0 = int(r0)
        self.rng = np.random.default_rng(rng)
        self.ridge_rel = float(ridge_rel)
        self.xlx = K.xlog2x_table(self.n)
        if self.n <= self.q:
            raise ValueError(f"signal length {self.n} needs to exceed q={self.q}")
        self.u = np.array(u, dtype=np.int64)
        self.levels = np.array(levels, dtype=float)
        self.rebuild()

    @property
    def k(self):
        return self.levels.size

    @property
    def population(self):
        return self.pop

    @property
    def h_q(self):
        return self.acc[0] / self.n

    @property
    def resid(self):
        return self.acc[1]

    @property
    def energy(self):
        return self.acc[0] + self.c4 * self.acc[1]

    def estimate(self):
        return self.levels[self.u]

    def rebuild(self):
        """Recompute counts, column sums and normal equations from ``u`` and ``levels``."""
        k, q = self.k, self.q
        _dense_guard(k, q)
        if self.u.size != self.n:
            raise ValueError("sequence length does not match phi")
        if self.u.min() < 0 or self.u.max() >= k:
            raise ValueError("sequence holds symbols outside the alphabet")
        self.counts, self.tot = K.dense_counts(self.u, q, k)
        onehot = np.zeros((k, self.n))
        onehot[self.u, np.arange(self.n)] = 1.0
        self.mut = onehot @ self.phit
        self.omega = self.mut @ self.mut.T
        self.theta = self.mut @ self.y
        self.pop = np.bincount(self.u, minlength=k).astype(np.int64)
        res = self.y - self.mut.T @ self.levels
        self.acc = np.array([K.nh_from_counts(self.counts, self.tot, self.xlx), float(res @ res)])

    def resolve(self):
        """Replace populated levels by their least-squares values."""
        k = self.k
        out = np.empty(k)
        r = K.solve_levels(self.omega, self.theta, self.pop, self.levels, self.ridge_rel, self.yy,
                           out, np.empty((k, k)), np.empty(k, np.int64), np.empty(k), np.empty(k))
        if r == np.inf:
            return False
        self.levels = out
        res = self.y - self.mut.T @ self.levels
        self.acc[1] = float(res @ res)
        return True

    def relabel(self, u, levels):
        """Install a new alphabet and sequence (after MERGE / ADD moves)."""
        self.u = np.array(u, dtype=np.int64)
        self.levels = np.array(levels, dtype=float)
        self.rebuild()

    def schedule(self):
        dq = _resolve_delta(self.delta_q_hat, self.n, self.phi, self.levels, self.c4, self.q, self.y)
        return AnnealingSchedule(self.c, self.n, dq, self.r0)

    def current_s(self):
        """Inverse temperature of the most recent super-iteration (0 before any)."""
        if self.r0 < 1:
            return 0.0
        return self.schedule().shifted(-1).s(1)

    def candidate_energies(self, p):
        """Energy change and re-fitted levels for every symbol at entry ``p``."""
        k = self.k
        de, cand, cres = np.empty(k), np.empty((k, k)), np.empty(k)
        K.site_energies(p, self.u, self.phit, self.col_sq, self.phity, self.yy, self.c4, self.q,
                        self.counts, self.tot, self.xlx, self.mut, self.omega, self.theta,
                        self.levels, self.pop, self.ridge_rel, self.acc[1], de, cand, cres, True)
        return de, cand, cres

    def snapshot(self):
        return {key: copy.deepcopy(getattr(self, key)) for key in _STATE_KEYS}

    def restore(self, snap):
        for key, value in snap.items():
            setattr(self, key, copy.deepcopy(value))

    def _sweep(self, order, unif, s):
        K.lmcmc_sweep(order, unif, s, self.u, self.phit, self.col_sq, self.phity, self.yy, self.c4,
                      self.q, self.counts, self.tot, self.xlx, self.mut, self.omega, self.theta,
                      self.levels, self.pop, self.ridge_rel, self.acc, True)


_STATE_KEYS = ("u", "levels", "counts", "tot", "mut", "omega", "theta", "pop", "acc")


def gibbs_site_update(state: ChainState, n, s=None):
    """Resample entry ``n`` from its conditional Boltzmann distribution.

    ``s`` defaults to the chain's current inverse temperature; pass
    ``math.inf`` for a greedy (zero-temperature) move.
    """
    s = state.current_s() if s is None else float(s)
    state._sweep(np.array([n], dtype=np.int64), state.rng.random(1), s)
    return int(state.u[n])


def l_mcmc(state: ChainState, r, *, trace=None, s_override=None):
    """Run ``r`` super-iterations of the level-adaptive sampler.

    Returns ``(estimate, levels, r0)`` where ``r0`` is the temperature
    offset to hand to the next call; ``state`` is advanced in place.
    """
    state.rebuild()
    state.resolve()
    sched = state.schedule()
    for t in range(1, r + 1):
        s = sched.s(t) if s_override is None else s_override
        order, unif = _sweep_randomness(state.rng, state.n)
        state._sweep(order, unif, s)
        # full recompute caps drift of the incremental updates
        state.rebuild()
        if trace is not None:
            trace.append((state.r0 + t, s, state.h_q, state.resid, state.energy))
    state.r0 += r
    return state.estimate(), state.levels.copy(), state.r0
