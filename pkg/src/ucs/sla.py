"""Size- and level-adaptive outer loop.

Alternates alphabet moves (MERGE, ADD-out, ADD-in) with runs of the
level-adaptive sampler.  Each move followed by a sampler run is a round.
Levels are kept sorted ascending, so symbol ``0`` is always the lowest
level and symbol ``k-1`` the highest.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .samplers import ChainState, initial_point, l_mcmc, quantize_to_alphabet

LOWER, UPPER = "lower", "upper"


@dataclass(frozen=True)
class SlaConfig:
    r1: int = 50
    r2: int = 10
    r3: int = 10
    r4a: int = 10
    r4b: int = 10
    max_total: int = 240
    z_init: int = 7
    k1: float = 10.0
    k2: float = 10.0
    c: float = 1.5
    q: int = 2
    delta_q_hat: float | str | None = None
    r0: int = 1
    level_bits: float = 8.0

    def __post_init__(self):
        for name in ("r1", "r2", "r3", "r4a", "r4b", "max_total"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.z_init < 2:
            raise ValueError("z_init must be at least 2")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if self.r0 < 0 or self.level_bits < 0:
            raise ValueError("r0 and level_bits must be non-negative")


@dataclass
class SlaRound:
    """One round; ``energy`` is the adaptive energy, ``objective`` adds the level-description bits."""

    stage: str
    action: str
    n_levels: int
    objective: float
    energy: float
    levels: tuple
    population: tuple
    super_iterations: int


@dataclass
class SlaTrace:
    rounds: list = field(default_factory=list)
    stage_iterations: dict = field(default_factory=dict)
    total_iterations: int = 0
    exhausted: bool = False

    @property
    def final(self):
        return self.rounds[-1]

    @property
    def levels(self):
        return np.array(self.final.levels)

    @property
    def n_levels(self):
        return self.final.n_levels

    def to_csv(self, path=None):
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "stage", "action", "n_levels", "objective", "energy",
                    "super_iterations",
                    "levels", "population"])
        for i, rd in enumerate(self.rounds):
            w.writerow([i, rd.stage, rd.action, rd.n_levels, repr(float(rd.objective)),
                        repr(float(rd.energy)),
                        rd.super_iterations, " ".join(repr(float(v)) for v in rd.levels),
                        " ".join(str(int(v)) for v in rd.population)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _canonical(levels, u):
    """Sort levels ascending and relabel ``u`` to match."""
    levels = np.asarray(levels, dtype=float)
    order = np.argsort(levels, kind="stable")
    lut = np.empty(levels.size, dtype=np.int64)
    lut[order] = np.arange(levels.size)
    return levels[order], lut[np.asarray(u, dtype=np.int64)], lut


def closest_pair(levels):
    """Index ``i`` of the adjacent pair (i, i+1) with the smallest gap; leftmost on ties."""
    return int(np.argmin(np.diff(levels)))


def widest_pair(levels):
    return int(np.argmax(np.diff(levels)))


def merge(levels, u, min_size=2):
    """Fuse the two closest adjacent levels into their midpoint.

    ``levels`` must be sorted.  Returns ``(levels', u', lut)`` with
    ``u' = lut[u]``.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.size - 1 < min_size:
        raise ValueError(f"cannot merge below {min_size} levels")
    i = closest_pair(levels)
    mid = 0.5 * (levels[i] + levels[i + 1])
    new_levels = np.concatenate([levels[:i], [mid], levels[i + 2:]])
    lut = np.arange(levels.size, dtype=np.int64)
    lut[i + 1:] -= 1
    return new_levels, lut[np.asarray(u, dtype=np.int64)], lut


def add_out(levels, u, side):
    """Append empty level(s) one average gap beyond the current range.

    ``side`` is ``"lower"``, ``"upper"``, ``"both"`` or a set of sides.
    Returns ``(levels', u', added)`` where ``added`` lists the new symbol ids.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.size < 2:
        raise ValueError("ADD-out needs at least two levels")
    sides = {LOWER, UPPER} if side == "both" else ({side} if isinstance(side, str) else set(side))
    if not sides <= {LOWER, UPPER}:
        raise ValueError(f"unknown side(s) {sides - {LOWER, UPPER}}")
    lo, hi = levels.min(), levels.max()
    step = (hi - lo) / (levels.size - 1)
    u = np.asarray(u, dtype=np.int64)
    added = []
    if LOWER in sides:
        levels = np.concatenate([[lo - step], levels])
        u = u + 1
        added.append(0)
    if UPPER in sides:
        levels = np.concatenate([levels, [hi + step]])
        added.append(levels.size - 1)
    return levels, u, added


def remove_levels(levels, u, drop):
    """Delete unpopulated levels ``drop`` and compact the symbol ids."""
    levels = np.asarray(levels, dtype=float)
    u = np.asarray(u, dtype=np.int64)
    drop = sorted(set(int(d) for d in drop))
    if drop and np.isin(u, drop).any():
        raise ValueError("cannot remove a populated level")
    keep = np.setdiff1d(np.arange(levels.size), drop)
    lut = np.full(levels.size, -1, dtype=np.int64)
    lut[keep] = np.arange(keep.size)
    return levels[keep], lut[u]


def add_in(state: ChainState, s=None):
    """Insert a level midway across the widest gap and seed it by Boltzmann coin flips.

    An entry on either bounding level moves to the new level with the
    conditional probability it would have given the *other* bounding level.
    Returns the index of the new level.
    """
    levels = state.levels
    if levels.size < 2:
        raise ValueError("ADD-in needs at least two levels")
    s = state.current_s() if s is None else float(s)
    i = widest_pair(levels)
    b1, b2 = i, i + 1
    sites = np.flatnonzero((state.u == b1) | (state.u == b2))
    flip = np.zeros(state.n, dtype=bool)
    coins = state.rng.random(sites.size)
    for coin, p in zip(coins, sites):
        de, _, _ = state.candidate_energies(int(p))
        e1, e2 = de[b1], de[b2]
        if math.isinf(s):
            w1 = 1.0 if e1 <= e2 else 0.0
            w2 = 1.0 - w1
        else:
            lo = min(e1, e2)
            w1 = math.exp(-s * (e1 - lo)) if math.isfinite(e1) else 0.0
            w2 = math.exp(-s * (e2 - lo)) if math.isfinite(e2) else 0.0
        other = w2 if state.u[p] == b1 else w1
        flip[p] = coin < other / (w1 + w2)
    mid = 0.5 * (levels[b1] + levels[b2])
    new_levels = np.concatenate([levels[:b2], [mid], levels[b2:]])
    u = state.u.copy()
    u[u >= b2] += 1
    u[flip] = b2
    state.relabel(u, new_levels)
    return b2


def stage2_merge_close(levels, u, k1, min_size=2):
    """Merge adjacent levels closer than ``range / (k1 * (|Z| - 1))`` until none remain."""
    levels = np.asarray(levels, dtype=float)
    u = np.asarray(u, dtype=np.int64)
    merges = 0
    while levels.size > min_size:
        thresh = (levels.max() - levels.min()) / (k1 * (levels.size - 1))
        if not np.diff(levels).min() < thresh:
            break
        levels, u, _ = merge(levels, u, min_size)
        merges += 1
    return levels, u, merges


def criterion_d1(prev_obj, curr_obj):
    """True when the round improved the objective."""
    return curr_obj < prev_obj


def criterion_d2(population, n, k2):
    """Sides whose extreme level holds fewer than ``n / (k2 |Z|)`` entries."""
    population = np.asarray(population)
    thresh = n / (k2 * population.size)
    sides = set()
    if population[0] < thresh:
        sides.add(LOWER)
    if population[-1] < thresh:
        sides.add(UPPER)
    return sides


def criterion_d3(added, population):
    """``(violated, empty)``: violated when none of the added levels got populated."""
    population = np.asarray(population)
    empty = [a for a in added if population[a] == 0]
    return len(empty) == len(added), empty


def mix_seeds(outputs):
    """Entrywise mean of several estimates of the same signal."""
    outputs = [np.asarray(o, dtype=float) for o in outputs]
    if not outputs:
        raise ValueError("nothing to mix")
    if len({o.shape for o in outputs}) != 1:
        raise ValueError("estimates differ in length")
    return np.mean(outputs, axis=0)


def level_cost(k, n, b):
    """Bits to describe ``k`` reproduction levels: ``k * b * log2(log2(n))``."""
    return k * b * math.log2(max(math.log2(max(n, 2)), 1.0))


class _Budget(Exception):
    pass


class _Runner:
    """Bookkeeping for one SLA run: budget, best state, trace."""

    def __init__(self, state, cfg, trace, energy_rows=None):
        self.state = state
        self.cfg = cfg
        self.trace = trace
        self.energy_rows = energy_rows
        self.best = None

    def objective(self):
        st = self.state
        return float(st.energy) + level_cost(st.k, st.n, self.cfg.level_bits)

    def run(self, stage, action, r):
        remaining = self.cfg.max_total - self.trace.total_iterations
        steps = min(r, remaining)
        if steps > 0:
            l_mcmc(self.state, steps, trace=self.energy_rows)
        self.trace.total_iterations += steps
        self.trace.stage_iterations[stage] = self.trace.stage_iterations.get(stage, 0) + steps
        self.record(stage, action, steps)
        if steps < r:
            self.trace.exhausted = True
            raise _Budget
        return self.objective()

    def record(self, stage, action, steps):
        st = self.state
        obj = self.objective()
        self.trace.rounds.append(SlaRound(stage, action, st.k, obj, float(st.energy),
                                          tuple(st.levels.tolist()), tuple(st.pop.tolist()), steps))
        if self.best is None or obj < self.best[0]:
            self.best = (obj, st.u.copy(), st.levels.copy())


def sla_mcmc(y, phi, sigma_z_sq, cfg: SlaConfig = SlaConfig(), rng=None, energy_trace=None):
    """Estimate ``x`` from ``y = phi x + z``; returns ``(x_hat, trace)``.

    ``energy_trace``, if a list, receives one ``(t, s, H_q, residual, energy)``
    row per super-iteration across all stages.
    """
    rng = np.random.default_rng(rng)
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    xs = initial_point(phi, y)
    lo, hi = float(xs.min()), float(xs.max())
    if hi == lo:
        hi = lo + 1.0
    levels = np.linspace(lo, hi, cfg.z_init)
    u = quantize_to_alphabet(xs, levels)
    state = ChainState(phi, y, u, levels, sigma_z_sq, q=cfg.q, c=cfg.c,
                       delta_q_hat=cfg.delta_q_hat, r0=cfg.r0, rng=rng)
    trace = SlaTrace()
    run = _Runner(state, cfg, trace, energy_trace)
    try:
        _stages(run, state, cfg)
    except _Budget:
        _, u_best, lv_best = run.best
        state.relabel(u_best, lv_best)
        return state.estimate(), trace
    return state.estimate(), trace


def _tidy(state):
    """Sort levels ascending and drop levels no entry uses (the energy ignores them)."""
    lv, u, lut = _canonical(state.levels, state.u)
    empty = np.flatnonzero(np.bincount(u, minlength=lv.size) == 0)
    if empty.size and lv.size - empty.size >= 2:
        lv, u = remove_levels(lv, u, empty)
    elif not np.any(lut != np.arange(lut.size)):
        return
    state.relabel(u, lv)


def _stages(run, state, cfg):
    prev = run.run("1", "init", cfg.r1)

    _tidy(state)
    lv, u, merges = stage2_merge_close(state.levels, state.u, cfg.k1)
    state.relabel(u, lv)
    prev = run.run("2", f"merge_close:{merges}", cfg.r2)

    while True:
        _tidy(state)
        if state.k <= 2:
            break
        snap = state.snapshot()
        lv, u, _ = merge(state.levels, state.u)
        state.relabel(u, lv)
        obj = run.run("3", "merge", cfg.r3)
        if criterion_d1(prev, obj):
            prev = obj
            continue
        state.restore(snap)
        run.record("3", "revert", 0)
        break

    while True:
        _tidy(state)
        sides = criterion_d2(state.pop, state.n, cfg.k2)
        if not sides:
            break
        lv, u, added = add_out(state.levels, state.u, sides)
        state.relabel(u, lv)
        run.run("4a", "add_out:" + "+".join(sorted(sides)), cfg.r4a)
        violated, empty = criterion_d3(added, state.pop)
        if empty:
            lv, u = remove_levels(state.levels, state.u, empty)
            state.relabel(u, lv)
            run.record("4a", f"prune:{len(empty)}", 0)
        prev = run.objective()
        if violated:
            break

    while True:
        _tidy(state)
        snap = state.snapshot()
        add_in(state)
        obj = run.run("4b", "add_in", cfg.r4b)
        if criterion_d1(prev, obj):
            prev = obj
            continue
        state.restore(snap)
        run.record("4b", "revert", 0)
        break
