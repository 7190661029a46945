"""Order-q empirical symbol counts and conditional empirical entropy.

For a sequence ``u`` over symbols ``0..k-1`` the counts ``n(alpha)[beta]``
tally positions ``i >= q`` whose preceding ``q`` symbols are ``alpha`` and
whose own symbol is ``beta``.  With ``S(alpha) = sum_beta n(alpha)[beta]``,

    N * H_q(u) = sum_alpha [ S log2 S - sum_beta n log2 n ],

so each context contributes independently and a single-symbol change only
touches the ``q + 1`` contexts that see position ``pos``.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np


def _xlogx(k):
    return k * math.log2(k) if k > 1 else 0.0


def empirical_entropy(u, q, alphabet_size=None):
    """From-scratch H_q(u) in bits per symbol (normalised by len(u))."""
    u = [int(v) for v in u]
    n = len(u)
    if n <= q:
        raise ValueError(f"sequence of length {n} has no order-{q} contexts")
    joint = Counter()
    marginal = Counter()
    for i in range(q, n):
        ctx = tuple(u[i - q:i])
        joint[ctx, u[i]] += 1
        marginal[ctx] += 1
    total = 0.0
    for (ctx, _), c in joint.items():
        total -= c * math.log2(c / marginal[ctx])
    return total / n


class ContextCounts:
    """Sparse order-q count table with a cached entropy.

    Rows are keyed by the context tuple; only contexts that occur are
    stored.  ``nh`` caches ``N * H_q`` as the sum of per-context
    contributions kept in ``contrib``.
    """

    def __init__(self, q, alphabet_size, n):
        if q < 0:
            raise ValueError("context depth must be non-negative")
        if alphabet_size < 1:
            raise ValueError("alphabet must hold at least one symbol")
        self.q = int(q)
        self.alphabet_size = int(alphabet_size)
        self.n = int(n)
        self.table: dict[tuple, np.ndarray] = {}
        self.contrib: dict[tuple, float] = {}
        self.nh = 0.0

    @classmethod
    def from_sequence(cls, u, q, alphabet_size):
        u = np.asarray(u, dtype=np.int64)
        n = u.size
        if n <= q:
            raise ValueError(f"sequence of length {n} has no order-{q} contexts")
        if n and (u.min() < 0 or u.max() >= alphabet_size):
            raise ValueError("sequence holds symbols outside the alphabet")
        self = cls(q, alphabet_size, n)
        for i in range(q, n):
            ctx = tuple(u[i - q:i].tolist())
            row = self.table.get(ctx)
            if row is None:
                row = self.table[ctx] = np.zeros(alphabet_size, dtype=np.int64)
            row[u[i]] += 1
        for ctx, row in self.table.items():
            self.contrib[ctx] = self._row_contrib(row)
        self.nh = math.fsum(self.contrib.values())
        return self

    @staticmethod
    def _row_contrib(row):
        s = int(row.sum())
        return _xlogx(s) - math.fsum(_xlogx(int(c)) for c in row)

    @property
    def h_q(self):
        """Conditional empirical entropy in bits per symbol."""
        return self.nh / self.n

    def total(self):
        return int(sum(int(r.sum()) for r in self.table.values()))

    def count(self, context, symbol):
        row = self.table.get(tuple(context))
        return 0 if row is None else int(row[symbol])

    def _touched(self, u, pos, new_sym):
        """(context, old symbol, new context, new symbol) for each affected position."""
        q, n = self.q, self.n
        old = u[max(0, pos - q):min(n, pos + q + 1)].tolist()
        new = list(old)
        new[pos - max(0, pos - q)] = int(new_sym)
        offset = max(0, pos - q)
        changes = []
        for i in range(max(pos, q), min(pos + q, n - 1) + 1):
            j = i - offset
            changes.append((tuple(old[j - q:j]), old[j], tuple(new[j - q:j]), new[j]))
        return changes

    def _apply(self, changes):
        """Move counts per ``changes``; return the affected contexts' old contributions."""
        saved = {}
        for ctx, sym, _, _ in changes:
            saved.setdefault(ctx, self.contrib.get(ctx, 0.0))
            self.table[ctx][sym] -= 1
        for _, _, ctx, sym in changes:
            saved.setdefault(ctx, self.contrib.get(ctx, 0.0))
            row = self.table.get(ctx)
            if row is None:
                row = self.table[ctx] = np.zeros(self.alphabet_size, dtype=np.int64)
            row[sym] += 1
        return saved

    def _check(self, u, pos, new_sym):
        if not 0 <= pos < self.n:
            raise IndexError(f"position {pos} outside [0, {self.n})")
        if not 0 <= new_sym < self.alphabet_size:
            raise ValueError(f"symbol {new_sym} outside the alphabet")

    def delta(self, u, pos, new_sym):
        """H_q change (bits/symbol) if ``u[pos]`` became ``new_sym``; counts unchanged."""
        self._check(u, pos, new_sym)
        if u[pos] == new_sym:
            return 0.0
        changes = self._touched(u, pos, new_sym)
        saved = self._apply(changes)
        d = math.fsum(self._row_contrib(self.table[c]) - old for c, old in saved.items())
        self._apply([(b, bs, a, as_) for a, as_, b, bs in changes])
        for ctx in saved:
            if ctx not in self.contrib and not self.table[ctx].any():
                del self.table[ctx]
        return d / self.n

    def commit(self, u, pos, new_sym):
        """Set ``u[pos] = new_sym`` in place and update the table and cached entropy."""
        self._check(u, pos, new_sym)
        if u[pos] == new_sym:
            return self
        changes = self._touched(u, pos, new_sym)
        saved = self._apply(changes)
        for ctx, old in saved.items():
            row = self.table[ctx]
            if row.any():
                c = self._row_contrib(row)
                self.contrib[ctx] = c
            else:
                c = 0.0
                del self.table[ctx]
                self.contrib.pop(ctx, None)
            self.nh += c - old
        u[pos] = new_sym
        return self

    def remap(self, u, relabel, alphabet_size=None):
        """Relabel every symbol through ``relabel`` and rebuild.

        ``relabel`` maps each old symbol to a new one (a dict or sequence
        indexed by old symbol).  Returns the relabeled sequence and its counts.
        """
        u = np.asarray(u, dtype=np.int64)
        if isinstance(relabel, dict):
            missing = set(range(self.alphabet_size)) - set(relabel)
            if missing:
                raise KeyError(f"relabeling does not cover symbols {sorted(missing)}")
            lut = np.array([relabel[s] for s in range(self.alphabet_size)], dtype=np.int64)
        else:
            lut = np.asarray(relabel, dtype=np.int64)
            if lut.size != self.alphabet_size:
                raise KeyError("relabeling must cover every old symbol")
        if alphabet_size is None:
            alphabet_size = int(lut.max()) + 1
        new_u = lut[u]
        return new_u, ContextCounts.from_sequence(new_u, self.q, alphabet_size)


def build(u, q, alphabet_size):
    return ContextCounts.from_sequence(u, q, alphabet_size)


def delta_entropy(counts: ContextCounts, u, pos, new_sym):
    return counts.delta(u, pos, new_sym)


def commit_symbol(counts: ContextCounts, u, pos, new_sym):
    return counts.commit(u, pos, new_sym)


def remap_alphabet(counts: ContextCounts, u, relabel, alphabet_size=None):
    return counts.remap(u, relabel, alphabet_size)
