"""Test-signal sources and the Gaussian measurement operator.

All randomness is drawn from an explicit :class:`numpy.random.Generator`.
Normal variates come from numpy's ziggurat sampler over PCG64, which is
stable for a given seed across platforms and numpy releases.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class SourceKind(str, enum.Enum):
    BERNOULLI = "bernoulli"
    SPARSE_LAPLACE = "sparse_laplace"
    MARKOV_UNIFORM = "markov_uniform"
    MARKOV_RADEMACHER = "markov_rademacher"
    MARKOV_FOUR_STATE = "markov_four_state"


@dataclass(frozen=True)
class SourceSpec:
    """A stationary ergodic test source.

    ``p`` is the activity probability of the i.i.d. kinds, ``p01``/``p10``
    the zero->nonzero / nonzero->zero switching probabilities of the
    two-state Markov kinds, and ``error`` the mistimed-switch probability of
    the four-state source.
    """

    kind: SourceKind
    p: float = 0.03
    p01: float = 3 / 970
    p10: float = 0.10
    error: float = 0.03

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        for name in ("p", "p01", "p10", "error"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ValueError(f"{name}={v!r} is not a probability")
        if self.kind in (SourceKind.MARKOV_UNIFORM, SourceKind.MARKOV_RADEMACHER):
            if self.p01 + self.p10 == 0.0:
                raise ValueError("p01 and p10 cannot both be zero")

    @classmethod
    def bernoulli(cls, p=0.03):
        return cls(SourceKind.BERNOULLI, p=p)

    @classmethod
    def sparse_laplace(cls, p=0.03):
        return cls(SourceKind.SPARSE_LAPLACE, p=p)

    @classmethod
    def markov_uniform(cls, p01=3 / 970, p10=0.10):
        return cls(SourceKind.MARKOV_UNIFORM, p01=p01, p10=p10)

    @classmethod
    def markov_rademacher(cls, p01=3 / 70, p10=0.10):
        return cls(SourceKind.MARKOV_RADEMACHER, p01=p01, p10=p10)

    @classmethod
    def markov_four_state(cls, error=0.03):
        return cls(SourceKind.MARKOV_FOUR_STATE, error=error)

    @property
    def activity(self):
        """Stationary fraction of non-zero entries."""
        if self.kind in (SourceKind.BERNOULLI, SourceKind.SPARSE_LAPLACE):
            return self.p
        if self.kind is SourceKind.MARKOV_FOUR_STATE:
            return 1.0
        return self.p01 / (self.p01 + self.p10)

    def moments(self):
        """Analytic (mean, second moment) of one stationary entry."""
        a = self.activity
        if self.kind is SourceKind.BERNOULLI:
            return a, a
        if self.kind is SourceKind.SPARSE_LAPLACE:
            return 0.0, a
        if self.kind is SourceKind.MARKOV_UNIFORM:
            return a / 2.0, a / 3.0
        if self.kind is SourceKind.MARKOV_RADEMACHER:
            return 0.0, a
        return 0.0, 1.0


def _two_state_walk(n, p01, p10, rng):
    """Boolean on/off path of a stationary two-state chain."""
    on = np.empty(n, dtype=bool)
    draws = rng.random(n)
    state = draws[0] < p01 / (p01 + p10)
    on[0] = state
    for i in range(1, n):
        if state:
            state = draws[i] >= p10
        else:
            state = draws[i] < p01
        on[i] = state
    return on


# Four-state cycle +1,+1,-1,-1.  From the first state of a block a premature
# switch jumps to the other block; from the second state a late switch
# repeats it.
_FOUR_STATE_VALUES = np.array([1.0, 1.0, -1.0, -1.0])


def _four_state_walk(n, error, rng):
    draws = rng.random(n + 1)
    # the chain is doubly stochastic, so the uniform start is stationary
    state = int(draws[0] * 4) % 4
    out = np.empty(n)
    for i in range(n):
        out[i] = _FOUR_STATE_VALUES[state]
        slip = draws[i + 1] < error
        if state % 2 == 0:
            state = (state + 2) % 4 if slip else state + 1
        else:
            state = state if slip else (state + 1) % 4
    return out


def generate_signal(spec: SourceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a length-``n`` realization of ``spec``."""
    if n < 1:
        raise ValueError("n must be positive")
    kind = spec.kind
    if kind is SourceKind.BERNOULLI:
        return (rng.random(n) < spec.p).astype(float)
    if kind is SourceKind.SPARSE_LAPLACE:
        support = rng.random(n) < spec.p
        # unit-variance Laplacian has scale 1/sqrt(2)
        return np.where(support, rng.laplace(0.0, 1.0 / math.sqrt(2.0), n), 0.0)
    if kind is SourceKind.MARKOV_UNIFORM:
        on = _two_state_walk(n, spec.p01, spec.p10, rng)
        return np.where(on, rng.random(n), 0.0)
    if kind is SourceKind.MARKOV_RADEMACHER:
        on = _two_state_walk(n, spec.p01, spec.p10, rng)
        signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return np.where(on, signs, 0.0)
    if kind is SourceKind.MARKOV_FOUR_STATE:
        return _four_state_walk(n, spec.error, rng)
    raise ValueError(f"unknown source kind {kind!r}")


@dataclass
class MeasurementSystem:
    """``y = phi @ x + z`` with i.i.d. N(0, ``sigma_z_sq``) noise."""

    phi: np.ndarray
    y: np.ndarray
    sigma_z_sq: float
    z: np.ndarray = field(default=None, repr=False)

    @property
    def c2(self):
        return math.inf if self.sigma_z_sq == 0 else 1.0 / (2.0 * self.sigma_z_sq)

    @property
    def c4(self):
        return self.c2 * math.log2(math.e)

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def n(self):
        return self.phi.shape[1]


def noise_variance(x, m, snr_db):
    """Noise variance giving ``snr_db`` for ``m`` measurements of ``x``.

    Uses the realized mean of ``x**2`` so every trial hits its SNR exactly.
    """
    x = np.asarray(x, dtype=float)
    energy = float(np.mean(x * x))
    if energy == 0.0:
        raise ValueError("all-zero signal has no defined SNR")
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return x.size * energy / (m * 10.0 ** (snr_db / 10.0))


def gaussian_matrix(m, n, rng):
    """M x N matrix with i.i.d. N(0, 1/M) entries (unit-norm columns on average)."""
    return rng.standard_normal((m, n)) / math.sqrt(m)


def measure(x, m, snr_db, rng, *, phi=None, noiseless=False) -> MeasurementSystem:
    """Measure ``x`` with a fresh Gaussian operator at the requested SNR.

    ``phi`` replaces the random operator (identity or fixed fixtures in
    tests) and ``noiseless`` forces ``z = 0``; both are test hooks.  The
    operator is drawn before the noise, so a given seed always produces the
    same pair.
    """
    x = np.asarray(x, dtype=float)
    if m < 1:
        raise ValueError("m must be positive")
    sigma_sq = noise_variance(x, m, snr_db)
    if phi is None:
        phi = gaussian_matrix(m, x.size, rng)
    else:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (m, x.size):
            raise ValueError(f"phi has shape {phi.shape}, expected {(m, x.size)}")
    if noiseless:
        sigma_sq = 0.0
        z = np.zeros(m)
    else:
        z = math.sqrt(sigma_sq) * rng.standard_normal(m)
    return MeasurementSystem(phi=phi, y=phi @ x + z, sigma_z_sq=sigma_sq, z=z)
