import math

import numpy as np
import pytest

from ucs.sources import (
    SourceKind,
    SourceSpec,
    generate_signal,
    measure,
    noise_variance,
)

ALL_KINDS = [
    SourceSpec.bernoulli(),
    SourceSpec.sparse_laplace(),
    SourceSpec.markov_uniform(),
    SourceSpec.markov_rademacher(),
    SourceSpec.markov_four_state(),
]


def test_bernoulli_zero_probability_is_all_zero():
    x = generate_signal(SourceSpec.bernoulli(0.0), 50, np.random.default_rng(0))
    assert x.shape == (50,) and not x.any()


def test_bernoulli_activity():
    x = generate_signal(SourceSpec.bernoulli(), 10**5, np.random.default_rng(1))
    assert abs(np.mean(x != 0) - 0.03) <= 0.005
    assert set(np.unique(x)) <= {0.0, 1.0}


def test_markov_uniform_stationary_activity():
    spec = SourceSpec.markov_uniform(3 / 970, 0.10)
    assert spec.activity == pytest.approx((3 / 970) / (3 / 970 + 0.10))
    x = generate_signal(spec, 10**5, np.random.default_rng(2))
    assert abs(np.mean(x != 0) - 0.03) <= 0.005


def test_four_state_values_and_cycle():
    x = generate_signal(SourceSpec.markov_four_state(0.0), 400, np.random.default_rng(3))
    assert set(np.unique(x)) == {-1.0, 1.0}
    # error-free walk is the +1 +1 -1 -1 cycle from some phase
    runs = np.diff(np.flatnonzero(np.diff(x) != 0))
    assert np.all(runs == 2)


@pytest.mark.parametrize("spec", ALL_KINDS, ids=lambda s: s.kind.value)
def test_moments_match_analytic(spec):
    n = 10**6
    x = generate_signal(spec, n, np.random.default_rng(4))
    mean, second = spec.moments()
    # Markov paths are correlated; inflate the i.i.d. standard error generously
    inflate = 1.0 if spec.kind in (SourceKind.BERNOULLI, SourceKind.SPARSE_LAPLACE) else 12.0
    se1 = inflate * np.std(x) / math.sqrt(n)
    se2 = inflate * np.std(x * x) / math.sqrt(n)
    assert abs(x.mean() - mean) <= 3 * se1 + 1e-12
    assert abs(np.mean(x * x) - second) <= 3 * se2 + 1e-12


@pytest.mark.parametrize("bad", [dict(p=-0.1), dict(p=1.5), dict(error=2.0), dict(p01=float("nan"))])
def test_invalid_probabilities_rejected(bad):
    with pytest.raises(ValueError):
        SourceSpec(SourceKind.BERNOULLI, **bad)


def test_two_state_needs_a_transition():
    with pytest.raises(ValueError):
        SourceSpec.markov_uniform(0.0, 0.0)


def test_noise_variance_hand_value():
    x = np.zeros(10000)
    x[:300] = 1.0  # empirical E[x^2] = 0.03
    assert noise_variance(x, 5000, 10.0) == pytest.approx(0.006, rel=1e-12)


def test_measure_snr_and_column_norms():
    rng = np.random.default_rng(5)
    x = generate_signal(SourceSpec.bernoulli(), 1000, rng)
    ms = measure(x, 400, 10.0, rng)
    assert ms.phi.shape == (400, 1000)
    norms = np.sum(ms.phi**2, axis=0)
    assert abs(norms.mean() - 1.0) <= 0.05
    snr = 10 * math.log10(1000 * np.mean(x**2) / (400 * ms.sigma_z_sq))
    assert snr == pytest.approx(10.0, abs=1e-9)
    assert ms.c4 == ms.c2 * math.log2(math.e)
    np.testing.assert_array_equal(ms.y, ms.phi @ x + ms.z)


def test_measure_noiseless_and_identity_hooks():
    rng = np.random.default_rng(6)
    x = np.array([0.0, 1.0, 0.0, 1.0])
    ms = measure(x, 4, 10.0, rng, phi=np.eye(4), noiseless=True)
    np.testing.assert_array_equal(ms.y, x)
    ms = measure(x, 4, 10.0, rng, phi=np.eye(4))
    np.testing.assert_allclose(ms.y, x + ms.z)


def test_measure_reproducible():
    x = generate_signal(SourceSpec.bernoulli(), 200, np.random.default_rng(7))
    a = measure(x, 100, 5.0, np.random.default_rng(8))
    b = measure(x, 100, 5.0, np.random.default_rng(8))
    assert a.phi.tobytes() == b.phi.tobytes()
    assert a.y.tobytes() == b.y.tobytes()


def test_measure_rejects_zero_signal():
    with pytest.raises(ValueError):
        measure(np.zeros(10), 5, 10.0, np.random.default_rng(0))
