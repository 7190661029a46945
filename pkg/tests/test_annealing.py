import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucs.annealing import (
    AnnealingSchedule,
    boltzmann_weights,
    estimate_delta_q,
    sample_categorical,
    schedule_s,
)
from ucs.samplers import energy, energy_constant

energies = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8)


def test_equal_energies_are_uniform():
    np.testing.assert_allclose(boltzmann_weights([3.0, 3.0], 2.0), [0.5, 0.5])


def test_zero_inverse_temperature_is_uniform():
    np.testing.assert_allclose(boltzmann_weights([1.0, 5.0, -2.0], 0.0), [1 / 3] * 3)


def test_infinite_inverse_temperature_picks_first_argmin():
    np.testing.assert_array_equal(boltzmann_weights([2.0, 1.0, 1.0], math.inf), [0, 1, 0])


def test_infinite_energy_gets_no_weight():
    w = boltzmann_weights([math.inf, 0.0], 1.0)
    np.testing.assert_array_equal(w, [0.0, 1.0])
    with pytest.raises(ValueError):
        boltzmann_weights([math.inf, math.inf], 1.0)
    with pytest.raises(ValueError):
        boltzmann_weights([0.0], -1.0)


@settings(max_examples=100, deadline=None)
@given(energies, st.floats(0, 5), st.floats(-1e3, 1e3))
def test_shift_invariance(e, s, shift):
    a = boltzmann_weights(e, s)
    b = boltzmann_weights(np.array(e) + shift, s)
    assert abs(a.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(0.01, 2))
def test_squared_ratio_at_double_s(e, s):
    w1 = boltzmann_weights(e, s)
    w2 = boltzmann_weights(e, 2 * s)
    r1 = w1[0] / w1[1]
    r2 = w2[0] / w2[1]
    assert r2 == pytest.approx(r1 * r1, rel=1e-10)


def test_schedule_values():
    sched = AnnealingSchedule(c=1.5, n=10, delta_q_hat=2.0)
    assert schedule_s(1, sched) == 0.0
    assert sched.s(5) == pytest.approx(math.log(5) / 30.0)
    shifted = sched.shifted(3)
    assert shifted.s(1) == pytest.approx(sched.s(4))
    with pytest.raises(ValueError):
        schedule_s(0, sched)


def test_schedule_monotone_and_log_ratio():
    sched = AnnealingSchedule(c=1.5, n=100, delta_q_hat=0.3)
    s = [sched.s(t) for t in range(1, 5000)]
    assert all(b >= a for a, b in zip(s, s[1:]))
    assert sched.s(10**6) / sched.s(10**3) == pytest.approx(2.0, rel=1e-12)


def test_overestimate_equals_larger_c():
    a = AnnealingSchedule(c=1.5, n=50, delta_q_hat=4.0 * 0.7)
    b = AnnealingSchedule(c=4.0 * 1.5, n=50, delta_q_hat=0.7)
    for t in (1, 2, 10, 1000):
        assert a.s(t) == pytest.approx(b.s(t), rel=1e-14)


def test_schedule_validation():
    with pytest.raises(ValueError):
        AnnealingSchedule(c=0.0, n=5, delta_q_hat=1.0)
    with pytest.raises(ValueError):
        AnnealingSchedule(c=1.5, n=5, delta_q_hat=0.0)


def test_sample_categorical_inverse_cdf():
    p = np.array([0.2, 0.0, 0.5, 0.3])
    assert sample_categorical(p, 0.0) == 0
    assert sample_categorical(p, 0.19) == 0
    assert sample_categorical(p, 0.2) == 2
    assert sample_categorical(p, 0.75) == 3
    assert sample_categorical(p, 0.9999999) == 3


def test_delta_q_entropy_only_for_zero_span():
    phi = np.random.default_rng(0).standard_normal((4, 6))
    d = estimate_delta_q(phi, np.array([0.0, 0.0]), 1.0, 1, y=np.zeros(4))
    assert d > 0 and math.isfinite(d)
    assert estimate_delta_q(phi, np.array([0.0, 0.0]), 50.0, 1) == d


def test_delta_q_quadratic_term_grows_with_span():
    phi = np.random.default_rng(1).standard_normal((4, 6))
    base = estimate_delta_q(phi, np.array([0.0, 0.0]), 1.0, 1)
    one = estimate_delta_q(phi, np.array([0.0, 1.0]), 1.0, 1) - base
    two = estimate_delta_q(phi, np.array([0.0, 2.0]), 1.0, 1) - base
    assert two >= 2 * one


def test_delta_q_bounds_exhaustive_change():
    rng = np.random.default_rng(2)
    n, m, q = 4, 4, 1
    for _ in range(5):
        phi = rng.standard_normal((m, n)) / 2
        y = rng.standard_normal(m)
        levels = np.array([0.0, 1.0])
        nv = 0.5
        c4 = energy_constant(nv)
        exact = 0.0
        for w in itertools.product(range(2), repeat=n):
            w = np.array(w)
            e0 = energy(phi, y, levels, w, q, nv)
            for pos in range(n):
                w2 = w.copy()
                w2[pos] = 1 - w2[pos]
                exact = max(exact, abs(energy(phi, y, levels, w2, q, nv) - e0))
        assert estimate_delta_q(phi, levels, c4, q, y) >= exact


def test_delta_q_rejects_unbounded_span():
    with pytest.raises(ValueError):
        estimate_delta_q(np.eye(2), np.array([0.0, math.inf]), 1.0, 0)
