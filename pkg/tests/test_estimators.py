import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ucs import BMCMCRegressor, LeastSquaresBaseline, LMCMCRegressor, SLARegressor
from ucs.sources import SourceSpec, generate_signal, measure


@pytest.fixture(scope="module")
def problem():
    rng = np.random.default_rng(0)
    x = generate_signal(SourceSpec.bernoulli(0.05), 200, rng)
    ms = measure(x, 120, 10.0, rng)
    return x, ms


def _msdr(x, est):
    return 10 * np.log10(np.mean(x**2) / max(np.mean((est - x) ** 2), 1e-300))


def test_params_round_trip():
    est = SLARegressor(noise_var=0.1, r1=20, q=1)
    params = est.get_params()
    assert params["r1"] == 20 and params["q"] == 1 and params["level_bits"] == 8.0
    assert clone(est).get_params() == params
    est.set_params(c=2.0)
    assert est.c == 2.0


@pytest.mark.parametrize("make", [
    lambda nv: SLARegressor(noise_var=nv, random_state=0, r1=20, max_total=80),
    lambda nv: LMCMCRegressor(noise_var=nv, n_iter=30, random_state=0),
    lambda nv: BMCMCRegressor(noise_var=nv, levels=[0.0, 1.0], n_iter=30, random_state=0),
])
def test_samplers_beat_least_squares(problem, make):
    x, ms = problem
    est = make(ms.sigma_z_sq).fit(ms.phi, ms.y)
    ls = LeastSquaresBaseline().fit(ms.phi, ms.y)
    assert est.coef_.shape == x.shape
    assert _msdr(x, est.coef_) > _msdr(x, ls.coef_) + 5.0
    assert est.predict(ms.phi).shape == ms.y.shape


def test_seed_mixing_and_reproducibility(problem):
    _, ms = problem
    a = LMCMCRegressor(noise_var=ms.sigma_z_sq, n_iter=10, n_seeds=3, random_state=4).fit(ms.phi, ms.y)
    b = LMCMCRegressor(noise_var=ms.sigma_z_sq, n_iter=10, n_seeds=3, random_state=4).fit(ms.phi, ms.y)
    assert len(a.estimates_) == 3
    np.testing.assert_array_equal(a.coef_, np.mean(a.estimates_, axis=0))
    np.testing.assert_array_equal(a.coef_, b.coef_)


def test_validation(problem):
    _, ms = problem
    with pytest.raises(ValueError):
        SLARegressor().fit(ms.phi, ms.y)
    with pytest.raises(ValueError):
        LMCMCRegressor(noise_var=-1.0).fit(ms.phi, ms.y)
    with pytest.raises(ValueError):
        LeastSquaresBaseline().fit(ms.phi, ms.y[:-1])
    with pytest.raises(NotFittedError):
        LeastSquaresBaseline().predict(ms.phi)
    fitted = LeastSquaresBaseline().fit(ms.phi, ms.y)
    with pytest.raises(ValueError):
        fitted.predict(ms.phi[:, :-1])


def test_least_squares_score_is_perfect_when_underdetermined(problem):
    _, ms = problem
    assert LeastSquaresBaseline().fit(ms.phi, ms.y).score(ms.phi, ms.y) == pytest.approx(1.0)
