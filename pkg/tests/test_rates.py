import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decaycorr import correlation as corr
from decaycorr import observables as ob
from decaycorr import rates
from decaycorr import systems as sysm
from decaycorr.errors import InsufficientDataError, UnsupportedCaseError, UsageError
from decaycorr.rates import ExpLogPower, Exponential, LogPolynomial, Polynomial, StretchedExp
from decaycorr.tower import ExpTail, PolyTail, StretchedTail

# --- symbolic prediction table ----------------------------------------------


@given(st.floats(0.05, 1.0), st.floats(0.05, 0.95))
def test_henon_hoelder_case(alpha, theta):
    _, _, dom = rates.predict_bound(ob.Hoelder(alpha), *rates.henon_inputs(theta))
    assert isinstance(dom, Exponential)
    assert dom.rate == pytest.approx(alpha * abs(math.log(theta)))


@given(st.floats(0.05, 3.0), st.floats(0.05, 0.95))
def test_henon_logpoly_case(alpha, theta):
    _, _, dom = rates.predict_bound(ob.LogPoly(alpha), *rates.henon_inputs(theta))
    assert isinstance(dom, Polynomial)
    assert dom.p == pytest.approx(alpha)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_henon_explogpower_case(alpha, theta):
    _, _, dom = rates.predict_bound(ob.ExpLogPower(alpha), *rates.henon_inputs(theta))
    assert isinstance(dom, StretchedExp)
    assert dom.eta == pytest.approx(alpha)


@given(st.floats(0.05, 1.0), st.floats(0.05, 0.95))
def test_solenoid_hoelder_case(alpha, gamma):
    _, _, dom = rates.predict_bound(ob.Hoelder(alpha), *rates.solenoid_inputs(gamma))
    assert isinstance(dom, Polynomial)
    assert dom.p == pytest.approx(min(alpha / gamma, 1 / gamma - 1))


@given(st.floats(0.05, 3.0), st.floats(0.05, 0.95))
def test_solenoid_logpoly_case(alpha, gamma):
    _, _, dom = rates.predict_bound(ob.LogPoly(alpha), *rates.solenoid_inputs(gamma))
    assert isinstance(dom, LogPolynomial)
    assert dom.alpha == pytest.approx(alpha)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_solenoid_explogpower_case(alpha, gamma):
    _, _, dom = rates.predict_bound(ob.ExpLogPower(alpha), *rates.solenoid_inputs(gamma))
    assert isinstance(dom, ExpLogPower)
    assert dom.alpha == pytest.approx(alpha)


def test_compositions_are_exact_pointwise():
    # R(delta_n) evaluated directly against the composed law
    n = np.arange(2, 200, dtype=float)
    cases = [
        (ob.Hoelder(0.3), Exponential(0.7, 2.0)),
        (ob.Hoelder(0.5), StretchedExp(0.8, 0.5)),
        (ob.Lipschitz(3.0), Polynomial(2.0, 0.5)),
        (ob.ExpLogPower(0.5), Exponential(0.6)),
        (ob.ExpLogPower(0.4), StretchedExp(0.8, 0.5)),
        (ob.ExpLogPower(0.5), Polynomial(2.0)),
        (ob.LogPoly(1.5), Exponential(0.6)),
        (ob.LogPoly(1.5), StretchedExp(0.8, 0.5)),
        (ob.LogPoly(1.5), Polynomial(2.0)),
    ]
    for modulus, delta in cases:
        direct = ob.modulus_bound(modulus, rates.evaluate(delta, n))
        composed = rates.evaluate(rates.compose_modulus(modulus, delta), n)
        np.testing.assert_allclose(composed, direct, rtol=1e-10)


def test_unsupported_diameter_laws():
    for delta in (LogPolynomial(1.0), ExpLogPower(0.5)):
        with pytest.raises(UnsupportedCaseError):
            rates.compose_modulus(ob.Hoelder(0.5), delta)
    with pytest.raises(UnsupportedCaseError):
        rates.solenoid_inputs(1.5)


def test_tail_terms():
    assert rates.tail_term(ExpTail(0.4)) == Exponential(0.4)
    assert rates.tail_term(StretchedTail(2.0, 0.3)) == StretchedExp(2.0, 0.3)
    assert rates.tail_term(PolyTail(3.0)) == Polynomial(2.0)


MODELS = [Exponential(0.9, 2.0), StretchedExp(1.0, 0.5, 3.0), Polynomial(1.5, 5.0), LogPolynomial(2.0, 4.0),
          ExpLogPower(0.5, 1.0, 2.0), Polynomial(3.0, 0.1), Exponential(0.5, 10.0)]


@given(st.sampled_from(MODELS), st.sampled_from(MODELS))
def test_dominance_ratio_vanishes(a, b):
    dom = rates.slower(a, b)
    other = b if dom == a else a
    if type(other) is type(dom) and rates._shape(other) == rates._shape(dom):
        return
    # log-class pairs separate only at astronomically large n, so compare in log space
    n = np.geomspace(1e6, 1e300, 12)
    log_ratio = other.log_value(n) - dom.log_value(n)
    assert log_ratio[-1] < math.log(1e-2)
    assert log_ratio[-1] <= log_ratio[0]


def test_slower_merges_equal_shapes():
    assert rates.slower(Polynomial(2.0, 1.0), Polynomial(2.0, 3.0)) == Polynomial(2.0, 4.0)


def test_model_dict_round_trip():
    for m in MODELS:
        assert rates.model_from_dict(rates.model_to_dict(m)) == m
    with pytest.raises(UsageError):
        rates.model_from_dict({"model": "Bogus"})


def test_model_parameter_ranges():
    for bad in (lambda: Exponential(1.0), lambda: StretchedExp(1.0, 1.0), lambda: Polynomial(0.0),
                lambda: LogPolynomial(-1.0), lambda: ExpLogPower(1.0), lambda: Exponential(0.5, 0.0)):
        with pytest.raises(UsageError):
            bad()


# --- bound sequences and checks ---------------------------------------------

def test_bound_sequence_examples():
    n = np.arange(10)
    b = rates.bound_sequence(2.0, ob.Hoelder(1.0), 2.0 ** -n, np.zeros(10))
    np.testing.assert_allclose(b, 2 * 2.0 ** -n)
    u = 0.5 ** n
    b = rates.bound_sequence(3.0, ob.LogPoly(1.0), np.full(10, 0.1), u)
    np.testing.assert_allclose(b, 3.0 / abs(math.log(0.1)) + u)


def test_bound_sequence_log_modulus_nan_at_large_delta():
    b = rates.bound_sequence(1.0, ob.LogPoly(1.0), [0.5, 1.0, 2.0], [0.0, 0.0, 0.0])
    assert np.isfinite(b[0]) and np.isnan(b[1:]).all()


def test_bound_sequence_henon_logpoly_is_polynomial_dominated():
    n = np.arange(1, 1000, dtype=float)
    theta = 0.6
    b = rates.bound_sequence(1.0, ob.LogPoly(1.5), theta ** n, 0.5 ** n)
    tail = slice(300, None)
    slope = np.polyfit(np.log(n[tail]), np.log(b[tail]), 1)[0]
    assert slope == pytest.approx(-1.5, abs=1e-3)


def make_series(values, se):
    return rates.series_from_values(np.arange(len(values)), values, se)


def test_check_bound_examples():
    n = np.arange(20)
    zero = make_series(np.zeros(20), np.zeros(20))
    assert rates.check_bound(zero, np.full(20, 1e-9)).passed
    oracle = make_series(2.0 ** -n / 12, np.zeros(20))
    rep = rates.check_bound(oracle, 2.0 ** -n, 1.0)
    assert rep.passed
    assert rep.max_ratio == pytest.approx(1 / 12)
    bad = rates.check_bound(oracle, 2.0 ** -n / 24)
    assert not bad.passed and bad.n_violations == 20
    assert "fail" in bad.to_text()


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=20), st.floats(1, 5), st.floats(0, 5))
def test_check_bound_monotone_in_slack(values, s, extra):
    v = np.array(values)
    series = make_series(v, np.full(len(v), 0.01))
    bound = np.full(len(v), 0.3)
    if rates.check_bound(series, bound, s).passed:
        assert rates.check_bound(series, bound, s + extra).passed


# --- fitting -----------------------------------------------------------------

def test_fit_noiseless_exponential():
    n = np.arange(0, 40)
    fit = rates.fit_rate(make_series(0.5 * 0.8 ** n, None), (0, 39))
    assert isinstance(fit.model, Exponential)
    assert fit.model.theta == pytest.approx(0.8, rel=1e-9)
    assert fit.model.C == pytest.approx(0.5, rel=1e-9)
    assert fit.residual < 1e-20


def test_fit_noiseless_polynomial():
    n = np.arange(0, 101)
    y = np.where(n > 0, np.maximum(n, 1.0) ** -2.0, 1.0)
    fit = rates.fit_rate(make_series(y, None), (5, 100))
    assert isinstance(fit.model, Polynomial)
    assert fit.model.p == pytest.approx(2.0, rel=1e-9)


@pytest.mark.parametrize("model", [Exponential(0.9, 2.0), StretchedExp(0.7, 0.4, 3.0), Polynomial(1.5, 5.0),
                                   LogPolynomial(2.0, 4.0), ExpLogPower(0.5, 1.3, 2.0)])
def test_fit_recovers_each_family(model):
    n = np.arange(0, 301)
    y = np.where(n >= 2, rates.evaluate(model, np.maximum(n, 2)), 1.0)
    fit = rates.fit_rate(make_series(y, None), (5, 300))
    assert type(fit.model) is type(model)
    for key, val in rates.model_to_dict(model).items():
        if key != "model":
            assert rates.model_to_dict(fit.model)[key] == pytest.approx(val, rel=1e-6)


def test_fit_censors_noise_and_requires_points():
    n = np.arange(0, 20)
    y = 0.5 ** n
    se = np.full(20, 1e-3)  # values below 3e-3 are censored from n = 9 on
    fit = rates.fit_rate(make_series(y, se), (0, 19))
    assert fit.n_censored == 11 and fit.n_used == 9
    with pytest.raises(InsufficientDataError):
        rates.fit_rate(make_series(y, se), (6, 19))


def test_fit_reports_ties():
    # two identical candidates cannot be separated: the loser is listed
    n = np.arange(0, 60)
    y = 0.9 ** n
    fit = rates.fit_rate(make_series(y * (1 + 0.01 * np.sin(n)), None), (1, 59),
                         ["Exponential", "StretchedExp"])
    assert fit.name == "Exponential"
    text = fit.to_text()
    assert "selected: Exponential" in text
    assert fit.to_csv().splitlines()[0] == "candidate,selected,relative_residual,transformed_mse,parameters"


def test_fit_rejects_unknown_candidates():
    with pytest.raises(UsageError):
        rates.fit_rate(make_series(0.5 ** np.arange(10), None), (0, 9), ["Gaussian"])


def test_fit_doubling_series():
    ens = corr.sample_srb(sysm.Doubling(), 1_000_000, rng_seed=21)
    saw = ob.sawtooth(sysm.Doubling())
    s = corr.estimate_correlation(sysm.Doubling(), saw, saw, ens, 12)
    fit = rates.fit_rate(s, (0, 12), ["Exponential", "Polynomial", "StretchedExp"])
    assert isinstance(fit.model, Exponential)
    assert 0.45 <= fit.model.theta <= 0.55


@settings(max_examples=25)
@given(st.floats(0.3, 0.95), st.floats(0.1, 10))
def test_exponential_regression_exact(theta, C):
    n = np.arange(0, 30)
    fit = rates.fit_rate(make_series(C * theta ** n, None), (0, 29), ["Exponential"])
    assert fit.model.theta == pytest.approx(theta, rel=1e-6)
    assert fit.model.C == pytest.approx(C, rel=1e-6)
