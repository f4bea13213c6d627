import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from decaycorr import correlation as corr
from decaycorr import observables as ob
from decaycorr import systems as sysm
from decaycorr.errors import ConstructionError, UsageError
from decaycorr.tower import ExpTail, PolyTail, StretchedTail, synth_tower

from .conftest import induced

DOUBLING = sysm.Doubling()
CIRCLE = sysm.IntermittentCircle(0.5, 2)
HENON = sysm.Henon(1.4, 0.3)


def quadrature_doubling_autocov(n):
    # oracle: Gauss-Legendre on each branch of f^n, exact for the quadratic integrand
    g, w = np.polynomial.legendre.leggauss(4)
    total = 0.0
    m = 2 ** n
    for j in range(m):
        a, b = j / m, (j + 1) / m
        x = 0.5 * (b - a) * g + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.sum(w * ((m * x - j) - 0.5) * (x - 0.5))
    return total


def level_chain_return_probs(tower, n_max):
    # oracle: push a point mass at level 0 through the level Markov chain of the tower
    t = tower.tail(include_remainder=False)
    L = tower.max_return
    surv = t[:L]
    with np.errstate(invalid="ignore", divide="ignore"):
        ret = np.append(surv[:-1] - surv[1:], surv[-1]) / surv
    ret = np.where(surv > 0, ret, 1.0)  # unreachable levels after underflow
    v = np.zeros(L)
    v[0] = 1.0
    out = [1.0]
    for _ in range(n_max):
        nv = np.zeros(L)
        nv[1:] = (v * (1 - ret))[:-1]
        nv[0] = np.sum(v * ret)
        v = nv
        out.append(v[0])
    return np.array(out)


@pytest.fixture(scope="module")
def doubling_ensemble():
    return corr.sample_srb(DOUBLING, 1_000_000, rng_seed=11)


# --- oracles -----------------------------------------------------------------

def test_oracle_doubling_examples():
    assert corr.oracle_doubling_autocov(0) == pytest.approx(1 / 12)
    for n in (1, 2, 10):
        assert corr.oracle_doubling_autocov(n) == pytest.approx(quadrature_doubling_autocov(n), abs=1e-12)
    assert corr.oracle_doubling_autocov(1) == pytest.approx(1 / 24)
    assert corr.oracle_doubling_autocov(2) == pytest.approx(1 / 48)
    with pytest.raises(UsageError):
        corr.oracle_doubling_autocov(-1)


@pytest.mark.parametrize("law", [ExpTail(0.5), PolyTail(3.0), StretchedTail(1.0, 0.5)])
def test_renewal_oracle_matches_level_chain(law):
    tower = synth_tower(law, cutoff=3000)
    p0 = 1 / tower.kac_mass
    expected = p0 * level_chain_return_probs(tower, 40) - p0 ** 2
    np.testing.assert_allclose(corr.renewal_autocov(tower, 40), expected, atol=1e-13)


def test_renewal_geometric_is_memoryless():
    c = corr.renewal_autocov(synth_tower(ExpTail(0.5), cutoff=80), 10)
    assert c[0] == pytest.approx(0.25)
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-15)


# --- sampling ----------------------------------------------------------------

def test_doubling_ensemble_is_uniform():
    ens = corr.sample_srb(DOUBLING, 100_000, rng_seed=0)
    assert stats.kstest(ens.points, "uniform").pvalue > 0.01
    assert ens.meta["escape_count"] == 0
    assert set(ens.meta) >= {"burn_in", "spacing", "seed", "escape_count"}


def test_henon_ensemble_in_trapping_box():
    ens = corr.sample_srb(HENON, 20_000, burn_in=500, rng_seed=1)
    box = sysm.trapping_region(HENON)
    assert len(ens) == 20_000
    assert np.all(box.contains(ens.points))
    assert ens.meta["escape_count"] <= ens.meta["seeds"]


def test_henon_escape_is_construction_error():
    with pytest.raises(ConstructionError) as err:
        corr.sample_srb(sysm.Henon(2.5, 0.3), 1000, burn_in=100, rng_seed=0)
    assert err.value.info["escape_rate"] > 0.5


def lag1_autocorr(ens):
    x = ens.points - 0.5
    same = ens.chain[1:] == ens.chain[:-1]
    a, b = x[1:][same], x[:-1][same]
    return float(np.corrcoef(a, b)[0, 1])


def test_spacing_lowers_autocorrelation():
    e1 = corr.sample_srb(DOUBLING, 100_000, spacing=1, rng_seed=2, chains=100)
    e50 = corr.sample_srb(DOUBLING, 100_000, spacing=50, rng_seed=2, chains=100)
    # thin the spacing-1 sample so the two-sample test sees nearly independent draws
    assert stats.ks_2samp(e1.points[::10], e50.points).pvalue > 0.01
    assert lag1_autocorr(e1) == pytest.approx(0.5, abs=0.02)
    assert abs(lag1_autocorr(e50)) < abs(lag1_autocorr(e1))
    assert abs(lag1_autocorr(e50)) < 0.02


def test_sample_srb_rejects_bad_arguments():
    with pytest.raises(UsageError):
        corr.sample_srb(DOUBLING, 10, burn_in=0)
    with pytest.raises(UsageError):
        corr.sample_srb(DOUBLING, 10, spacing=0)


# --- ensemble estimator ------------------------------------------------------

def test_doubling_oracle_within_three_se(doubling_ensemble):
    saw = ob.sawtooth(DOUBLING)
    s = corr.estimate_correlation(DOUBLING, saw, saw, doubling_ensemble, 8)
    exact = np.array([corr.oracle_doubling_autocov(n) for n in range(9)])
    assert np.all(np.abs(s.estimates - exact) <= 3 * s.std_errors)
    assert s.estimates[0] >= 0


def test_doubling_cosine_orthogonality(doubling_ensemble):
    c = ob.cosine(DOUBLING)
    s = corr.estimate_correlation(DOUBLING, c, c, doubling_ensemble, 6)
    assert s.estimates[0] == pytest.approx(0.5, abs=0.01)
    assert np.all(np.abs(s.estimates[1:]) <= 4 * s.std_errors[1:])


def test_constant_annihilation(doubling_ensemble):
    s = corr.estimate_correlation(DOUBLING, ob.sawtooth(DOUBLING), ob.constant(DOUBLING, 0.7),
                                  doubling_ensemble, 5)
    assert np.all(np.abs(s.estimates) < 1e-12)


@given(st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3))
@settings(max_examples=10)
def test_bilinear_scaling(a):
    ens = corr.sample_srb(CIRCLE, 4096, burn_in=200, rng_seed=3, chains=64)
    phi = ob.make_observable(CIRCLE, ob.Hoelder(0.5), 0.2)
    psi = ob.cosine(CIRCLE)
    base = corr.estimate_correlation(CIRCLE, phi, psi, ens, 5)
    scaled = corr.estimate_correlation(CIRCLE, a * phi, psi, ens, 5)
    np.testing.assert_allclose(scaled.estimates, a * base.estimates, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(scaled.magnitude, abs(a) * base.magnitude, rtol=1e-9, atol=1e-15)


def test_variance_at_lag_zero_nonnegative():
    ens = corr.sample_srb(CIRCLE, 8192, burn_in=200, rng_seed=4, chains=64)
    phi = ob.make_observable(CIRCLE, ob.LogPoly(1.0), 0.4)
    s = corr.estimate_correlation(CIRCLE, phi, phi, ens, 3)
    assert s.estimates[0] >= -1e-15
    assert np.all(s.std_errors >= 0)


def test_estimator_rejects_bad_input():
    ens = corr.sample_srb(DOUBLING, 100, rng_seed=0)
    saw = ob.sawtooth(DOUBLING)
    empty = corr.Ensemble(DOUBLING, np.zeros(0), np.zeros(0, dtype=int))
    with pytest.raises(UsageError):
        corr.estimate_correlation(DOUBLING, saw, saw, empty, 3)
    with pytest.raises(UsageError):
        corr.estimate_correlation(DOUBLING, ob.sawtooth(CIRCLE), saw, ens, 3)
    with pytest.raises(UsageError):
        corr.estimate_correlation(DOUBLING, saw, saw, ens, -1)


# --- time averages -----------------------------------------------------------

def test_time_average_agrees_with_ensemble(doubling_ensemble):
    saw = ob.sawtooth(DOUBLING)
    ta = corr.estimate_correlation_time_average(DOUBLING, saw, saw, 400_000, 6, rng_seed=5)
    en = corr.estimate_correlation(DOUBLING, saw, saw, doubling_ensemble, 6)
    gap = np.abs(ta.estimates - en.estimates)
    assert np.all(gap <= 4 * np.hypot(ta.std_errors, en.std_errors))
    assert ta.estimator_kind == "time_average"


def test_time_average_shift_consistency():
    orbits = corr.sample_orbits(CIRCLE, 8, 20_000, burn_in=500, rng_seed=6)
    phi = ob.make_observable(CIRCLE, ob.Hoelder(0.5), 0.7)
    psi = ob.cosine(CIRCLE)
    a = [np.asarray(phi(o)) for o in orbits]
    b = [np.asarray(psi(o)) for o in orbits]
    n_max, k = 12, 4
    full, _, _, _ = corr.lagged_covariance(a, b, n_max, 8)
    # phi o f^k along the same orbits
    a_k = [x[k:] for x in a]
    b_k = [y[: len(y) - k] for y in b]
    shifted, _, _, _ = corr.lagged_covariance(a_k, b_k, n_max - k, 8)
    N = sum(len(x) for x in a)
    np.testing.assert_allclose(shifted, full[k:], atol=20 * k / N * 8)


def test_lagged_covariance_block_batches():
    rng = np.random.default_rng(0)
    a = [rng.random(10_000)]
    est, se, batches, n0 = corr.lagged_covariance(a, a, 3, 16)
    assert batches.shape == (16, 4)
    assert n0 == 10_000
    assert est[0] == pytest.approx(1 / 12, rel=0.05)
    assert np.all(np.abs(est[1:]) <= 4 * se[1:])


# --- series io ---------------------------------------------------------------

def test_series_csv_round_trip(tmp_path):
    s = corr.CorrelationSeries(np.arange(4), [0.1, -0.02, 1e-17, 0.0], [0.01, 0.0, 1e-3, 2.0], "ensemble",
                               1000, 7)
    path = tmp_path / "c.csv"
    s.to_csv(path)
    back = corr.CorrelationSeries.from_csv(path)
    np.testing.assert_array_equal(back.estimates, s.estimates)
    np.testing.assert_array_equal(back.std_errors, s.std_errors)
    assert (back.estimator_kind, back.sample_size, back.seed) == ("ensemble", 1000, 7)
    assert path.read_text().splitlines()[0] == "n,estimate,std_error,estimator,N,seed"


def test_series_rejects_negative_errors():
    with pytest.raises(UsageError):
        corr.CorrelationSeries([0], [0.0], [-1.0], "ensemble", 1)


# --- towers ------------------------------------------------------------------

def test_tower_constant_gives_zero():
    tower = synth_tower(PolyTail(3.0), cutoff=10_000)
    s = corr.estimate_correlation_tower(tower, corr.level_indicator(0), corr.constant_tower_function(2.0),
                                        10, 50_000, rng_seed=0)
    assert np.all(np.abs(s.estimates) < 1e-12)


@pytest.mark.parametrize("law", [PolyTail(3.0), StretchedTail(1.0, 0.5)])
def test_tower_estimator_matches_renewal_oracle(law):
    tower = synth_tower(law, cutoff=20_000)
    s = corr.estimate_correlation_tower(tower, corr.level_indicator(0), corr.level_indicator(0), 20,
                                        2_000_000, rng_seed=1)
    exact = corr.renewal_autocov(tower, 20)
    assert np.all(np.abs(s.estimates - exact) <= 4 * s.std_errors)


def test_tower_estimator_exp_tail_decays():
    tower = synth_tower(ExpTail(0.5), cutoff=80)
    fn = corr.level_function([1.0, 0.0, 2.0, -1.0])
    s = corr.estimate_correlation_tower(tower, fn, fn, 20, 1_000_000, rng_seed=2)
    # beyond a few lags the covariance is lost in the noise
    assert np.all(np.abs(s.estimates[12:]) <= 4 * s.std_errors[12:] + 1e-4)
    assert abs(s.estimates[0]) > 10 * s.std_errors[0]


def test_induced_tower_paths_constant_zero():
    tower = induced()
    s = corr.estimate_correlation_tower(tower, corr.level_indicator(0), corr.constant_tower_function(1.0),
                                        5, 20_000, rng_seed=3)
    assert np.all(np.abs(s.estimates) < 1e-12)


# --- approximation experiment ------------------------------------------------

def test_approximation_constants_pass_trivially():
    tower = induced()
    c = ob.constant(tower.system, 1.5)
    rep = corr.verify_approximation(tower, c, c, [0, 2], 5, samples=20_000, rng_seed=0)
    assert rep.passed
    assert all(r.diff == 0.0 and r.bound == 0.0 for r in rep.rows)


def test_approximation_hoelder_pair():
    tower = induced()
    phi = ob.make_observable(tower.system, ob.Hoelder(0.5), 0.62)
    psi = ob.make_observable(tower.system, ob.Hoelder(0.5), 0.9)
    rep = corr.verify_approximation(tower, phi, psi, [0, 2, 8], 10, samples=100_000, rng_seed=1)
    assert rep.passed
    assert {r.k for r in rep.rows} == {0, 2, 8}
    for r in rep.rows:
        assert r.bound == pytest.approx(2 * (phi.sup_norm + psi.sup_norm) * min(r.delta_hat, 0.5) ** 0.5)
    text = rep.to_csv()
    assert text.splitlines()[0].startswith("k,n,c_tilde")


def test_declared_modulus_rules():
    phi = ob.make_observable(CIRCLE, ob.Hoelder(0.5), 0.1)
    assert corr.declared_modulus(ob.constant(CIRCLE, 3.0), 0.1) == 0.0
    assert corr.declared_modulus(phi, 0.04) == pytest.approx(0.2)
    assert corr.declared_modulus(phi + ob.cosine(CIRCLE), 0.04) == pytest.approx(0.2 + 2 * math.pi * 0.04)
    assert corr.declared_modulus(-2.0 * phi, 0.04) == pytest.approx(0.4)
