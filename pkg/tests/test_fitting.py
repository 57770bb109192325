import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hexqec.fitting import (FitError, aic_select, aic_value, bootstrap, fit_model, order1, order2,
                            order3, pair_constraints, predict, recurrence, single_point_rate,
                            stationarity_diagnostics, suppression_factors)
from oracles import entanglement_fidelity, failure_probs
from table1 import SCALED, SUBLATTICES, TABLE

N = np.arange(10)


def test_order1_closed_form():
    assert order1(2, 0.1) == pytest.approx(0.18)


def test_order1_recovery():
    f = fit_model(N, order1(N, 0.1), 1)
    assert abs(f.eps - 0.1) < 1e-8


def test_order2_recovery():
    f = fit_model(N, order2(N, 0.35, 0.03), 2)
    assert f.params["a"] == pytest.approx(0.35, abs=1e-6)
    assert f.eps == pytest.approx(0.03, abs=1e-6)


def test_order3_recovery_from_recurrence():
    # forward recursion with SPAM offset p0 and recovery rate beta
    eps, beta, p0 = 0.04, 0.02, 0.03
    p = recurrence(p0, eps, beta, 9)
    a = eps / (eps + beta)
    f = fit_model(N, p, 3)
    assert f.params["a"] == pytest.approx(a, abs=1e-6)
    assert f.params["b"] == pytest.approx(p0 - a, abs=1e-6)
    assert f.eps == pytest.approx(eps, abs=1e-6)
    assert np.allclose(predict(3, N, f.params), p, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(1e-3, 0.2), beta=st.floats(0.0, 0.2), p0=st.floats(0.0, 0.2))
def test_recurrence_matches_closed_form(eps, beta, p0):
    a = eps / (eps + beta)
    closed = order3(N, a, p0 - a, eps)
    assert np.allclose(recurrence(p0, eps, beta, 9), closed, atol=1e-12)


def test_order3_needs_zero_point():
    with pytest.raises(FitError):
        fit_model(np.arange(1, 6), order1(np.arange(1, 6), 0.05), 3)


def test_too_few_points():
    with pytest.raises(FitError):
        fit_model(np.array([0, 1]), np.array([0.0, 0.1]), 2)


def test_aic_formula():
    assert aic_value(0.5, 10, 2) == pytest.approx(10 * np.log(0.05) + 4)


def test_aic_prefers_order1_on_order1_data():
    rng = np.random.default_rng(1)
    p = order1(N, 0.03) + rng.normal(0, 1e-6, N.size)
    best, fits = aic_select(N, p)
    assert best == 1 and all(np.isfinite(f.aic) for f in fits.values())


def test_aic_nonhalf_asymptote():
    rng = np.random.default_rng(2)
    p = order2(N, 0.8, 0.1) + rng.normal(0, 1e-6, N.size)
    best, _ = aic_select(N, p)
    assert best >= 2


def test_aic_spam_offset():
    rng = np.random.default_rng(3)
    p = order3(N, 0.45, -0.40, 0.04) + rng.normal(0, 1e-6, N.size)
    best, _ = aic_select(N, p)
    assert best == 3


def test_bootstrap_zero_variance():
    f = bootstrap(N, np.zeros(N.size), 3000, 1, replicates=20, seed=0)
    assert np.ptp(f.samples["eps"]) == 0.0


def test_bootstrap_deterministic():
    p = order1(N, 0.02)
    a = bootstrap(N, p, 3000, 1, replicates=5, seed=7)
    b = bootstrap(N, p, 3000, 1, replicates=5, seed=7)
    assert np.array_equal(a.samples["eps"], b.samples["eps"])


def test_bootstrap_spread_at_3000_shots():
    # linearized binomial error propagation for the order-1 model
    eps, shots = 0.03, 3000
    p = order1(N, eps)
    jac = N * (1 - 2 * eps) ** (N - 1.0)
    m = N > 0
    expect = 1 / np.sqrt(np.sum(jac[m] ** 2 / (p[m] * (1 - p[m]) / shots)))
    f = bootstrap(N, p, shots, 1, replicates=200, seed=0)
    assert f.std("eps") == pytest.approx(expect, rel=0.25)
    assert 1e-4 <= f.std("eps") <= 1e-3


def test_bootstrap_needs_two():
    with pytest.raises(ValueError):
        bootstrap(N, order1(N, 0.1), 100, 1, replicates=1)


def test_suppression_table():
    for d, (rows, avg) in TABLE.items():
        s = suppression_factors(SCALED[d], SUBLATTICES)
        for a, (lam, mn) in rows.items():
            assert round(s.per_alpha[a], 2) == lam
            assert round(s.min_sub[a], 2) == mn
        assert round(s.basis_avg, 2) == avg
        assert s.flags == []


def test_suppression_identical_codes():
    e = {"0": 0.02, "1": 0.03, "+": 0.04, "-": 0.05}
    s = suppression_factors(e, [e, e, e])
    assert s.basis_avg == pytest.approx(1.0)
    assert all(v == pytest.approx(1.0) for v in [*s.per_alpha.values(), *s.min_sub.values()])


def test_suppression_zero_denominator_flagged():
    s = suppression_factors({"0": 0.0, "1": 0.0, "+": 0.0, "-": 0.0},
                            [{"0": 0.01, "1": 0.01, "+": 0.01, "-": 0.01}])
    assert s.flags


def test_model_order_sensitivity():
    # scaled code carries SPAM offset and a non-half asymptote
    small = {a: order3(N, 0.5, -0.49, 0.03) for a in "01+-"}
    large = {a: order3(N, 0.35, -0.25, 0.025) for a in "01+-"}
    lams = []
    for k in (1, 2, 3):
        es = {a: fit_model(N, small[a], k).eps for a in small}
        el = {a: fit_model(N, large[a], k).eps for a in large}
        lams.append(suppression_factors(el, [es]).basis_avg)
    assert (max(lams) - min(lams)) / min(lams) > 0.10


def test_stationarity_exact():
    p = order3(N, 0.5, -0.45, 0.05)
    s = stationarity_diagnostics(N, p)
    assert s.q == pytest.approx(0.9)
    assert np.allclose(s.a, 0.5) and np.allclose(s.eps, 0.05)
    assert np.allclose(s.b, -0.45)
    assert s.flags == []


def test_stationarity_drift_flagged():
    p = [0.02]
    for n in range(9):
        e = 0.01 * (1 + 0.3 * n)
        p.append(p[-1] + e * (1 - 2 * p[-1]))
    s = stationarity_diagnostics(N, np.array(p))
    assert s.flags
    assert np.ptp(s.eps) > 0.01 * np.median(s.eps)


def test_pair_constraints():
    good = {a: stationarity_diagnostics(N, order3(N, 0.5, -0.45, 0.05)) for a in "01+-"}
    assert pair_constraints(good) == []
    bad = dict(good, **{"1": stationarity_diagnostics(N, order3(N, 0.8, -0.75, 0.08))})
    assert pair_constraints(bad)


def test_single_point_examples():
    assert single_point_rate(0.0, 3) == 0.0
    assert single_point_rate(0.123, 1) == pytest.approx(0.123)
    assert single_point_rate(order1(4, 0.05), 4) == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(ValueError):
        single_point_rate(0.5, 2)


@settings(max_examples=50, deadline=None)
@given(eps=st.floats(0.0, 0.25), n=st.integers(1, 20))
def test_single_point_round_trip(eps, n):
    assert single_point_rate(order1(n, eps), n) == pytest.approx(eps, abs=1e-9)


def test_reduction_chain_spam_free_unital():
    probs = failure_probs(0.97, 0.98, 0.0, 9)
    for a in "0+":
        f = fit_model(N, np.array([probs[a][n] for n in N]), 3)
        assert f.params["b"] == pytest.approx(-f.params["a"], abs=1e-6)
        assert f.params["a"] == pytest.approx(0.5, abs=1e-6)


def test_single_cycle_ef_link():
    probs = failure_probs(0.995, 0.99, 0.0, 9)
    eps = np.mean([fit_model(N, np.array([probs[a][n] for n in N]), 1).eps for a in "01+-"])
    infid = 1 - entanglement_fidelity(0.995, 0.99, 0.0, 1)
    assert 2 * eps == pytest.approx(infid, rel=0.02)
