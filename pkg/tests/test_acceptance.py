"""One test per acceptance criterion; each records a PASS/FAIL line."""
import re
import time

import numpy as np
import pytest

from acceptance_log import LINES, record
from hexqec.circuits import memory_circuit
from hexqec.dd import optimize_dd, pulse_count
from hexqec.decoder import MatchingDecoder, brute_force_decode
from hexqec.dem import build_dem, decompose_graphlike, enumerate_faults
from hexqec.experiment import DDAwareEvaluator, chi_sweep
from hexqec.fitting import (aic_select, bootstrap, fit_model, order3, suppression_factors)
from hexqec.metrics import (EFSeries, Spam, Tallies, closed_form_ef, ef_from_probs, scaling_report,
                            spam_calibrate, synthetic_probs, witnesses)
from hexqec.noise import attach_noise
from hexqec.pauliframe import propagate_fault, propagate_faults, sample_shots
from oracles import entanglement_fidelity, failure_probs
from table1 import SCALED, SUBLATTICES

N10 = np.arange(10)


@pytest.fixture(autouse=True)
def _mark_errors(request):
    yield
    m = re.match(r"test_criterion_(\d+)", request.node.name)
    if m and int(m.group(1)) not in LINES:
        record(int(m.group(1)), False, "raised before completing")


def _noisy(patch, model, alpha, n):
    return attach_noise(memory_circuit(patch, alpha, n, model.durations()), model)


def test_criterion_1_decoder_matches_milp(p33, model):
    t0 = time.time()
    agree = total = 0
    for k, a in enumerate("0+"):
        dem = decompose_graphlike(build_dem(_noisy(p33, model, a, 1)))
        dec = MatchingDecoder(dem)
        rng = np.random.default_rng(100 + k)
        for _ in range(500):
            syn = rng.integers(0, 2, dem.num_detectors).astype(np.uint8)
            agree += dec.decode(syn) == brute_force_decode(dem, syn, "milp")
            total += 1
    dt = time.time() - t0
    ok = record(1, agree == total == 1000 and dt < 120,
                f"decoder vs MILP {agree}/{total} masks agree, {dt:.1f}s")
    assert ok


def test_criterion_2_dem_composition(p33, model):
    nc = _noisy(p33, model, "0", 2)
    faults = [(k, t) for k, t, _ in enumerate_faults(nc)]
    single = {}
    for f in faults:
        dets, mask = propagate_fault(nc, *f)
        single[f] = (np.isin(np.arange(len(nc.base.detectors)), sorted(dets)).astype(np.uint8), mask)
    keys = {(m.dets, m.mask) for m in build_dem(nc).mechanisms}
    missing = sum(1 for d, m in single.values()
                  if (d.any() or m) and (tuple(np.nonzero(d)[0].tolist()), m) not in keys)
    rng = np.random.default_rng(2)
    subsets = []
    for _ in range(10000):
        idx = rng.choice(len(faults), rng.integers(1, 9), replace=False)
        subsets.append([faults[i] for i in idx])
    d_all, o_all = propagate_faults(nc, subsets)
    bad = 0
    for row, sub in enumerate(subsets):
        d = np.zeros(d_all.shape[1], np.uint8)
        mask = 0
        for f in sub:
            d ^= single[f][0]
            mask ^= single[f][1]
        got = sum(int(b) << i for i, b in enumerate(o_all[row]))
        bad += not (np.array_equal(d, d_all[row]) and mask == got)
    ok = record(2, bad == 0 and missing == 0,
                f"{bad} mismatches over 10000 fault subsets, {missing} symptoms absent from DEM")
    assert ok


def test_criterion_3_marginals(p33, model):
    worst = 0.0
    for a in "0+":
        nc = _noisy(p33, model, a, 1)
        pr = build_dem(nc).detector_probabilities()
        b = sample_shots(nc, 100_000, 3)
        freq = b.detector_bits.mean(axis=0)
        z = np.abs(freq - pr) / np.sqrt(pr * (1 - pr) / b.shot_count)
        worst = max(worst, float(z.max()))
    ok = record(3, worst < 5, f"max |z| of detector marginals = {worst:.2f} (limit 5)")
    assert ok


def test_criterion_4_ef_closed_form():
    xi, zeta, gamma, n_max = 0.98, 0.96, 0.01, 10
    ef = ef_from_probs(synthetic_probs(xi, zeta, gamma, n_max))
    closed = np.array([closed_form_ef(xi, zeta, gamma, n) for n in range(n_max + 1)])
    oracle = np.array([entanglement_fidelity(xi, zeta, gamma, n) for n in range(n_max + 1)])
    err = float(np.max(np.abs(ef.F - closed)))
    err_oracle = float(np.max(np.abs(closed - oracle)))
    bounds = bool(np.all(ef.F_low <= ef.F + 1e-12) and np.all(ef.F <= ef.F_high + 1e-12))
    ok = record(4, err < 1e-9 and err_oracle < 1e-9 and bounds,
                f"|dF| = {err:.1e}, closed form vs density matrix {err_oracle:.1e}, bounds hold: {bounds}")
    assert ok


def test_criterion_5_fit_recovery():
    t0 = time.time()
    true = {"a": 0.6, "b": -0.55, "eps": 0.03}
    p = order3(N10, **true)
    f = fit_model(N10, p, 3)
    exact_err = max(abs(f.params[k] - v) for k, v in true.items())
    rng = np.random.default_rng(5)
    shots = 3000
    noisy = rng.binomial(shots, p) / shots
    best, _ = aic_select(N10, noisy)
    fb = bootstrap(N10, noisy, shots, 3, replicates=200, seed=5)
    zs = {k: abs(fb.params[k] - v) / fb.std(k) for k, v in true.items()}
    unital = failure_probs(0.97, 0.98, 0.0, 9)
    best_unital = {a: aic_select(N10, np.array([unital[a][n] for n in N10]))[0] for a in "0+"}
    dt = time.time() - t0
    ok = (exact_err < 1e-6 and max(zs.values()) < 3 and best == 3
          and set(best_unital.values()) == {1} and dt < 60)
    record(5, ok, f"exact err {exact_err:.1e}; noisy z = "
                  + ", ".join(f"{k}:{v:.2f}" for k, v in zs.items())
                  + f"; AIC noisy -> {best}, unital -> {sorted(set(best_unital.values()))}; {dt:.1f}s")
    assert ok


def test_criterion_6_suppression_arithmetic():
    s53 = suppression_factors(SCALED[(5, 3)], SUBLATTICES)
    s35 = suppression_factors(SCALED[(3, 5)], SUBLATTICES)
    got = (round(s53.per_alpha["0"], 2), round(s53.basis_avg, 2), round(s35.per_alpha["+"], 2))
    ok = record(6, got == (1.46, 0.67, 1.23),
                f"Lambda_eps,0^(5,3)={got[0]}, Lambda_eps^(5,3)={got[1]}, Lambda_eps,+^(3,5)={got[2]}")
    assert ok


CHI_GRID = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0]


def test_criterion_7_chi_crossing(device, p33, model):
    from hexqec.layout import carve_patch
    t0 = time.time()
    res = chi_sweep({"(3,3)": p33, "(5,5)": carve_patch(device, 5, 5)}, model, CHI_GRID,
                    100_000, seed=7)
    dt = time.time() - t0
    small, large = np.array(res.infidelity["(3,3)"]), np.array(res.infidelity["(5,5)"])
    ok = len(res.crossings) == 1 and large[0] < small[0] and dt < 1800
    record(7, ok, f"crossings at chi = {[round(c, 2) for c in res.crossings]}, "
                  f"(5,5) better at chi={CHI_GRID[0]}: {bool(large[0] < small[0])}, {dt / 60:.1f} min")
    assert ok


def test_criterion_8_dd_optimizer(p33, model):
    c0 = memory_circuit(p33, "0", 1, model.durations())
    c1, s1 = optimize_dd(c0, DDAwareEvaluator(model))
    c2, s2 = optimize_dd(c0, DDAwareEvaluator(model))
    trace = c1.meta["dd_trace"]
    mono = all(b <= a for a, b in zip(trace, trace[1:]))
    per_cycle = (pulse_count(c1) - pulse_count(c0)) / 2
    same = s1.passes == s2.passes and c1.pulses == c2.pulses and trace == c2.meta["dd_trace"]
    ok = record(8, mono and per_cycle <= 484 and same,
                f"{len(s1.passes)} passes, trace monotone: {mono}, {per_cycle:g} pulses/cycle, "
                f"reproducible: {same}")
    assert ok


def _ef(F):
    F = np.asarray(F, float)
    return EFSeries(N=np.arange(len(F)), F=F, F_low=F, F_high=F, gamma=np.ones(len(F)),
                    spam=Spam(1, 1, 0, 0))


def test_criterion_9_spurious_flag():
    small = {"nodd": _ef([1, 0.80, 0.70, 0.62]), "dd": _ef([1, 0.95, 0.92, 0.89])}
    large = {"nodd": _ef([1, 0.85, 0.78, 0.72]), "dd": _ef([1, 0.90, 0.85, 0.80])}
    with pytest.warns(UserWarning, match="spurious"):
        rep = scaling_report(small, large, range(1, 4))
    setup = bool(np.all(rep.unoptimized.value[1:] > 1) and np.all(rep.optimized.value[1:] < 1))
    ok = record(9, rep.spurious and setup,
                f"noDD Lambda_F > 1: {setup}, spurious flag raised: {rep.spurious}")
    assert ok


def test_criterion_10_witnesses():
    xi, zeta, gamma, n_max, shots = 0.99, 0.98, 0.02, 9, 3000
    exact = synthetic_probs(xi, zeta, gamma, n_max, u=1.0)
    t = Tallies.from_series(exact)
    dx, dz = witnesses(t, spam_calibrate(t))
    rising = bool(np.all(dz[1:] > 0) and np.all(np.diff(dz[1:]) > 0))
    rng = np.random.default_rng(10)

    def sampled():
        return {a: {n: rng.binomial(shots, exact[a][n]) / shots for n in exact[a]} for a in exact}

    reps = []
    for _ in range(200):
        tr = Tallies.from_series(sampled())
        reps.append(witnesses(tr, spam_calibrate(tr))[0])
    sigma = np.std(reps, axis=0, ddof=1)
    ts = Tallies.from_series(sampled())
    dxs = witnesses(ts, spam_calibrate(ts))[0]
    worst = float(np.max(np.abs(dxs[1:]) / sigma[1:]))
    ok = record(10, rising and worst < 3 and np.max(np.abs(dx)) < 1e-12,
                f"delta_z rising and positive: {rising}; sampled |delta_x| max {worst:.2f} sigma")
    assert ok
