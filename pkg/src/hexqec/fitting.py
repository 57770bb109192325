"""Logical-error fitting models, AIC selection, bootstrap, suppression factors
and stationarity diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit, OptimizeWarning

PARAM_NAMES = {1: ("eps",), 2: ("a", "eps"), 3: ("a", "b", "eps")}


class FitError(RuntimeError):
    pass


def order1(N, eps):
    return 0.5 * (1.0 - (1.0 - 2.0 * eps) ** N)


def order2(N, a, eps):
    return a * (1.0 - (1.0 - eps / a) ** N)


def order3(N, a, b, eps):
    return a + b * (1.0 - eps / a) ** N


MODELS = {1: order1, 2: order2, 3: order3}


def predict(order: int, N, params: dict):
    N = np.asarray(N, dtype=float)
    return MODELS[order](N, *[params[k] for k in PARAM_NAMES[order]])


def recurrence(p0: float, eps: float, beta: float, n_max: int):
    """Iterate p_{N+1} = (1 - beta) p_N + eps (1 - p_N)."""
    p = [p0]
    for _ in range(n_max):
        p.append((1.0 - beta) * p[-1] + eps * (1.0 - p[-1]))
    return np.array(p)


@dataclass
class FitResult:
    order: int
    params: dict
    rss: float
    aic: float
    n: int
    samples: dict = field(default_factory=dict)

    @property
    def eps(self) -> float:
        return self.params["eps"]

    def std(self, name: str) -> float:
        s = self.samples.get(name)
        return float(np.std(s, ddof=1)) if s is not None and len(s) > 1 else float("nan")


def aic_value(rss: float, n: int, k: int) -> float:
    # floor keeps exact synthetic data finite; ties then go to fewer params
    rss = max(rss, n * 1e-28)
    return n * np.log(rss / n) + 2 * k


_BOUNDS = {
    1: ([0.0], [0.5]),
    2: ([1e-9, 0.0], [1.0, 1.0]),
    3: ([1e-9, -1.0, 0.0], [1.0, 1.0, 1.0]),
}


def _starts(order, N, p):
    e1 = _order1_guess(N, p)
    if order == 1:
        return [[e1]]
    pmax = float(np.clip(np.max(p), 1e-3, 1.0))
    starts = []
    for a0 in (0.5, pmax):
        e0 = min(e1, 0.99 * a0)
        if order == 2:
            starts.append([a0, e0])
        else:
            starts.append([a0, float(np.clip(p[0] - a0, -1, 1)), e0])
    return starts


def _order1_guess(N, p):
    m = (N >= 1) & (p < 0.5)
    if not m.any():
        return 0.01
    e = [single_point_rate(pp, int(n)) for n, pp in zip(N[m], p[m])]
    return float(np.clip(np.median(e), 1e-6, 0.49))


def fit_model(N, p, order: int, sigma=None) -> FitResult:
    """Least-squares fit of one model order with a small multistart."""
    N = np.asarray(N, dtype=float)
    p = np.asarray(p, dtype=float)
    if order not in MODELS:
        raise FitError(f"unknown model order {order}")
    if len(N) < order + 1:
        raise FitError(f"order {order} needs at least {order + 1} points, got {len(N)}")
    if order == 3 and 0 not in N:
        raise FitError("order-3 fit needs the N=0 point")
    best = None
    errors = []
    for x0 in _starts(order, N, p):
        lo, hi = _BOUNDS[order]
        x0 = np.clip(x0, np.array(lo) + 1e-12, np.array(hi) - 1e-12)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OptimizeWarning)
                warnings.simplefilter("ignore", RuntimeWarning)
                popt, _ = curve_fit(MODELS[order], N, p, p0=x0, sigma=sigma,
                                    bounds=(lo, hi), method="trf",
                                    ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=20000)
        except (RuntimeError, ValueError) as exc:
            errors.append(str(exc))
            continue
        resid = MODELS[order](N, *popt) - p
        rss = float(np.sum(resid ** 2))
        if not np.isfinite(rss):
            continue
        if best is None or rss < best[1]:
            best = (popt, rss)
    if best is None:
        raise FitError(f"order {order} fit failed from all starts: {errors}")
    popt, rss = best
    params = dict(zip(PARAM_NAMES[order], map(float, popt)))
    return FitResult(order=order, params=params, rss=rss,
                     aic=aic_value(rss, len(N), order), n=len(N))


def aic_select(N, p):
    """Fit all three orders; return (best order, {order: FitResult})."""
    fits = {k: fit_model(N, p, k) for k in (1, 2, 3)}
    best = min(fits, key=lambda k: (round(fits[k].aic, 9), k))
    return best, fits


def bootstrap(N, p, shots, order: int, replicates: int = 200, seed: int = 0) -> FitResult:
    """Binomial resampling of failure counts, refitting each replicate."""
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    N = np.asarray(N, dtype=float)
    p = np.asarray(p, dtype=float)
    shots = np.broadcast_to(np.asarray(shots), p.shape)
    base = fit_model(N, p, order)
    rng = np.random.default_rng(seed)
    samples = {k: [] for k in PARAM_NAMES[order]}
    for _ in range(replicates):
        pr = rng.binomial(shots, np.clip(p, 0, 1)) / shots
        try:
            f = fit_model(N, pr, order)
        except FitError:
            continue
        for k in samples:
            samples[k].append(f.params[k])
    base.samples = {k: np.array(v) for k, v in samples.items()}
    return base


def single_point_rate(p: float, N: int) -> float:
    """Invert the order-1 model at a single cycle count."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 <= p < 0.5:
        raise ValueError(f"p must lie in [0, 1/2), got {p}")
    return 0.5 * (1.0 - (1.0 - 2.0 * p) ** (1.0 / N))


# -- suppression factors ------------------------------------------------------

@dataclass
class Suppression:
    per_alpha: dict
    min_sub: dict
    basis_avg: float
    flags: list


def _div(a, b, label, flags):
    if b == 0:
        flags.append(f"{label}: zero denominator")
        return float("inf")
    return a / b


def suppression_factors(eps_large: dict, eps_subs: list) -> Suppression:
    """Lambda_{eps,alpha} of a scaled code against its (3,3) sublattices.

    eps_large maps alpha -> eps for the scaled code; eps_subs is a list of the
    same mapping, one per sublattice.
    """
    flags = []
    per, mins = {}, {}
    for a, e in eps_large.items():
        sub = [s[a] for s in eps_subs]
        per[a] = _div(float(np.mean(sub)), e, f"alpha={a}", flags)
        mins[a] = min(_div(x, e, f"alpha={a}", flags) for x in sub)
    big = 0.25 * sum(eps_large.values())
    small = float(np.mean([0.25 * sum(s.values()) for s in eps_subs]))
    return Suppression(per_alpha=per, min_sub=mins,
                       basis_avg=_div(small, big, "basis-avg", flags), flags=flags)


# -- stationarity -----------------------------------------------------------

@dataclass
class Stationarity:
    N: np.ndarray
    q: float
    a: np.ndarray
    b: np.ndarray
    eps: np.ndarray
    flags: list


def stationarity_diagnostics(N, p, rtol: float = 0.05) -> Stationarity:
    """Recover q, a, b, eps from successive differences of one series."""
    N = np.asarray(N, dtype=int)
    p = np.asarray(p, dtype=float)
    if len(N) < 3:
        raise ValueError("need at least 3 points")
    o = np.argsort(N)
    N, p = N[o], p[o]
    d = np.diff(p)
    keep = np.abs(d) > 0
    if keep.sum() < 2:
        raise ValueError("fewer than two non-zero differences")
    slope, _ = np.polyfit(N[:-1][keep], np.log(np.abs(d[keep])), 1)
    q = float(np.exp(slope))
    flags = []
    if abs(1.0 - q) < 1e-12:
        raise ValueError("q = 1: no decay in the differences")
    a = (p[1:] - q * p[:-1]) / (1.0 - q)
    Na = N[:-1]
    a_ref = float(np.median(a))
    b = (p[:-1] - a_ref) / q ** Na
    eps = a * (1.0 - q)
    # constancy of the recovered a and the log-linear law
    if np.ptp(a) > rtol * max(abs(a_ref), 1e-12):
        flags.append("a not constant across N")
    lin = np.polyval([slope, 0], N[:-1][keep])
    res = np.log(np.abs(d[keep])) - lin
    if np.ptp(res) > np.log(1 + rtol):
        flags.append("differences not geometric")
    return Stationarity(N=Na, q=q, a=a, b=b, eps=eps, flags=flags)


def pair_constraints(diag: dict, atol: float = 0.02) -> list:
    """Check a_+ + a_- = 1 and a_0 + a_1 = 1 for a dict alpha -> Stationarity."""
    flags = []
    for x, y in (("+", "-"), ("0", "1")):
        if x in diag and y in diag:
            s = float(np.median(diag[x].a) + np.median(diag[y].a))
            if abs(s - 1.0) > atol:
                flags.append(f"a_{x} + a_{y} = {s:.4f} != 1")
    return flags
