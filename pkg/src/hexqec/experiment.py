"""Glue between circuits, noise, sampling and decoding."""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import ALPHAS, Circuit, memory_circuit
from .dem import build_dem, decompose_graphlike
from .decoder import MatchingDecoder, DecodeResult
from .metrics import MetricsError, Spam, Tallies, ef_series, gamma_series, spam_calibrate
from .noise import NoiseModel, attach_noise, scale_chi
from .pauliframe import sample_shots


def run_point(c: Circuit, model: NoiseModel, shots: int, seed: int) -> tuple:
    """Sample, decode and count failures for one annotated circuit."""
    nc = attach_noise(c, model)
    dec = MatchingDecoder(decompose_graphlike(build_dem(nc)))
    batch = sample_shots(nc, shots, seed)
    res = DecodeResult.from_shots(dec, batch)
    return int(res.failures.sum()), shots


class DDAwareEvaluator:
    """Logical error rate of a circuit under the DD-aware noise extension:
    filled gaps get dephasing scaled by 1/(1+m) and each pulse adds p_pulse
    depolarizing noise. Deterministic for a fixed seed."""

    def __init__(self, model: NoiseModel, shots: int = 10000, seed: int = 0, p_pulse: float = 1e-4):
        self.model = replace(model, dd_aware=True, p_pulse=p_pulse)
        self.shots = shots
        self.seed = seed

    def __call__(self, c: Circuit) -> float:
        fails, shots = run_point(c, self.model, self.shots, self.seed)
        return fails / shots


def point_seed(seed: int, *key) -> int:
    """Stable per-point seed derived from the run seed and a key."""
    h = hashlib.sha256(":".join(map(str, (seed,) + key)).encode()).hexdigest()
    return int(h[:8], 16)


def ef_from_entries(entries) -> tuple:
    """EF series from decoder series entries of one code and arm.

    Returns (EFSeries, notes). With only the {0, +} states present the
    missing ones are filled symmetrically (p_1 := p_0, p_- := p_+). A
    missing N=0 row falls back to ideal SPAM (a=1, b=0) with a warning.
    """
    probs = {}
    for e in entries:
        probs.setdefault(e.alpha, {})[e.N] = e.p
    if not probs:
        raise MetricsError("empty series")
    notes = []
    have = set(probs)
    if have >= set(ALPHAS):
        pass
    elif have >= {"0", "+"}:
        probs.setdefault("1", dict(probs["0"]))
        probs.setdefault("-", dict(probs["+"]))
        notes.append("symmetric mode: p_1 := p_0, p_- := p_+")
    else:
        raise MetricsError(f"EF needs both bases; have states {sorted(have)}")
    Ns = sorted(set.intersection(*(set(probs[a]) for a in ALPHAS)))
    if not Ns:
        raise MetricsError("no cycle count shared by all states")
    t = Tallies.from_series({a: {n: probs[a][n] for n in Ns} for a in ALPHAS})
    if 0 in Ns:
        spam = spam_calibrate(t)
        g = gamma_series(t, spam)
    else:
        msg = "no N=0 row: SPAM defaults a=1, b=0"
        warnings.warn(msg)
        notes.append(msg)
        spam = Spam(a_x=1.0, a_z=1.0, b_x=0.0, b_z=0.0)
        t = Tallies(N=np.concatenate([[0], t.N]), sigma_x=np.concatenate([[1.0], t.sigma_x]),
                    sigma_z=np.concatenate([[1.0], t.sigma_z]),
                    delta_x=np.concatenate([[0.0], t.delta_x]),
                    delta_z=np.concatenate([[0.0], t.delta_z]))
        g = gamma_series(t, spam)
    return ef_series(t, spam, g), notes


@dataclass
class SweepResult:
    chis: list
    infidelity: dict  # patch label -> list of 1-cycle infidelities
    crossings: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def find_crossings(x, y_small, y_large) -> list:
    """Multipliers where the large code stops beating the small one
    (sign changes of y_large - y_small, linearly interpolated)."""
    d = np.asarray(y_large, float) - np.asarray(y_small, float)
    out = []
    for k in range(len(d) - 1):
        if d[k] == 0:
            out.append(float(x[k]))
        elif d[k] * d[k + 1] < 0:
            out.append(float(x[k] + (x[k + 1] - x[k]) * d[k] / (d[k] - d[k + 1])))
    if len(d) and d[-1] == 0:
        out.append(float(x[-1]))
    return out


def one_cycle_infidelity(patch, model: NoiseModel, shots: int, seed: int,
                         alphas=ALPHAS, label: str = "") -> float:
    """1 - F_e at N=1 with SPAM calibrated from the N=0 runs."""
    from .decoder import estimate_series
    rows = []
    for a in alphas:
        for n in (0, 1):
            c = memory_circuit(patch, a, n, model.durations())
            f, s = run_point(c, model, shots, point_seed(seed, label, a, n))
            rows.append({"N": n, "alpha": a, "failures": f, "shots": s})
    ef, _ = ef_from_entries(estimate_series(rows))
    return float(1.0 - ef.F[list(ef.N).index(1)])


def chi_sweep(patches: dict, base: NoiseModel, chis, shots: int, seed: int = 0,
              alphas=ALPHAS) -> SweepResult:
    """patches maps label -> CodePatch, the first being the smaller code."""
    chis = [float(c) for c in chis]
    inf = {label: [] for label in patches}
    for chi in chis:
        m = scale_chi(base, chi)
        for label, patch in patches.items():
            inf[label].append(one_cycle_infidelity(patch, m, shots, seed, alphas, f"{label}@{chi}"))
    labels = list(patches)
    res = SweepResult(chis, inf)
    if len(labels) >= 2:
        res.crossings = find_crossings(chis, inf[labels[0]], inf[labels[1]])
    return res
