"""Circuit-level Pauli noise: calibration ingestion, median/uniform models,
chi scaling and channel attachment."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import Circuit, Durations, TWO_QUBIT

DEFAULT_DT_NS = 4.0
DEFAULT_T1Q_NS = 32.0
DEFAULT_T2Q_NS = 68.0
DEFAULT_TMEAS_NS = 1200.0
PAULI2 = [a + b for a in "IXYZ" for b in "IXYZ"][1:]


class NoiseError(ValueError):
    pass


def _edge_key(u, v):
    return (min(u, v), max(u, v))


@dataclass
class NoiseModel:
    t1: dict  # qubit -> ns
    t2: dict
    p_m: dict
    t_meas: dict
    t_1q: dict
    p_2q: dict  # (u, v) -> prob
    t_2q: dict
    chi: float = 1.0
    dt_ns: float = DEFAULT_DT_NS
    dd_aware: bool = False
    p_pulse: float = 1e-4
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.p_2q = {_edge_key(*e): v for e, v in self.p_2q.items()}
        self.t_2q = {_edge_key(*e): v for e, v in self.t_2q.items()}
        for q in self.t1:
            if self.t1[q] <= 0 or self.t2[q] <= 0:
                raise NoiseError(f"qubit {q}: T1 and T2 must be positive")
            if self.t2[q] > 2 * self.t1[q] * (1 + 1e-12):
                raise NoiseError(f"qubit {q}: T2={self.t2[q]} exceeds 2*T1={2 * self.t1[q]}")
            if not 0 <= self.p_m[q] <= 1:
                raise NoiseError(f"qubit {q}: p_m={self.p_m[q]} outside [0,1]")
        for e, p in self.p_2q.items():
            if not 0 <= p <= 1:
                raise NoiseError(f"edge {e}: p_2q={p} outside [0,1]")
        for d in (self.t_meas, self.t_1q, self.t_2q):
            for k, t in d.items():
                if t <= 0:
                    raise NoiseError(f"duration for {k} must be positive")
        if self.chi < 0:
            raise NoiseError("chi must be >= 0")

    @property
    def qubits(self):
        return sorted(self.t1)

    def covers(self, qubits, edges):
        for q in qubits:
            if q not in self.t1:
                raise NoiseError(f"noise model has no entry for qubit {q}")
        for e in edges:
            if _edge_key(*e) not in self.p_2q:
                raise NoiseError(f"noise model has no coupler entry for edge {_edge_key(*e)}")

    def durations(self) -> Durations:
        """Median durations in dt, for circuit construction."""
        to_dt = lambda v: max(1, int(round(float(np.median(list(v))) / self.dt_ns)))
        return Durations(one_q=to_dt(self.t_1q.values()), two_q=to_dt(self.t_2q.values()),
                         meas=to_dt(self.t_meas.values()))

    def idle_probs(self, q, t_ns: float):
        """Twirled amplitude/phase damping for an idle of t_ns, chi-scaled."""
        if t_ns <= 0:
            return (0.0, 0.0, 0.0)
        px = t_ns / (4 * self.t1[q])
        pz = t_ns / 2 * (1 / self.t2[q] - 1 / (2 * self.t1[q]))
        px, pz = self.chi * px, self.chi * max(pz, 0.0)
        return _clip_idle(px, px, pz, self.warnings, q)

    def meas_rate(self, q) -> float:
        return 1.0 - math.sqrt(1.0 - min(self.p_m[q], 1.0))

    def to_json(self) -> dict:
        return {"dt_ns": self.dt_ns, "chi": self.chi,
                "qubits": {str(q): {"T1": self.t1[q], "T2": self.t2[q], "p_m": self.p_m[q],
                                    "t_meas": self.t_meas[q], "t_1q": self.t_1q[q]} for q in self.qubits},
                "edges": {f"{u}-{v}": {"p_2q": p, "t_2q": self.t_2q[(u, v)]}
                          for (u, v), p in sorted(self.p_2q.items())}}


def _clip_idle(px, py, pz, log, q):
    tot = px + py + pz
    if tot > 0.5:
        msg = f"idle probabilities on qubit {q} clipped from {tot:.3g} to 0.5"
        log.append(msg)
        warnings.warn(msg)
        s = 0.5 / tot
        px, py, pz = px * s, py * s, pz * s
    return (px, py, pz)


def from_calibration(path, require_edges=None) -> NoiseModel:
    """Read a calibration JSON file (schema in README)."""
    try:
        with open(path) as fh:
            d = json.load(fh)
        qs = {int(k): v for k, v in d["qubits"].items()}
        es = {tuple(sorted(int(x) for x in k.split("-"))): v for k, v in d["edges"].items()}
    except (OSError, ValueError, KeyError, AttributeError) as exc:
        raise NoiseError(f"malformed calibration file {path}: {exc}") from exc
    for q, v in qs.items():
        for key in ("T1", "T2", "p_m"):
            if key not in v:
                raise NoiseError(f"qubit {q} lacks {key}")
            if v[key] < 0:
                raise NoiseError(f"qubit {q}: negative {key}")
    for e, v in es.items():
        if v.get("p_2q", -1) < 0:
            raise NoiseError(f"edge {e}: missing or negative p_2q")
    if require_edges is not None:
        for e in require_edges:
            if _edge_key(*e) not in es:
                raise NoiseError(f"calibration lacks coupler entry for edge {_edge_key(*e)}")
    return NoiseModel(
        t1={q: v["T1"] for q, v in qs.items()}, t2={q: v["T2"] for q, v in qs.items()},
        p_m={q: v["p_m"] for q, v in qs.items()},
        t_meas={q: v.get("t_meas", DEFAULT_TMEAS_NS) for q, v in qs.items()},
        t_1q={q: v.get("t_1q", DEFAULT_T1Q_NS) for q, v in qs.items()},
        p_2q={e: v["p_2q"] for e, v in es.items()},
        t_2q={e: v.get("t_2q", DEFAULT_T2Q_NS) for e, v in es.items()},
        chi=d.get("chi", 1.0), dt_ns=d.get("dt_ns", DEFAULT_DT_NS))


def uniform_model(qubits, edges, p: float = 1e-3, t1: float = 250e3, t2: float = 150e3,
                  **kw) -> NoiseModel:
    """Same rates everywhere: p_2q = p_m = p, idles from (T1, T2) in ns."""
    qubits = list(qubits)
    edges = [_edge_key(*e) for e in edges]
    return NoiseModel(t1={q: t1 for q in qubits}, t2={q: t2 for q in qubits},
                      p_m={q: p for q in qubits}, t_meas={q: DEFAULT_TMEAS_NS for q in qubits},
                      t_1q={q: DEFAULT_T1Q_NS for q in qubits}, p_2q={e: p for e in edges},
                      t_2q={e: DEFAULT_T2Q_NS for e in edges}, **kw)


def median_model(m: NoiseModel, qubits=None, edges=None) -> NoiseModel:
    """Replace every rate and duration by its device median, optionally
    transplanted onto another set of qubits/edges (a virtual device)."""
    if not m.t1:
        raise NoiseError("empty noise model")
    qubits = m.qubits if qubits is None else list(qubits)
    edges = list(m.p_2q) if edges is None else [_edge_key(*e) for e in edges]
    med = lambda d: float(np.median(list(d.values())))
    qv = {k: med(getattr(m, k)) for k in ("t1", "t2", "p_m", "t_meas", "t_1q")}
    if qv["t2"] > 2 * qv["t1"]:
        qv["t2"] = 2 * qv["t1"]
    ev = {k: med(getattr(m, k)) for k in ("p_2q", "t_2q")}
    return NoiseModel(**{k: {q: v for q in qubits} for k, v in qv.items()},
                      **{k: {e: v for e in edges} for k, v in ev.items()},
                      chi=m.chi, dt_ns=m.dt_ns, dd_aware=m.dd_aware, p_pulse=m.p_pulse)


def scale_chi(m: NoiseModel, chi: float) -> NoiseModel:
    """Multiply every gate/measurement rate by chi (idle rates scale at attach)."""
    if chi < 0:
        raise NoiseError("chi must be >= 0")
    log = list(m.warnings)

    def clip(d, what):
        out = {}
        for k, p in d.items():
            v = chi * p
            if v > 0.5:
                msg = f"{what} for {k} clipped from {v:.3g} to 0.5"
                log.append(msg)
                warnings.warn(msg)
                v = 0.5
            out[k] = v
        return out

    return replace(m, p_m=clip(m.p_m, "p_m"), p_2q=clip(m.p_2q, "p_2q"), chi=m.chi * chi,
                   warnings=log)


@dataclass(frozen=True)
class Channel:
    kind: str  # DEP2 | DEP1 | MEAS_FLIP | CLASSICAL | IDLE_PAULI
    qubits: tuple
    terms: tuple  # ((pauli string or "FLIP", prob), ...)
    layer: int
    record: int | None = None

    @property
    def total(self) -> float:
        return sum(p for _, p in self.terms)


@dataclass
class NoisyCircuit:
    base: Circuit
    channels: list
    events: list  # ("g", instruction index) | ("c", channel index), execution order
    model: NoiseModel | None = None

    @property
    def num_records(self):
        return len(self.base.records)


def dd_suppression(m: int, gap: float) -> float:
    """Idle-dephasing factor for a gap holding m ideal pulses."""
    return 1.0 / (1.0 + m)


def _op_time(m: NoiseModel, ins) -> float:
    if ins.kind in TWO_QUBIT:
        return m.t_2q[_edge_key(*ins.qubits)]
    if ins.kind == "MEASURE_Z":
        return m.t_meas[ins.qubits[0]]
    if ins.kind == "PREP_Z":
        return 0.0
    return m.t_1q[ins.qubits[0]]


def attach_noise(c: Circuit, m: NoiseModel | None, suppression=dd_suppression) -> NoisyCircuit:
    """Interleave Pauli channels with the circuit's layers."""
    chans, events = [], []
    if m is None:
        events = [("g", k) for L in c.layers for k in L]
        return NoisyCircuit(c, chans, events, None)
    qubits = c.qubits
    m.covers(qubits, [ins.qubits for ins in c.instructions if ins.kind in TWO_QUBIT])
    rec_of = {k: r for r, k in enumerate(c.records)}
    gaps = {}
    for q, start, dur, npulse, *_ in c.meta.get("dd_gaps", []):
        gaps.setdefault(q, []).append((start, start + dur, npulse))
    pulse_layer = {}
    t_dt = 0.0  # layer start in dt, used to locate DD gaps
    layer_bounds = []
    for L in c.layers:
        if L:
            s = min(c.instructions[k].start for k in L)
            e = max(c.instructions[k].end for k in L)
        else:
            s = e = t_dt
        layer_bounds.append((s, e))
        t_dt = e
    if m.dd_aware:
        for p in c.pulses:
            li = next((i for i, (s, e) in enumerate(layer_bounds) if s <= p.start < e),
                      len(layer_bounds) - 1)
            pulse_layer.setdefault(li, []).append(p.qubits[0])

    def add(ch):
        if ch.total > 0:
            chans.append(ch)
            events.append(("c", len(chans) - 1))

    for li, L in enumerate(c.layers):
        busy = {}
        for k in L:
            ins = c.instructions[k]
            if ins.kind == "MEASURE_Z":
                q = ins.qubits[0]
                add(Channel("MEAS_FLIP", (q,), (("X", m.meas_rate(q)),), li))
        for k in L:
            ins = c.instructions[k]
            events.append(("g", k))
            t = _op_time(m, ins)
            for q in ins.qubits:
                busy[q] = t
            if ins.kind in TWO_QUBIT:
                p = m.p_2q[_edge_key(*ins.qubits)]
                add(Channel("DEP2", ins.qubits, tuple((s, p / 15) for s in PAULI2), li))
            elif ins.kind == "MEASURE_Z":
                q = ins.qubits[0]
                add(Channel("CLASSICAL", (q,), (("FLIP", m.meas_rate(q)),), li, rec_of[k]))
        length = max(busy.values(), default=0.0)
        s_dt, e_dt = layer_bounds[li]
        for q in qubits:
            t_id = length - busy.get(q, 0.0)
            if t_id <= 0:
                continue
            px, py, pz = m.idle_probs(q, t_id)
            if m.dd_aware and q in gaps:
                mid = e_dt - 0.5 * t_id / m.dt_ns
                for a, b, npulse in gaps[q]:
                    if a <= mid < b:
                        pz *= suppression(npulse, b - a)
                        break
            add(Channel("IDLE_PAULI", (q,), (("X", px), ("Y", py), ("Z", pz)), li))
        for q in pulse_layer.get(li, []):
            pp = min(m.p_pulse * m.chi, 0.75)
            add(Channel("DEP1", (q,), (("X", pp / 3), ("Y", pp / 3), ("Z", pp / 3)), li))
    return NoisyCircuit(c, chans, events, m)
