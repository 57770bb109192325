"""Fold/unfold stabilizer rounds and memory-experiment circuits.

Each round folds one half of the stabilizers onto weight-2 (or weight-1)
operators with bridge-mediated CNOTs, reads them out on check ancillas and
unfolds. The last unfold layer of a round runs in parallel with the first
fold layer of the next one, so every round has two-qubit depth 7.

Ancillas are never reset: each recorded bit equals the previous record of
the same ancilla XOR the current check value.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .layout import CodePatch, HALVES

KINDS = ("PREP_Z", "H", "CNOT", "CZ", "MEASURE_Z", "IDLE", "PULSE_X", "PULSE_Y")
TWO_QUBIT = ("CNOT", "CZ")
ALPHAS = ("0", "1", "+", "-")


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Durations:
    """Operation durations in units of dt (4 ns)."""
    one_q: int = 8
    two_q: int = 17
    meas: int = 300
    prep: int = 0

    def of(self, kind: str) -> int:
        if kind in TWO_QUBIT:
            return self.two_q
        if kind == "MEASURE_Z":
            return self.meas
        if kind == "PREP_Z":
            return self.prep
        return self.one_q


@dataclass(frozen=True)
class Instruction:
    kind: str
    qubits: tuple
    start: int
    duration: int
    tag: str = ""

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass
class Circuit:
    instructions: list = field(default_factory=list)
    layers: list = field(default_factory=list)  # lists of instruction indices
    records: list = field(default_factory=list)  # record index -> instruction index
    detectors: list = field(default_factory=list)  # tuples of record indices
    observables: list = field(default_factory=list)  # dicts: meas, data, basis
    meta: dict = field(default_factory=dict)
    pulses: list = field(default_factory=list)  # dynamical-decoupling pulses

    @property
    def qubits(self) -> list:
        return sorted({q for ins in self.instructions for q in ins.qubits})

    @property
    def duration(self) -> int:
        return max((i.end for i in self.instructions), default=0)

    def record_qubit(self, r: int) -> int:
        return self.instructions[self.records[r]].qubits[0]

    def two_qubit_depth(self) -> int:
        return sum(1 for L in self.layers
                   if any(self.instructions[k].kind in TWO_QUBIT for k in L))

    def copy(self) -> "Circuit":
        return Circuit(list(self.instructions), [list(L) for L in self.layers], list(self.records),
                       list(self.detectors), [dict(o) for o in self.observables],
                       json.loads(json.dumps(self.meta)), list(self.pulses))

    def digest(self) -> str:
        return hashlib.sha256(to_text(self).encode()).hexdigest()[:16]


class _Builder:
    def __init__(self, durations: Durations):
        self.d = durations
        self.c = Circuit()
        self.t = 0

    def layer(self, ops, tag=""):
        """ops: list of (kind, qubits). Returns record indices of measurements."""
        if not ops:
            return []
        seen = set()
        for kind, qs in ops:
            if kind not in KINDS:
                raise CircuitError(f"unknown instruction kind {kind}")
            if seen & set(qs):
                raise CircuitError(f"qubit used twice in one layer: {sorted(seen & set(qs))}")
            seen.update(qs)
        dur = max(self.d.of(k) for k, _ in ops)
        idx, recs = [], []
        for kind, qs in ops:
            self.c.instructions.append(Instruction(kind, tuple(qs), self.t, self.d.of(kind), tag))
            k = len(self.c.instructions) - 1
            idx.append(k)
            if kind == "MEASURE_Z":
                self.c.records.append(k)
                recs.append(len(self.c.records) - 1)
        self.c.layers.append(idx)
        self.t += dur
        return recs


def round_layers(patch: CodePatch, half: str, tail=()):
    """Two-qubit layers of one round plus the surrounding 1q/measure layers.

    Returns (layers, tail) where layers is a list of (label, ops) and tail
    is the deferred final unfold layer.
    """
    if half not in HALVES:
        raise CircuitError(f"half must be A or B, got {half}")
    fold = patch.fold_pairs[half]
    stabs = patch.stabilizers_of(half)
    xs = [s for s in stabs if s.type == "X"]
    zd = [s for s in stabs if s.type == "Z" and not s.bridges]
    zp = [s for s in stabs if s.bridges]
    cm = [("CNOT", (c, m)) for c, m, _ in fold]
    mt = [("CNOT", (m, t)) for _, m, t in fold]
    L = [
        ("pre", [("H", (s.ancilla,)) for s in xs]),
        ("fold1", list(tail) + cm + [("CNOT", (s.readout[0], s.bridges[0])) for s in zp]
         + [("CNOT", (s.readout[1], s.bridges[3])) for s in zp]),
        ("fold2", mt + [("CNOT", (s.bridges[0], s.bridges[1])) for s in zp]
         + [("CNOT", (s.bridges[3], s.bridges[2])) for s in zp]),
        ("fold3", cm + [("CNOT", (s.readout[0], s.ancilla)) for s in zd]
         + [("CNOT", (s.bridges[1], s.ancilla)) for s in zp]),
        ("check1", [("CNOT", (s.readout[1], s.ancilla)) for s in zd]
         + [("CNOT", (s.ancilla, s.readout[0])) for s in xs]
         + [("CNOT", (s.bridges[2], s.ancilla)) for s in zp]),
        ("check2", [("CNOT", (s.ancilla, s.readout[1])) for s in xs if len(s.readout) == 2]),
        ("post", [("H", (s.ancilla,)) for s in xs]),
        ("measure", [("MEASURE_Z", (s.ancilla,)) for s in stabs]),
        ("unfold1", cm + [("CNOT", (s.bridges[0], s.bridges[1])) for s in zp]
         + [("CNOT", (s.bridges[3], s.bridges[2])) for s in zp]),
        ("unfold2", mt + [("CNOT", (s.readout[0], s.bridges[0])) for s in zp]
         + [("CNOT", (s.readout[1], s.bridges[3])) for s in zp]),
    ]
    return L, tuple(cm)


def stabilizer_round(patch: CodePatch, half: str, durations: Durations | None = None,
                     tail=()) -> tuple:
    """A standalone round fragment and its deferred tail layer."""
    b = _Builder(durations or Durations())
    layers, new_tail = round_layers(patch, half, tail)
    for label, ops in layers:
        b.layer(ops, label)
    b.c.meta = {"half": half, "measured": [patch.stabilizers.index(s) for s in patch.stabilizers_of(half)]}
    return b.c, new_tail


def memory_circuit(patch: CodePatch, alpha: str, cycles: int,
                   durations: Durations | None = None, annotate: bool = True) -> Circuit:
    """Prepare |alpha>_L, run a calibration cycle plus `cycles` QEC cycles,
    then read out every data qubit in the basis of alpha."""
    if alpha not in ALPHAS:
        raise CircuitError(f"alpha must be one of {ALPHAS}, got {alpha!r}")
    if not isinstance(cycles, int) or cycles < 0:
        raise CircuitError(f"cycles must be a non-negative integer, got {cycles!r}")
    b = _Builder(durations or Durations())
    data = sorted(patch.data_qubits)
    b.layer([("PREP_Z", (q,)) for q in sorted(patch.qubits)], "prep")
    if alpha == "1":
        b.layer([("PULSE_X", (q,)) for q in sorted(patch.logical_x)], "logical")
    if alpha == "-":
        # X on the Z_L support before the Hadamards gives Z_L |+>
        b.layer([("PULSE_X", (q,)) for q in sorted(patch.logical_z)], "logical")
    if alpha in "+-":
        b.layer([("H", (q,)) for q in data], "basis")
    stab_records = [[] for _ in patch.stabilizers]
    tail = ()
    for cyc in range(cycles + 1):
        for half in HALVES:
            layers, tail_next = round_layers(patch, half, tail)
            for label, ops in layers:
                recs = b.layer(ops, f"c{cyc}{half}:{label}")
                if label == "measure":
                    for s, r in zip(patch.stabilizers_of(half), recs):
                        stab_records[patch.stabilizers.index(s)].append(r)
            tail = tail_next
    b.layer(list(tail), "flush")
    if alpha in "+-":
        b.layer([("H", (q,)) for q in data], "basis")
    recs = b.layer([("MEASURE_Z", (q,)) for q in data], "final")
    c = b.c
    c.meta = {"alpha": alpha, "cycles": cycles, "d_x": patch.d_x, "d_z": patch.d_z,
              "anchor": patch.anchor, "sublattice": patch.sublattice_id,
              "stab_records": stab_records, "final_records": dict(zip(map(str, data), recs)),
              "stab_types": [s.type for s in patch.stabilizers],
              "stab_support": [sorted(s.support) for s in patch.stabilizers],
              "logical_x": sorted(patch.logical_x), "logical_z": sorted(patch.logical_z)}
    return detector_schedule(c) if annotate else c


def _xor(*sets):
    out = set()
    for s in sets:
        out ^= set(s)
    return tuple(sorted(out))


def detector_schedule(c: Circuit) -> Circuit:
    """Attach no-reset detectors and the logical observable."""
    m = c.meta
    if "stab_records" not in m:
        raise CircuitError("detector_schedule needs a circuit built by memory_circuit")
    c = c.copy()
    prev, last = {}, {}
    for r in range(len(c.records)):
        q = c.record_qubit(r)
        prev[r] = last.get(q)
        last[q] = r

    def value(r):  # records whose XOR equals the check value behind record r
        return (r,) if prev[r] is None else (r, prev[r])

    basis = "Z" if m["alpha"] in "01" else "X"
    final = {int(k): v for k, v in m["final_records"].items()}
    dets, info = [], []
    for k, recs in enumerate(m["stab_records"]):
        t = m["stab_types"][k]
        vals = [value(r) for r in recs]
        for cyc, v in enumerate(vals):
            if cyc == 0:
                if t != basis:
                    continue
                dets.append(_xor(v))
            else:
                dets.append(_xor(v, vals[cyc - 1]))
            info.append((k, t, cyc))
        if t == basis:
            dets.append(_xor(vals[-1], [final[q] for q in m["stab_support"][k]]))
            info.append((k, t, len(vals)))
    c.detectors = dets
    c.meta["detector_info"] = info
    lset = m["logical_z"] if basis == "Z" else m["logical_x"]
    c.observables = [{"meas": tuple(sorted(final[q] for q in lset)), "data": tuple(lset), "basis": basis}]
    c.meta["observable_expect"] = [1 if m["alpha"] in "1-" else 0]
    return c


def to_text(c: Circuit) -> str:
    """Line format: `KIND q... @start #dur [!tag]`, TICK closing each layer,
    an optional PULSES section, DETECTOR/OBSERVABLE lines referencing record
    indices, and one META json line."""
    out = []
    in_layer = set()
    for L in c.layers:
        in_layer.update(L)
        for k in L:
            i = c.instructions[k]
            tag = f" !{i.tag}" if i.tag else ""
            out.append(f"{i.kind} {' '.join(map(str, i.qubits))} @{i.start} #{i.duration}{tag}")
        out.append("TICK")
    if c.pulses:
        out.append("PULSES")
    for i in c.pulses:
        out.append(f"{i.kind} {' '.join(map(str, i.qubits))} @{i.start} #{i.duration} !{i.tag or 'dd'}")
    for d in c.detectors:
        out.append("DETECTOR " + " ".join(map(str, d)))
    for k, o in enumerate(c.observables):
        out.append(f"OBSERVABLE {k} " + " ".join(map(str, o["meas"])))
    out.append("META " + json.dumps({"meta": c.meta, "observables": [
        {"data": list(o["data"]), "basis": o["basis"]} for o in c.observables]}, sort_keys=True))
    return "\n".join(out) + "\n"


def from_text(text: str) -> Circuit:
    c = Circuit()
    cur = []
    obs, extra = [], {}
    in_pulses = False
    for line in text.splitlines():
        if not line.strip():
            continue
        head, *rest = line.split(" ", 1)
        body = rest[0] if rest else ""
        if head == "TICK":
            c.layers.append(cur)
            cur = []
        elif head == "PULSES":
            in_pulses = True
        elif head == "DETECTOR":
            c.detectors.append(tuple(int(x) for x in body.split()))
        elif head == "OBSERVABLE":
            k, *ms = body.split()
            obs.append(tuple(int(x) for x in ms))
        elif head == "META":
            extra = json.loads(body)
        elif head in KINDS:
            parts = body.split()
            tag = next((p[1:] for p in parts if p.startswith("!")), "")
            qs = tuple(int(p) for p in parts if p.lstrip("-").isdigit())
            start = int(next(p[1:] for p in parts if p.startswith("@")))
            dur = int(next(p[1:] for p in parts if p.startswith("#")))
            ins = Instruction(head, qs, start, dur, tag)
            if in_pulses:
                c.pulses.append(ins)
                continue
            c.instructions.append(ins)
            cur.append(len(c.instructions) - 1)
            if head == "MEASURE_Z":
                c.records.append(len(c.instructions) - 1)
        else:
            raise CircuitError(f"unparseable line: {line!r}")
    c.meta = extra.get("meta", {})
    for k, ms in enumerate(obs):
        o = extra.get("observables", [{}] * len(obs))[k]
        c.observables.append({"meas": ms, "data": tuple(o.get("data", ())), "basis": o.get("basis", "Z")})
    return c

