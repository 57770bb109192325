"""Dynamical-decoupling library, idle-gap discovery and greedy gap filling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, Instruction

PULSE_WIDTH = 8  # dt; a 32 ns pi pulse
T_GRID = tuple(range(1, 13))


@dataclass(frozen=True)
class DDSequence:
    name: str
    pulses: tuple  # ((axis, phase), ...): pi rotations about cos(phase) X + sin(phase) Y
    length: int | None = None  # fixed duration in dt, overriding pulse count * width

    def length_dt(self, pulse_width: int = PULSE_WIDTH) -> int:
        return self.length if self.length is not None else len(self.pulses) * pulse_width

    def unitary(self) -> np.ndarray:
        X = np.array([[0, 1], [1, 0]], dtype=complex)
        Y = np.array([[0, -1j], [1j, 0]])
        U = np.eye(2, dtype=complex)
        for _, ph in self.pulses:
            U = (-1j * (math.cos(ph) * X + math.sin(ph) * Y)) @ U
        return U


def ur_phases(n: int) -> list:
    """Universally robust sequence phases for even n >= 4."""
    if n < 4 or n % 2:
        raise ValueError("UR sequences need an even number of pulses >= 4")
    if n % 4 == 0:
        big = math.pi / (n // 4)
    else:
        m = (n - 2) // 4
        big = 2 * m * math.pi / (2 * m + 1)
    return [((k - 1) * (k - 2) / 2 * big) % (2 * math.pi) for k in range(1, n + 1)]


def _seq(name, phases, length=None):
    return DDSequence(name, tuple(("X", p) for p in phases), length)


def library() -> list:
    """The nine sequences in canonical order."""
    seqs = [_seq(f"UR{n}", ur_phases(n)) for n in range(6, 19, 2)]
    h = math.pi / 2
    seqs.append(_seq("XY4", [0, h, 0, h]))
    seqs.append(_seq("RGA8a", [math.pi, h, math.pi, h, h, math.pi, h, math.pi]))
    return seqs


def get_sequence(name: str) -> DDSequence:
    for s in library():
        if s.name == name:
            return s
    raise KeyError(f"unknown DD sequence {name}")


@dataclass(frozen=True)
class Gap:
    qubit: int
    start: int
    duration: int


@dataclass
class DDStrategy:
    passes: list = field(default_factory=list)  # [(name, T)]
    assignment: dict = field(default_factory=dict)  # (qubit, start) -> name

    def to_json(self) -> str:
        return json.dumps({"passes": [list(p) for p in self.passes],
                           "assignment": [[q, s, n] for (q, s), n in sorted(self.assignment.items())]},
                          indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DDStrategy":
        d = json.loads(text)
        return cls([tuple(p) for p in d["passes"]], {(q, s): n for q, s, n in d["assignment"]})


def find_gaps(c: Circuit) -> list:
    """Maximal idle intervals between consecutive operations of each qubit."""
    busy = {}
    for L in c.layers:
        for k in L:
            ins = c.instructions[k]
            for q in ins.qubits:
                busy.setdefault(q, []).append((ins.start, ins.end))
    gaps = []
    for q in sorted(busy):
        iv = sorted(busy[q])
        end = iv[0][1]
        for s, e in iv[1:]:
            if s > end:
                gaps.append(Gap(q, end, s - end))
            end = max(end, e)
    return gaps


def sweep(c: Circuit, s: DDSequence, T: int, pulse_width: int = PULSE_WIDTH) -> Circuit:
    """Put one evenly spaced instance of s into every empty gap with L(s) <= G/T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    L = s.length_dt(pulse_width)
    filled = {(g[0], g[1]) for g in c.meta.get("dd_gaps", [])}
    todo = [g for g in find_gaps(c) if (g.qubit, g.start) not in filled and L * T <= g.duration]
    n = len(s.pulses)
    todo = [g for g in todo if n * pulse_width <= g.duration]
    if not todo:
        return c
    out = c.copy()
    gaps_meta = out.meta.setdefault("dd_gaps", [])
    for g in todo:
        tau = (g.duration - n * pulse_width) / n
        for k, (axis, ph) in enumerate(s.pulses):
            t0 = g.start + int(round(tau / 2 + k * (tau + pulse_width)))
            kind = "PULSE_Y" if abs(math.sin(ph)) > abs(math.cos(ph)) else "PULSE_X"
            out.pulses.append(Instruction(kind, (g.qubit,), t0, pulse_width, f"dd:{s.name}:{ph:.6f}"))
        gaps_meta.append([g.qubit, g.start, g.duration, n, s.name])
    out.pulses.sort(key=lambda i: (i.start, i.qubits))
    return out


def pulse_count(c: Circuit) -> int:
    return len(c.pulses)


def optimize_dd(c0: Circuit, evaluator, seqs=None, t_grid=T_GRID, pulse_width: int = PULSE_WIDTH,
                max_passes: int = 100):
    """Greedy pass loop: each round tries every (sequence, T) sweep on the
    current circuit and keeps the best one if it strictly improves."""
    seqs = library() if seqs is None else list(seqs)
    cur = c0
    best = float(evaluator(c0))
    strat = DDStrategy()
    trace = [best]
    for _ in range(max_passes):
        cand = None
        seen = {}
        for s in seqs:
            for T in t_grid:
                c = sweep(cur, s, T, pulse_width)
                if c is cur:
                    continue
                key = tuple(tuple(g) for g in c.meta["dd_gaps"])
                if key not in seen:
                    seen[key] = float(evaluator(c))
                v = seen[key]
                if v < best and (cand is None or v < cand[0]):
                    cand = (v, s.name, T, c)
        if cand is None:
            break
        best, name, T, cur = cand
        strat.passes.append((name, T))
        trace.append(best)
    for q, start, _, _, name in cur.meta.get("dd_gaps", []):
        strat.assignment[(q, start)] = name
    cur = cur.copy()
    cur.meta["dd_trace"] = trace
    cur.meta["dd_passes"] = [list(p) for p in strat.passes]
    return cur, strat


def apply_strategy(c: Circuit, strat: DDStrategy, pulse_width: int = PULSE_WIDTH) -> Circuit:
    """Replay a strategy's passes on a circuit."""
    out = c
    for name, T in strat.passes:
        out = sweep(out, get_sequence(name), T, pulse_width)
    return out
