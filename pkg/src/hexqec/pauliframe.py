"""Vectorized Pauli-frame sampling of detector and observable bits."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .noise import NoisyCircuit
from .tableau import run_tableau

CHUNK = 4096
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class FrameError(ValueError):
    pass


@dataclass
class ShotBatch:
    detector_bits: np.ndarray  # shots x detectors, uint8
    observable_bits: np.ndarray  # shots x observables, uint8
    seed: int
    shot_count: int
    circuit_hash: str = ""

    def save(self, path):
        header = json.dumps({"shots": self.shot_count, "detectors": self.detector_bits.shape[1],
                             "observables": self.observable_bits.shape[1], "seed": self.seed,
                             "circuit": self.circuit_hash}).encode()
        body = np.packbits(np.hstack([self.detector_bits, self.observable_bits]), axis=1)
        with open(path, "wb") as fh:
            fh.write(len(header).to_bytes(4, "little") + header + body.tobytes())

    @classmethod
    def load(cls, path) -> "ShotBatch":
        with open(path, "rb") as fh:
            raw = fh.read()
        n = int.from_bytes(raw[:4], "little")
        h = json.loads(raw[4:4 + n])
        width = h["detectors"] + h["observables"]
        body = np.frombuffer(raw[4 + n:], dtype=np.uint8).reshape(h["shots"], -1)
        bits = np.unpackbits(body, axis=1)[:, :width]
        return cls(bits[:, :h["detectors"]].copy(), bits[:, h["detectors"]:].copy(),
                   h["seed"], h["shots"], h["circuit"])


class _Program:
    """NoisyCircuit compiled to per-layer vector steps over dense qubit indices."""

    def __init__(self, nc: NoisyCircuit):
        c = nc.base
        self.nc = nc
        self.qubits = c.qubits
        self.idx = {q: i for i, q in enumerate(self.qubits)}
        self.n = len(self.qubits)
        self.n_rec = len(c.records)
        rec_of = {k: r for r, k in enumerate(c.records)}
        layer_of_instr = {k: li for li, L in enumerate(c.layers) for k in L}
        steps = []  # list of (phase order key, step)
        groups = {}
        for pos, (typ, k) in enumerate(nc.events):
            if typ == "g":
                ins = c.instructions[k]
                li = layer_of_instr[k]
                kind = ins.kind
                if kind in ("PULSE_X", "PULSE_Y", "PREP_Z"):
                    continue  # Pauli gates leave frames unchanged; prep is the initial state
                key = (li, 1, kind)
                groups.setdefault(key, []).append((k, ins, rec_of.get(k)))
            else:
                ch = nc.channels[k]
                phase = 0 if ch.kind == "MEAS_FLIP" else (2 if ch.kind in ("DEP2", "CLASSICAL") else 3)
                key = (ch.layer, phase, ch.kind if ch.kind != "DEP1" else "IDLE_PAULI")
                groups.setdefault(key, []).append((k, ch, None))
        for key in sorted(groups, key=lambda t: (t[0], t[1], t[2])):
            li, phase, kind = key
            items = groups[key]
            if phase == 1:
                a = np.array([self.idx[i.qubits[0]] for _, i, _ in items])
                if kind in ("CNOT", "CZ"):
                    b = np.array([self.idx[i.qubits[1]] for _, i, _ in items])
                    steps.append((kind, a, b))
                elif kind == "H":
                    steps.append(("H", a, None))
                elif kind == "MEASURE_Z":
                    steps.append(("M", a, np.array([r for _, _, r in items])))
                else:
                    raise FrameError(f"unsupported instruction {kind}")
            else:
                steps.append(("CH", kind, self._channel_step(kind, [k for k, _, _ in items])))
        self.steps = steps
        det = np.zeros((self.n_rec, len(c.detectors)), dtype=np.uint8)
        for j, d in enumerate(c.detectors):
            det[list(d), j] ^= 1
        obs = np.zeros((self.n_rec, len(c.observables)), dtype=np.uint8)
        for j, o in enumerate(c.observables):
            obs[list(o["meas"]), j] ^= 1
        self.det_matrix, self.obs_matrix = det, obs

    def _channel_step(self, kind, ids):
        chans = [self.nc.channels[k] for k in ids]
        st = {"ids": np.array(ids), "col": {k: j for j, k in enumerate(ids)}}
        if kind == "CLASSICAL":
            st["rec"] = np.array([c.record for c in chans])
            st["p"] = np.array([c.terms[0][1] for c in chans])
            return st
        width = len(chans[0].qubits)
        st["q"] = np.array([[self.idx[q] for q in c.qubits] for c in chans])
        nterm = max(len(c.terms) for c in chans)
        probs = np.zeros((len(chans), nterm))
        bits = np.zeros((len(chans), nterm, width, 2), dtype=np.uint8)
        for j, c in enumerate(chans):
            for t, (s, p) in enumerate(c.terms):
                probs[j, t] = p
                for w, ch in enumerate(s):
                    bits[j, t, w] = _BITS[ch]
        st["cum"] = np.cumsum(probs, axis=1)
        st["bits"] = bits
        return st

    # -- execution ---------------------------------------------------------
    def run(self, shots: int, rng=None, inject=None):
        """Propagate frames. `inject` is a list (per row) of [(channel, term)]."""
        x = np.zeros((shots, self.n), dtype=np.uint8)
        z = np.zeros((shots, self.n), dtype=np.uint8)
        rec = np.zeros((shots, self.n_rec), dtype=np.uint8)
        inj = None
        if inject is not None:
            inj = {}
            for row, faults in enumerate(inject):
                for ch, term in faults:
                    inj.setdefault(ch, []).append((row, term))
        for step in self.steps:
            op = step[0]
            if op == "CNOT":
                a, b = step[1], step[2]
                x[:, b] ^= x[:, a]
                z[:, a] ^= z[:, b]
            elif op == "CZ":
                a, b = step[1], step[2]
                z[:, a] ^= x[:, b]
                z[:, b] ^= x[:, a]
            elif op == "H":
                a = step[1]
                x[:, a], z[:, a] = z[:, a].copy(), x[:, a].copy()
            elif op == "M":
                rec[:, step[2]] = x[:, step[1]]
            else:
                self._apply_channel(step[1], step[2], x, z, rec, rng, inj)
        return rec

    def _apply_channel(self, kind, st, x, z, rec, rng, inj):
        shots = x.shape[0]
        if inj is not None:
            rows, cols, terms = [], [], []
            for ch in st["ids"]:
                for row, term in inj.get(int(ch), ()):
                    rows.append(row)
                    cols.append(st["col"][int(ch)])
                    terms.append(term)
            if not rows:
                return
            rows, cols, terms = np.array(rows), np.array(cols), np.array(terms)
        else:
            k = len(st["ids"])
            u = rng.random((shots, k))
            if kind == "CLASSICAL":
                hit = u < st["p"][None, :]
                rows, cols = np.nonzero(hit)
                terms = np.zeros(len(rows), dtype=int)
            else:
                cum = st["cum"]
                hit = u < cum[None, :, -1]
                rows, cols = np.nonzero(hit)
                uu = u[rows, cols]
                terms = (uu[:, None] >= cum[cols]).sum(axis=1)
        if kind == "CLASSICAL":
            np.bitwise_xor.at(rec, (rows, st["rec"][cols]), 1)
            return
        qs = st["q"][cols]
        b = st["bits"][cols, terms]  # (hits, width, 2)
        for w in range(qs.shape[1]):
            np.bitwise_xor.at(x, (rows, qs[:, w]), b[:, w, 0])
            np.bitwise_xor.at(z, (rows, qs[:, w]), b[:, w, 1])

    def symptoms(self, rec):
        d = (rec.astype(np.int64) @ self.det_matrix) % 2
        o = (rec.astype(np.int64) @ self.obs_matrix) % 2
        return d.astype(np.uint8), o.astype(np.uint8)


_CACHE = {}


def compile_program(nc: NoisyCircuit) -> _Program:
    key = id(nc)
    prog = _CACHE.get(key)
    if prog is None or prog.nc is not nc:
        prog = _Program(nc)
        _CACHE.clear()
        _CACHE[key] = prog
    return prog


def sample_shots(nc: NoisyCircuit, shots: int, seed: int = 0) -> ShotBatch:
    """Sample detector/observable flips. Shots are drawn in fixed-size chunks,
    each with its own stream keyed by (seed, chunk index)."""
    if shots < 1:
        raise FrameError("shots must be >= 1")
    prog = compile_program(nc)
    dets, obs = [], []
    for ci, start in enumerate(range(0, shots, CHUNK)):
        n = min(CHUNK, shots - start)
        rng = np.random.default_rng([seed, ci])
        rec = prog.run(n, rng)
        d, o = prog.symptoms(rec)
        dets.append(d)
        obs.append(o)
    return ShotBatch(np.vstack(dets), np.vstack(obs), seed, shots, nc.base.digest())


def propagate_fault(nc: NoisyCircuit, location: int, term) -> tuple:
    """Detector set and logical mask of one fault: channel index and term
    (index into the channel's terms, or its Pauli string / "FLIP")."""
    if not 0 <= location < len(nc.channels):
        raise FrameError(f"unknown fault location {location}")
    ch = nc.channels[location]
    if isinstance(term, str):
        if set(term) <= {"I"}:
            return frozenset(), 0
        names = [s for s, _ in ch.terms]
        if term not in names:
            raise FrameError(f"term {term} not in channel {location}")
        term = names.index(term)
    d, o = propagate_faults(nc, [[(location, term)]])
    return frozenset(np.nonzero(d[0])[0].tolist()), _mask(o[0])


def propagate_faults(nc: NoisyCircuit, rows) -> tuple:
    """Batch version: rows is a list of fault lists; returns (det bits, obs bits)."""
    prog = compile_program(nc)
    out_d, out_o = [], []
    for start in range(0, len(rows), CHUNK):
        part = rows[start:start + CHUNK]
        rec = prog.run(len(part), inject=part)
        d, o = prog.symptoms(rec)
        out_d.append(d)
        out_o.append(o)
    if not out_d:
        return (np.zeros((0, len(nc.base.detectors)), np.uint8),
                np.zeros((0, len(nc.base.observables)), np.uint8))
    return np.vstack(out_d), np.vstack(out_o)


def _mask(bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


def reference_records(circuit, seed: int = 0) -> np.ndarray:
    """Noiseless measurement record from the tableau simulator."""
    return run_tableau(circuit, np.random.default_rng(seed))
