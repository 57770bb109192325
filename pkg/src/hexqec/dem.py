"""Detector error models from exhaustive single-fault propagation."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .noise import NoisyCircuit
from .pauliframe import propagate_faults, _mask

import numpy as np


class DemError(ValueError):
    pass


def xor_prob(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent flips fires."""
    return p1 + p2 - 2 * p1 * p2


@dataclass(frozen=True)
class Mechanism:
    dets: tuple  # sorted detector ids
    mask: int  # logical observable bitmask
    p: float
    complemented: bool = False  # p was > 1/2 and has been replaced by 1-p

    @property
    def undetectable(self) -> bool:
        return not self.dets and self.mask != 0


@dataclass(frozen=True)
class Edge:
    nodes: tuple  # one detector (boundary edge) or two detectors
    mask: int
    p: float

    @property
    def weight(self) -> float:
        return math.log((1 - self.p) / self.p)


@dataclass
class DetectorErrorModel:
    num_detectors: int
    num_observables: int
    mechanisms: list
    edges: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = []
        for m in self.mechanisms:
            toks = [f"D{d}" for d in m.dets] + [f"L{i}" for i in range(self.num_observables) if m.mask >> i & 1]
            lines.append(f"error({m.p:.12g}) " + " ".join(toks))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, num_detectors: int, num_observables: int) -> "DetectorErrorModel":
        mechs = []
        for line in text.splitlines():
            mt = re.match(r"error\(([^)]*)\)(.*)", line.strip())
            if not mt:
                continue
            toks = mt.group(2).split()
            dets = tuple(sorted(int(t[1:]) for t in toks if t[0] == "D"))
            mask = sum(1 << int(t[1:]) for t in toks if t[0] == "L")
            mechs.append(Mechanism(dets, mask, float(mt.group(1))))
        return cls(num_detectors, num_observables, mechs)

    def detector_probabilities(self):
        """Marginal flip probability of every detector under independent mechanisms."""
        prod = np.ones(self.num_detectors)
        for m in self.mechanisms:
            for d in m.dets:
                prod[d] *= 1 - 2 * m.p
        return (1 - prod) / 2


def enumerate_faults(nc: NoisyCircuit):
    """All (channel, term index, probability) elementary faults."""
    out = []
    for k, ch in enumerate(nc.channels):
        for t, (name, p) in enumerate(ch.terms):
            if p > 0:
                out.append((k, t, p))
    return out


def merge_mechanisms(items) -> list:
    """Merge (dets, mask, p) triples that share a symptom, XOR-composing p."""
    acc = {}
    for dets, mask, p in items:
        key = (tuple(sorted(dets)), mask)
        acc[key] = xor_prob(acc[key], p) if key in acc else p
    out = []
    for (dets, mask), p in sorted(acc.items()):
        if p > 0.5:
            out.append(Mechanism(dets, mask, 1 - p, True))
        elif p > 0:
            out.append(Mechanism(dets, mask, p))
    return out


def build_dem(nc: NoisyCircuit) -> DetectorErrorModel:
    faults = enumerate_faults(nc)
    nd, no = len(nc.base.detectors), len(nc.base.observables)
    if not faults:
        return DetectorErrorModel(nd, no, [])
    d, o = propagate_faults(nc, [[(k, t)] for k, t, _ in faults])
    items = []
    for row, (_, _, p) in enumerate(faults):
        dets = tuple(np.nonzero(d[row])[0].tolist())
        mask = _mask(o[row])
        if dets or mask:
            items.append((dets, mask, p))
    dem = DetectorErrorModel(nd, no, merge_mechanisms(items))
    for m in dem.mechanisms:
        if m.undetectable:
            dem.flags.append(f"undetectable logical error with p={m.p:.3g}, mask={m.mask}")
    return dem


def _partitions(dets, shapes, depth=0):
    """Partitions of `dets` into parts of size <= 2 that are existing shapes."""
    if not dets:
        yield []
        return
    first, rest = dets[0], dets[1:]
    for j, other in enumerate(rest):
        pair = (first, other)
        if pair in shapes:
            for tail in _partitions(rest[:j] + rest[j + 1:], shapes, depth + 1):
                yield [pair] + tail
    if (first,) in shapes:
        for tail in _partitions(rest, shapes, depth + 1):
            yield [(first,)] + tail


def decompose_graphlike(dem: DetectorErrorModel) -> DetectorErrorModel:
    """Split every mechanism into edges touching at most two detectors."""
    shape_mask = {}
    for m in sorted(dem.mechanisms, key=lambda m: (-m.p, m.dets, m.mask)):
        if 1 <= len(m.dets) <= 2 and m.dets not in shape_mask:
            shape_mask[m.dets] = m.mask
    parts = []
    for m in dem.mechanisms:
        if m.complemented:
            raise DemError(f"complemented mechanism {m.dets} must be pre-applied, not matched")
        if not m.dets:
            continue
        if len(m.dets) <= 2:
            parts.append((m.dets, m.mask, m.p))
            continue
        best = None
        for cand in _partitions(list(m.dets), shape_mask):
            masks = 0
            for c in cand:
                masks ^= shape_mask[c]
            if masks == m.mask:
                best = cand
                break
            if best is None:
                best = cand
        if best is None:
            raise DemError(f"no graphlike split for symptom {m.dets}")
        masks = [shape_mask[c] for c in best]
        total = 0
        for x in masks:
            total ^= x
        masks[0] ^= total ^ m.mask  # keep the XOR of component masks exact
        parts.extend((c, mk, m.p) for c, mk in zip(best, masks))
    edges = {}
    for nodes, mask, p in parts:
        if nodes in edges:
            q, mk = edges[nodes]
            edges[nodes] = (xor_prob(q, p), mk if q >= p else mask)
        else:
            edges[nodes] = (p, mask)
    out = DetectorErrorModel(dem.num_detectors, dem.num_observables, list(dem.mechanisms),
                             flags=list(dem.flags))
    for nodes, (p, mask) in sorted(edges.items()):
        if p >= 0.5:
            out.flags.append(f"edge {nodes} has p={p:.3g} >= 1/2; clipped")
            p = 0.5 - 1e-12
        out.edges.append(Edge(nodes, mask, p))
    return out
