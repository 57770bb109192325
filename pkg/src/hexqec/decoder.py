"""Minimum-weight perfect matching over a graphlike detector error model."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .dem import DetectorErrorModel, decompose_graphlike

GOLDEN = (math.sqrt(5) - 1) / 2
SMALL_K = 10  # above this the blossom route is cheaper
TIE_SCALE = 1e-7


class DecodeError(ValueError):
    pass


def tie_weights(dem: DetectorErrorModel) -> np.ndarray:
    """Edge weights with a deterministic perturbation by lexicographic edge
    rank, so distinct corrections never tie."""
    w = np.array([e.weight for e in dem.edges])
    rank = np.arange(1, len(w) + 1)
    return w + TIE_SCALE * ((rank * GOLDEN) % 1.0)


class MatchingDecoder:
    def __init__(self, dem: DetectorErrorModel):
        if not dem.edges:
            dem = decompose_graphlike(dem)
        self.dem = dem
        nd = dem.num_detectors
        self.boundary = nd
        self.weights = tie_weights(dem)
        if np.any(self.weights <= 0):
            raise DecodeError("decoding graph has non-positive edge weights")
        # pre-applied flips from complemented mechanisms
        self.offset_dets = np.zeros(nd, dtype=np.uint8)
        self.offset_mask = 0
        for m in dem.mechanisms:
            if m.complemented:
                self.offset_dets[list(m.dets)] ^= 1
                self.offset_mask ^= m.mask
        rows, cols, vals = [], [], []
        self.edge_mask = {}
        for e, w in zip(dem.edges, self.weights):
            u, v = (e.nodes[0], e.nodes[1]) if len(e.nodes) == 2 else (e.nodes[0], self.boundary)
            key = (min(u, v), max(u, v))
            if key in self.edge_mask:
                raise DecodeError(f"duplicate edge {key}")
            self.edge_mask[key] = (w, e.mask)
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        n = nd + 1
        self.graph = csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.dist, pred = dijkstra(self.graph, directed=False, return_predecessors=True)
        self.path_mask = self._path_masks(pred)
        self._cache = {}

    def _path_masks(self, pred):
        n = pred.shape[0]
        masks = np.zeros((n, n), dtype=np.int64)
        for s in range(n):
            order = np.argsort(self.dist[s])
            for t in order:
                p = pred[s, t]
                if p < 0:
                    continue
                key = (min(p, t), max(p, t))
                masks[s, t] = masks[s, p] ^ self.edge_mask[key][1]
        return masks

    def decode(self, syndrome) -> int:
        syn = np.asarray(syndrome, dtype=np.uint8) ^ self.offset_dets
        flagged = tuple(np.nonzero(syn)[0].tolist())
        hit = self._cache.get(flagged)
        if hit is None:
            hit = self._match(flagged)
            if len(self._cache) < 200000:
                self._cache[flagged] = hit
        return hit ^ self.offset_mask

    def _match(self, flagged) -> int:
        if not flagged:
            return 0
        B = self.boundary
        d = self.dist
        for f in flagged:
            if not np.isfinite(d[f, B]) and not any(np.isfinite(d[f, g]) for g in flagged if g != f):
                raise DecodeError(f"detector {f} cannot be matched")
        if len(flagged) == 1:
            f = flagged[0]
            if not np.isfinite(d[f, B]):
                raise DecodeError(f"detector {f} has no path to the boundary")
            return int(self.path_mask[f, B])
        if len(flagged) <= SMALL_K:
            return self._match_small(flagged)
        return self._match_blossom(flagged)

    def _match_small(self, flagged) -> int:
        """Exact subset DP over pairings; each defect pairs with another or the boundary."""
        B = self.boundary
        k = len(flagged)
        to_b = [float(self.dist[a, B]) for a in flagged]
        dd = self.dist[np.ix_(flagged, flagged)].tolist()
        cost = {0: 0.0}
        pick = {}
        for S in range(1, 1 << k):
            i = (S & -S).bit_length() - 1
            rest = S & ~(1 << i)
            best, choice = to_b[i] + cost[rest], None
            r = rest
            while r:
                j = (r & -r).bit_length() - 1
                r &= r - 1
                c = dd[i][j] + cost[rest & ~(1 << j)]
                if c < best:
                    best, choice = c, j
            cost[S], pick[S] = best, choice
        full = (1 << k) - 1
        if not np.isfinite(cost[full]):
            raise DecodeError(f"no perfect matching for syndrome {flagged}")
        mask, S = 0, full
        while S:
            i = (S & -S).bit_length() - 1
            j = pick[S]
            if j is None:
                mask ^= int(self.path_mask[flagged[i], B])
                S &= ~(1 << i)
            else:
                mask ^= int(self.path_mask[flagged[i], flagged[j]])
                S &= ~((1 << i) | (1 << j))
        return mask

    def _match_blossom(self, flagged) -> int:
        B = self.boundary
        d = self.dist
        G = nx.Graph()
        big = 1.0 + 2 * max(float(np.max(d[np.isfinite(d)])), 1.0) * len(flagged)
        for i, a in enumerate(flagged):
            if np.isfinite(d[a, B]):
                G.add_edge(("d", a), ("b", a), weight=big - d[a, B])
            for b in flagged[i + 1:]:
                if np.isfinite(d[a, b]):
                    G.add_edge(("d", a), ("d", b), weight=big - d[a, b])
                G.add_edge(("b", a), ("b", b), weight=big)
        match = nx.max_weight_matching(G, maxcardinality=True)
        if len(match) * 2 != G.number_of_nodes():
            raise DecodeError(f"no perfect matching for syndrome {flagged}")
        mask = 0
        for u, v in match:
            if u[0] == "b" and v[0] == "b":
                continue
            if u[0] == "b":
                u, v = v, u
            mask ^= int(self.path_mask[u[1], B if v[0] == "b" else v[1]])
        return mask

    def decode_batch(self, det_bits) -> np.ndarray:
        return np.array([self.decode(row) for row in det_bits], dtype=np.int64)


def decode_shot(dem: DetectorErrorModel, syndrome) -> int:
    return MatchingDecoder(dem).decode(syndrome)


def brute_force_decode(dem: DetectorErrorModel, syndrome, method: str = "milp") -> int:
    """Independent oracle: minimum-weight edge subset reproducing the syndrome.

    "exhaustive" enumerates all subsets (tiny graphs only); "milp" solves the
    same parity-constrained problem as a mixed-integer program.
    """
    from scipy.optimize import milp, LinearConstraint, Bounds
    syn = np.asarray(syndrome, dtype=np.uint8)
    edges = dem.edges
    w = tie_weights(dem)
    nd = dem.num_detectors
    if method == "exhaustive":
        best = (math.inf, 0)
        for bits in range(1 << len(edges)):
            s = np.zeros(nd, dtype=np.uint8)
            tot, mask = 0.0, 0
            for k, e in enumerate(edges):
                if bits >> k & 1:
                    s[list(e.nodes)] ^= 1
                    tot += w[k]
                    mask ^= e.mask
            if np.array_equal(s, syn) and tot < best[0]:
                best = (tot, mask)
        if best[0] == math.inf:
            raise DecodeError("infeasible syndrome")
        return best[1]
    ne = len(edges)
    A = np.zeros((nd, ne + nd))
    for k, e in enumerate(edges):
        for n in e.nodes:
            A[n, k] = 1
    A[np.arange(nd), ne + np.arange(nd)] = -2
    c = np.concatenate([w, np.zeros(nd)])
    integrality = np.ones(ne + nd)
    ub = np.concatenate([np.ones(ne), np.full(nd, ne)])
    res = milp(c, constraints=LinearConstraint(A, syn, syn), integrality=integrality,
               bounds=Bounds(np.zeros(ne + nd), ub), options={"mip_rel_gap": 0})
    if not res.success:
        raise DecodeError(f"oracle failed: {res.message}")
    mask = 0
    for k in np.nonzero(res.x[:ne] > 0.5)[0]:
        mask ^= edges[k].mask
    return mask


@dataclass
class DecodeResult:
    predicted: np.ndarray  # per-shot logical mask
    failures: np.ndarray  # per-shot bool

    @classmethod
    def from_shots(cls, decoder: MatchingDecoder, batch) -> "DecodeResult":
        pred = decoder.decode_batch(batch.detector_bits)
        obs = np.zeros(len(pred), dtype=np.int64)
        for i in range(batch.observable_bits.shape[1]):
            obs |= batch.observable_bits[:, i].astype(np.int64) << i
        return cls(pred, (pred ^ obs) != 0)


SERIES_FIELDS = ["N", "alpha", "p", "shots", "sigma", "dd_arm", "patch"]


@dataclass(frozen=True)
class SeriesEntry:
    N: int
    alpha: str
    p: float
    shots: int
    sigma: float
    dd_arm: str = "DD"
    patch: str = "(3,3)"


def estimate_series(results) -> list:
    """results: iterable of dicts with N, alpha, failures (count), shots and
    optional dd_arm/patch."""
    out = []
    for r in results:
        shots = int(r["shots"])
        if shots < 1:
            raise ValueError("shots must be >= 1")
        fails = int(r["failures"])
        p = fails / shots
        out.append(SeriesEntry(int(r["N"]), str(r["alpha"]), p, shots,
                               math.sqrt(p * (1 - p) / shots),
                               r.get("dd_arm", "DD"), r.get("patch", "(3,3)")))
    return sorted(out, key=lambda e: (e.patch, e.dd_arm, e.alpha, e.N))


def write_series(entries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_FIELDS)
        for e in entries:
            w.writerow([e.N, e.alpha, repr(e.p), e.shots, repr(e.sigma), e.dd_arm, e.patch])


def read_series(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [SeriesEntry(int(r["N"]), r["alpha"], float(r["p"]), int(r["shots"]),
                        float(r["sigma"]), r.get("dd_arm") or "DD", r.get("patch") or "")
            for r in rows]
