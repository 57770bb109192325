"""Heavy-hex device graphs and embedded surface-code patches.

Device nodes sit on integer coordinates (x, y). Even y are qubit rows, odd y
are connector bands holding one qubit per vertical link. Connectors in band b
sit at x = phase + 2b (mod 4), so every row node has degree <= 3.

Patch geometry: data qubit (i, j) of a d_x-by-d_z grid sits on a degree-3 row
node; the row node between horizontal neighbours is the fold bridge and the
connector below/above a data qubit is the check ancilla of the weight-2
operator left after folding. The orientation (sx, sy) mirrors the patch.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

HALVES = ("A", "B")


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceGraph:
    coords: dict  # id -> (x, y)
    edges: frozenset  # frozenset of (u, v) with u < v
    name: str = "heavy-hex"

    def __post_init__(self):
        object.__setattr__(self, "_at", {c: q for q, c in self.coords.items()})
        adj = {q: set() for q in self.coords}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_adj", {q: frozenset(n) for q, n in adj.items()})

    @property
    def qubits(self) -> list:
        return sorted(self.coords)

    def __len__(self):
        return len(self.coords)

    def __contains__(self, q):
        return q in self.coords

    def at(self, x, y):
        return self._at.get((x, y))

    def neighbors(self, q):
        return self._adj[q]

    def degree(self, q) -> int:
        return len(self._adj[q])

    def has_edge(self, u, v) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def is_connected(self) -> bool:
        if not self.coords:
            return False
        start = next(iter(self.coords))
        seen, stack = {start}, [start]
        while stack:
            for n in self._adj[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return len(seen) == len(self.coords)

    def to_json(self) -> dict:
        return {"name": self.name,
                "nodes": [{"id": q, "x": x, "y": y} for q, (x, y) in sorted(self.coords.items())],
                "edges": sorted([list(e) for e in self.edges])}

    @classmethod
    def from_json(cls, d: dict) -> "DeviceGraph":
        coords = {n["id"]: (n["x"], n["y"]) for n in d["nodes"]}
        return cls(coords, frozenset(tuple(sorted(e)) for e in d["edges"]), d.get("name", "heavy-hex"))


def build_device_graph(n_rows: int, row_length: int, phase: int = 3, name: str = "heavy-hex") -> DeviceGraph:
    """Rows of `row_length` qubits joined by connector bands."""
    if n_rows < 1 or row_length < 1:
        raise LayoutError(f"grid sizes must be positive, got rows={n_rows}, length={row_length}")
    pts = [(x, 2 * k) for k in range(n_rows) for x in range(row_length)]
    for b in range(n_rows - 1):
        pts += [(x, 2 * b + 1) for x in range(row_length) if x % 4 == (phase + 2 * b) % 4]
    pts.sort(key=lambda p: (p[1], p[0]))
    coords = dict(enumerate(pts))
    at = {c: q for q, c in coords.items()}
    edges = set()
    for q, (x, y) in coords.items():
        if y % 2 == 0 and (x + 1, y) in at:
            edges.add((q, at[(x + 1, y)]))
        elif y % 2 == 1:
            edges.add((at[(x, y - 1)], q))
            edges.add((q, at[(x, y + 1)]))
    edges = frozenset(tuple(sorted(e)) for e in edges)
    g = DeviceGraph(coords, edges, name)
    if not g.is_connected():
        raise LayoutError("grid parameters give a disconnected graph")
    return g


def heron() -> DeviceGraph:
    """156-qubit preset: 8 rows of 16 with 7 bands of 4 connectors."""
    return build_device_graph(8, 16, phase=3, name="heron")


def hex_cells(rows: int, cols: int) -> DeviceGraph:
    """Heavy-hex graph spanning `rows` x `cols` hexagon cells."""
    if rows < 1 or cols < 1:
        raise LayoutError(f"cell counts must be positive, got {rows}x{cols}")
    return build_device_graph(rows + 1, 4 * cols + 1, phase=0, name=f"hex{rows}x{cols}")


@dataclass(frozen=True)
class Stabilizer:
    type: str  # "X" or "Z"
    support: frozenset
    ancilla: int
    half: str  # round in which it is measured
    readout: tuple  # data qubits carrying the folded operator
    bridges: tuple = ()  # relay qubits between readout data and ancilla
    label: tuple = ()  # plaquette anchor (i, j) in patch coordinates

    @property
    def bridge(self):
        return min(self.bridges) if self.bridges else None


@dataclass
class CodePatch:
    d_x: int
    d_z: int
    device: DeviceGraph
    data: dict  # (i, j) -> qubit id
    stabilizers: list
    fold_pairs: dict  # half -> list of (control, bridge, target)
    logical_x: frozenset
    logical_z: frozenset
    orientation: tuple = (1, 1)
    sublattice_id: str | None = None

    @property
    def data_qubits(self) -> frozenset:
        return frozenset(self.data.values())

    @property
    def check_ancillas(self) -> frozenset:
        return frozenset(s.ancilla for s in self.stabilizers)

    @property
    def bridge_qubits(self) -> frozenset:
        out = {m for h in HALVES for _, m, _ in self.fold_pairs[h]}
        for s in self.stabilizers:
            out.update(s.bridges)
        return frozenset(out)

    @property
    def qubits(self) -> frozenset:
        return self.data_qubits | self.check_ancillas | self.bridge_qubits

    @property
    def anchor(self) -> int:
        return self.data[(0, 0)]

    def stabilizers_of(self, half: str) -> list:
        return [s for s in self.stabilizers if s.half == half]

    def role(self, q) -> str:
        if q in self.data_qubits:
            return "data"
        if q in self.check_ancillas:
            return "check"
        if q in self.bridge_qubits:
            return "bridge"
        return "unused"

    def to_json(self) -> dict:
        dev = self.device.to_json()
        for n in dev["nodes"]:
            n["role"] = self.role(n["id"])
        dev["patch"] = {
            "d_x": self.d_x, "d_z": self.d_z, "anchor": self.anchor,
            "orientation": list(self.orientation), "sublattice_id": self.sublattice_id,
            "logical_x": sorted(self.logical_x), "logical_z": sorted(self.logical_z),
            "stabilizers": [{"type": s.type, "support": sorted(s.support), "ancilla": s.ancilla,
                             "bridge": s.bridge, "bridges": list(s.bridges), "half": s.half}
                            for s in self.stabilizers],
        }
        return dev

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def load_patch(path) -> CodePatch:
    with open(path) as fh:
        d = json.load(fh)
    g = DeviceGraph.from_json(d)
    p = d["patch"]
    return carve_patch(g, p["d_x"], p["d_z"], p["anchor"], tuple(p["orientation"]),
                       sublattice_id=p.get("sublattice_id"))


def _odd(d, name):
    if not isinstance(d, int) or d < 3 or d % 2 == 0:
        raise LayoutError(f"{name} must be an odd integer >= 3, got {d}")


def carve_patch(g: DeviceGraph, d_x: int, d_z: int, anchor: int | None = None,
                orientation: tuple = (1, 1), sublattice_id: str | None = None) -> CodePatch:
    """Embed a (d_x, d_z) patch with data (0, 0) on `anchor`.

    d_x rows by d_z columns of data; X_L runs down column 0, Z_L along row 0.
    """
    _odd(d_x, "d_x")
    _odd(d_z, "d_z")
    if anchor is None:
        return _first_fit(g, d_x, d_z, orientation, sublattice_id)
    if anchor not in g:
        raise LayoutError(f"anchor {anchor} is not a device qubit")
    sx, sy = orientation
    if sx not in (1, -1) or sy not in (1, -1):
        raise LayoutError(f"orientation must be (+-1, +-1), got {orientation}")
    R, C = d_x, d_z
    x0, y0 = g.coords[anchor]

    def xy(i, j):
        return (x0 + 2 * sx * j, y0 + 2 * sy * i)

    def need(c):
        q = g.at(*c)
        if q is None:
            raise LayoutError(f"footprint exceeds device: missing qubit at (x={c[0]}, y={c[1]})")
        return q

    def vmid(i, j):  # connector between rows i and i+1 of column j
        x, y = xy(i, j)
        return need((x, y + sy))

    def hmid(i, j):  # row node between columns j and j+1 of row i
        x, y = xy(i, j)
        return need((x + sx, y))

    data = {(i, j): need(xy(i, j)) for i in range(R) for j in range(C)}
    fold = {h: [] for h in HALVES}
    for i in range(R):
        for j in range(C - 1):
            fold["A" if j % 2 == 0 else "B"].append((data[(i, j)], hmid(i, j), data[(i, j + 1)]))

    stabs = []

    def add(t, cells, anc, half, readout, bridges=(), label=()):
        sup = frozenset(data[c] for c in cells)
        stabs.append(Stabilizer(t, sup, anc, half, tuple(data[c] for c in readout), tuple(bridges), label))

    for i in range(-1, R):
        for j in range(-1, C):
            cells = [(a, b) for a in (i, i + 1) for b in (j, j + 1) if 0 <= a < R and 0 <= b < C]
            t = "X" if (i + j) % 2 == 0 else "Z"
            bulk = 0 <= i < R - 1 and 0 <= j < C - 1
            if bulk:
                half = "A" if j % 2 == 0 else "B"
                if t == "Z":  # folds onto the right column
                    add(t, cells, vmid(i, j + 1), half, [(i, j + 1), (i + 1, j + 1)], label=(i, j))
                else:  # folds onto the left column
                    add(t, cells, vmid(i, j), half, [(i, j), (i + 1, j)], label=(i, j))
            elif len(cells) == 2 and t == "X" and i == -1:
                add(t, cells, vmid(-1, j), "B", [(0, j)], label=(i, j))
            elif len(cells) == 2 and t == "X" and i == R - 1:
                add(t, cells, vmid(R - 1, j), "A", [(R - 1, j)], label=(i, j))
            elif len(cells) == 2 and t == "Z" and j == -1:
                add(t, cells, vmid(i, 0), "B", [(i, 0), (i + 1, 0)], label=(i, j))
            elif len(cells) == 2 and t == "Z" and j == C - 1:
                # hexagon path through the column beyond the patch edge
                xa, ya = xy(i, C - 1)
                xb, yb = xy(i + 1, C - 1)
                hi, hj = need((xa + sx, ya)), need((xb + sx, yb))
                vi, vj = need((xa + 2 * sx, ya)), need((xb + 2 * sx, yb))
                anc = need((xa + 2 * sx, ya + sy))
                add(t, cells, anc, "A", [(i, C - 1), (i + 1, C - 1)], (hi, vi, vj, hj), label=(i, j))
    patch = CodePatch(d_x, d_z, g, data, stabs, fold,
                      frozenset(data[(i, 0)] for i in range(R)),
                      frozenset(data[(0, j)] for j in range(C)),
                      (sx, sy), sublattice_id)
    _check_edges(patch)
    return patch


def _check_edges(p: CodePatch):
    g = p.device
    for h in HALVES:
        for c, m, t in p.fold_pairs[h]:
            if not (g.has_edge(c, m) and g.has_edge(m, t)):
                raise LayoutError(f"fold pair {c}-{m}-{t} is not a device path")
    for s in p.stabilizers:
        if s.bridges:  # readout0 - h - V - anc - V - h - readout1
            path = (s.readout[0],) + s.bridges[:2] + (s.ancilla,) + s.bridges[2:] + (s.readout[1],)
            ok = all(g.has_edge(u, v) for u, v in zip(path, path[1:]))
        else:
            ok = all(g.has_edge(r, s.ancilla) for r in s.readout)
        if not ok:
            raise LayoutError(f"stabilizer {s.label} readout is not wired to ancilla {s.ancilla}")
    roles = [p.data_qubits, p.check_ancillas, p.bridge_qubits]
    for a, b in itertools.combinations(roles, 2):
        if a & b:
            raise LayoutError(f"qubit roles overlap: {sorted(a & b)}")
    for h in HALVES:
        used = [s.ancilla for s in p.stabilizers_of(h)]
        used += [q for s in p.stabilizers_of(h) for q in s.bridges]
        used += [m for _, m, _ in p.fold_pairs[h]]
        if len(used) != len(set(used)):
            raise LayoutError(f"round {h} uses an ancilla or bridge twice")


def _first_fit(g, d_x, d_z, orientation, sublattice_id):
    first_err = None
    for q in g.qubits:
        try:
            return carve_patch(g, d_x, d_z, q, orientation, sublattice_id)
        except LayoutError as e:
            if first_err is None:
                first_err = e
    raise LayoutError(f"no ({d_x},{d_z}) embedding fits on {g.name}: {first_err}")


def sublattices_of(parent: CodePatch) -> list:
    """The three (3,3) sub-embeddings of a (3,5) or (5,3) patch."""
    shape = (parent.d_x, parent.d_z)
    if shape not in ((3, 5), (5, 3)):
        raise LayoutError(f"sublattices are defined for (3,5) and (5,3) parents, got {shape}")
    g = parent.device
    psx, psy = parent.orientation
    allowed = parent.qubits
    out = []
    for k in range(3):
        i0, j0 = (0, k) if shape == (3, 5) else (k, 0)
        found = None
        for fx, fy in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            corner = (i0 + (2 if fy < 0 else 0), j0 + (2 if fx < 0 else 0))
            try:
                sub = carve_patch(g, 3, 3, parent.data[corner], (psx * fx, psy * fy),
                                  sublattice_id=f"s{k + 1}")
            except LayoutError:
                continue
            if sub.qubits <= allowed:
                found = sub
                break
        if found is None:
            raise LayoutError(f"sublattice at offset {k} does not fit inside the parent")
        out.append(found)
    return out
