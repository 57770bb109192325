"""Stabilizer tableau simulator (Aaronson-Gottesman) for noiseless reference
runs and determinism checks."""
from __future__ import annotations

import numpy as np


class Tableau:
    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n + 1, n), dtype=bool)
        self.z = np.zeros((2 * n + 1, n), dtype=bool)
        self.r = np.zeros(2 * n + 1, dtype=bool)
        self.x[np.arange(n), np.arange(n)] = True  # destabilizers X_i
        self.z[n + np.arange(n), np.arange(n)] = True  # stabilizers Z_i

    def h(self, a):
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, a):
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def cnot(self, a, b):
        self.r ^= self.x[:, a] & self.z[:, b] & (self.x[:, b] ^ self.z[:, a] ^ True)
        self.x[:, b] ^= self.x[:, a]
        self.z[:, a] ^= self.z[:, b]

    def cz(self, a, b):
        self.h(b)
        self.cnot(a, b)
        self.h(b)

    def pauli_x(self, a):
        self.r ^= self.z[:, a]

    def pauli_z(self, a):
        self.r ^= self.x[:, a]

    def pauli_y(self, a):
        self.r ^= self.x[:, a] ^ self.z[:, a]

    def _rowsum(self, h, i):
        x1, z1, x2, z2 = self.x[i], self.z[i], self.x[h], self.z[h]
        g = np.zeros(self.n, dtype=np.int64)
        # exponent of i contributed by each qubit when multiplying P_i * P_h
        g += np.where(x1 & z1, z2.astype(np.int64) - x2.astype(np.int64), 0)
        g += np.where(x1 & ~z1, z2 * (2 * x2.astype(np.int64) - 1), 0)
        g += np.where(~x1 & z1, x2 * (1 - 2 * z2.astype(np.int64)), 0)
        tot = 2 * int(self.r[h]) + 2 * int(self.r[i]) + int(g.sum())
        self.r[h] = (tot % 4) == 2
        self.x[h] ^= x1
        self.z[h] ^= z1

    def measure(self, a, rng=None, forced=None) -> int:
        n = self.n
        p = np.nonzero(self.x[n:2 * n, a])[0]
        if len(p):
            p = int(p[0]) + n
            for i in range(2 * n):
                if i != p and self.x[i, a]:
                    self._rowsum(i, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            if forced is not None:
                out = int(forced)
            else:
                out = int(rng.integers(2)) if rng is not None else 0
            self.r[p] = bool(out)
            return out
        s = 2 * n
        self.x[s] = False
        self.z[s] = False
        self.r[s] = False
        for i in range(n):
            if self.x[i, a]:
                self._rowsum(s, i + n)
        return int(self.r[s])

    def is_deterministic(self, a) -> bool:
        return not self.x[self.n:2 * self.n, a].any()

    def reset(self, a, rng=None):
        if self.measure(a, rng):
            self.pauli_x(a)


def run_tableau(circuit, rng=None, faults=None) -> np.ndarray:
    """Noiseless record of one run. `faults` maps instruction index to a list
    of (qubit, pauli) applied right after that instruction."""
    qs = circuit.qubits
    idx = {q: i for i, q in enumerate(qs)}
    t = Tableau(len(qs))
    rec = []
    faults = faults or {}
    for L in circuit.layers:
        for k in L:
            ins = circuit.instructions[k]
            a = [idx[q] for q in ins.qubits]
            if ins.kind == "H":
                t.h(a[0])
            elif ins.kind == "CNOT":
                t.cnot(a[0], a[1])
            elif ins.kind == "CZ":
                t.cz(a[0], a[1])
            elif ins.kind == "PULSE_X":
                t.pauli_x(a[0])
            elif ins.kind == "PULSE_Y":
                t.pauli_y(a[0])
            elif ins.kind == "PREP_Z":
                t.reset(a[0], rng)
            elif ins.kind == "MEASURE_Z":
                rec.append(t.measure(a[0], rng))
            for q, pauli in faults.get(k, ()):
                getattr(t, {"X": "pauli_x", "Y": "pauli_y", "Z": "pauli_z"}[pauli])(idx[q])
    return np.array(rec, dtype=np.uint8)
