import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hexqec.circuits import Circuit, Instruction, memory_circuit
from hexqec.noise import NoiseModel, attach_noise
from hexqec.pauliframe import FrameError, ShotBatch, propagate_fault, propagate_faults, sample_shots
from hexqec.tableau import run_tableau

PAULIS = ["I", "X", "Y", "Z"]


def bell_probe():
    """CNOT a->b between two Bell pairs; Bell readout exposes (x_a, z_a, x_b, z_b)
    of any Pauli error right after that gate. Qubits a=0, b=1, c=2, d=3."""
    ops = [[("H", (2,)), ("H", (3,))], [("CNOT", (2, 0)), ("CNOT", (3, 1))],
           [("CNOT", (0, 1))], [("CNOT", (2, 3))],
           [("CNOT", (2, 0)), ("CNOT", (3, 1))], [("H", (2,)), ("H", (3,))],
           [("MEASURE_Z", (0,)), ("MEASURE_Z", (2,)), ("MEASURE_Z", (1,)), ("MEASURE_Z", (3,))]]
    ins, layers, t = [], [], 0
    for L in ops:
        layers.append([])
        for kind, qs in L:
            layers[-1].append(len(ins))
            ins.append(Instruction(kind, qs, t, 10))
        t += 10
    c = Circuit(instructions=ins, layers=layers, records=layers[-1],
                detectors=[(0,), (1,), (2,), (3,)], observables=[])
    q = range(4)
    big = 1e30
    m = NoiseModel(t1={k: big for k in q}, t2={k: big for k in q}, p_m={k: 0.0 for k in q},
                   t_meas={k: 40 for k in q}, t_1q={k: 40 for k in q},
                   p_2q={(0, 1): 0.01, (0, 2): 0.0, (1, 3): 0.0, (2, 3): 0.0},
                   t_2q={(0, 1): 40, (0, 2): 40, (1, 3): 40, (2, 3): 40})
    return attach_noise(c, m)


def symbol(xa, za, xb, zb):
    f = lambda x, z: {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}[(x, z)]
    return f(xa, za) + f(xb, zb)


def test_zero_noise_all_zero(p33):
    c = memory_circuit(p33, "+", 2)
    b = sample_shots(attach_noise(c, None), 500, 1)
    assert not b.detector_bits.any() and not b.observable_bits.any()


def test_bell_probe_readout():
    nc = bell_probe()
    dep2 = next(k for k, ch in enumerate(nc.channels) if ch.kind == "DEP2" and ch.total > 0)
    for s, _ in nc.channels[dep2].terms:
        dets, _ = propagate_fault(nc, dep2, s)
        bits = [int(k in dets) for k in range(4)]
        assert symbol(*bits) == s


def test_dep2_term_frequencies():
    nc = bell_probe()
    shots = 100_000
    b = sample_shots(nc, shots, 11)
    words = [symbol(*row) for row in b.detector_bits]
    p = 0.01 / 15
    sd = np.sqrt(shots * p * (1 - p))
    counts = {w: words.count(w) for w in set(words)}
    for s1 in PAULIS:
        for s2 in PAULIS:
            if s1 + s2 == "II":
                continue
            assert abs(counts.get(s1 + s2, 0) - shots * p) < 5 * sd, s1 + s2


def test_identity_term_empty(p33, model):
    nc = attach_noise(memory_circuit(p33, "0", 1, model.durations()), model)
    assert propagate_fault(nc, 0, "I") == (frozenset(), 0)
    with pytest.raises(FrameError):
        propagate_fault(nc, len(nc.channels), "X")


def test_z_before_x_readout(p33, model):
    c = memory_circuit(p33, "+", 1, model.durations())
    nc = attach_noise(c, model)
    q = sorted(p33.logical_x)[0]
    h_layer = max(i for i, L in enumerate(c.layers)
                  if any(c.instructions[k].kind == "H" and c.instructions[k].qubits[0] == q for k in L))
    loc = max(k for k, ch in enumerate(nc.channels)
              if ch.kind == "IDLE_PAULI" and ch.qubits == (q,) and ch.layer < h_layer)
    dets, mask = propagate_fault(nc, loc, "Z")
    assert mask == 1
    info = c.meta["detector_info"]
    xs = {k for k, s in enumerate(p33.stabilizers) if s.type == "X" and q in s.support}
    assert {info[d][0] for d in dets} == xs
    assert all(info[d][1] == "X" and info[d][2] == 2 for d in dets)


def test_classical_flip_hits_detectors_using_record(p33, model):
    c = memory_circuit(p33, "0", 2, model.durations())
    nc = attach_noise(c, model)
    for loc, ch in enumerate(nc.channels):
        if ch.kind != "CLASSICAL":
            continue
        dets, _ = propagate_fault(nc, loc, "FLIP")
        expect = {k for k, d in enumerate(c.detectors) if list(d).count(ch.record) % 2}
        assert dets == expect and len(dets) <= 4


def _tableau_symptom(c, faults):
    ref = run_tableau(c, np.random.default_rng(0))
    rec = run_tableau(c, np.random.default_rng(0), faults=faults)
    flip = rec ^ ref
    dets = frozenset(k for k, d in enumerate(c.detectors) if np.bitwise_xor.reduce(flip[list(d)]) if len(d))
    mask = sum(int(np.bitwise_xor.reduce(flip[list(o["meas"])])) << i for i, o in enumerate(c.observables))
    return dets, mask


@pytest.mark.parametrize("alpha", ["0", "+"])
def test_frame_matches_tableau(p33, model, alpha):
    c = memory_circuit(p33, alpha, 1, model.durations())
    nc = attach_noise(c, model)
    rng = np.random.default_rng(5)
    locs = [k for k, ch in enumerate(nc.channels) if ch.kind in ("DEP2", "IDLE_PAULI")]
    for loc in rng.choice(locs, 60, replace=False):
        ch = nc.channels[loc]
        s, _ = ch.terms[rng.integers(len(ch.terms))]
        L = c.layers[ch.layer]
        if ch.kind == "DEP2":
            after = next(k for k in L if c.instructions[k].qubits == ch.qubits)
        else:
            after = L[-1]
        faults = {after: [(q, p) for q, p in zip(ch.qubits, s) if p != "I"]}
        assert propagate_fault(nc, int(loc), s) == _tableau_symptom(c, faults)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 14)), min_size=1, max_size=6))
def test_frame_linearity(p33, model, picks):
    nc = _linearity_nc(p33, model)
    faults = []
    for a, b in picks:
        loc = a % len(nc.channels)
        faults.append((loc, b % len(nc.channels[loc].terms)))
    d_all, o_all = propagate_faults(nc, [faults])
    d_sum = np.zeros_like(d_all[0])
    o_sum = np.zeros_like(o_all[0])
    for f in faults:
        d, o = propagate_faults(nc, [[f]])
        d_sum ^= d[0]
        o_sum ^= o[0]
    assert np.array_equal(d_all[0], d_sum) and np.array_equal(o_all[0], o_sum)


_NC = {}


def _linearity_nc(p33, model):
    if "nc" not in _NC:
        _NC["nc"] = attach_noise(memory_circuit(p33, "-", 1, model.durations()), model)
    return _NC["nc"]


def test_seed_determinism_and_roundtrip(tmp_path, p33, model):
    nc = attach_noise(memory_circuit(p33, "1", 1, model.durations()), model)
    a = sample_shots(nc, 5000, 42)
    b = sample_shots(nc, 5000, 42)
    assert np.array_equal(a.detector_bits, b.detector_bits)
    assert np.array_equal(a.observable_bits, b.observable_bits)
    assert not np.array_equal(a.detector_bits, sample_shots(nc, 5000, 43).detector_bits)
    a.save(tmp_path / "s.bin")
    c = ShotBatch.load(tmp_path / "s.bin")
    assert np.array_equal(c.detector_bits, a.detector_bits) and c.seed == 42
    assert c.circuit_hash == nc.base.digest()
    assert a.detector_bits.shape == (5000, len(nc.base.detectors))
    with pytest.raises(FrameError):
        sample_shots(nc, 0, 1)


def test_prefix_stable_across_batch_sizes(p33, model):
    nc = attach_noise(memory_circuit(p33, "0", 1, model.durations()), model)
    a = sample_shots(nc, 10000, 3)
    b = sample_shots(nc, 4096, 3)
    assert np.array_equal(a.detector_bits[:4096], b.detector_bits)
