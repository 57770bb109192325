"""Logical memory on a (3,3) heavy-hex patch: sample, decode and compute the EF."""
from hexqec.circuits import ALPHAS, memory_circuit
from hexqec.decoder import estimate_series
from hexqec.experiment import ef_from_entries, point_seed, run_point
from hexqec.layout import carve_patch, heron
from hexqec.noise import uniform_model

SHOTS, N_MAX = 3000, 4

g = heron()
patch = carve_patch(g, 3, 3)
model = uniform_model(g.qubits, g.edges, 1e-3)
print(f"patch (3,3): {len(patch.data_qubits)} data, {len(patch.check_ancillas)} check, "
      f"{len(patch.bridge_qubits)} bridge qubits")

rows = []
for a in ALPHAS:
    for n in range(N_MAX + 1):
        c = memory_circuit(patch, a, n, model.durations())
        fails, shots = run_point(c, model, SHOTS, point_seed(0, a, n))
        rows.append({"N": n, "alpha": a, "failures": fails, "shots": shots})
        print(f"|{a}> N={n}: p = {fails / shots:.4f}")

ef, notes = ef_from_entries(estimate_series(rows))
for n, f, lo, hi in zip(ef.N, ef.F, ef.F_low, ef.F_high):
    print(f"N={n}: F_e = {f:.4f}  bounds [{lo:.4f}, {hi:.4f}]")
