"""Fit the three logical-error models to synthetic amplitude-damped data."""
import numpy as np

from hexqec.fitting import aic_select, bootstrap
from hexqec.metrics import Tallies, ef_from_probs, spam_calibrate, synthetic_probs, witnesses

SHOTS = 3000
probs = synthetic_probs(0.99, 0.98, 0.02, 9, u=1.0)
rng = np.random.default_rng(0)
noisy = {a: {n: rng.binomial(SHOTS, p) / SHOTS for n, p in s.items()} for a, s in probs.items()}

N = np.arange(10)
for a in ("0", "+"):
    p = np.array([noisy[a][n] for n in N])
    best, fits = aic_select(N, p)
    fb = bootstrap(N, p, SHOTS, best, replicates=100, seed=1)
    aics = ", ".join(f"order {k}: {f.aic:.1f}" for k, f in fits.items())
    print(f"|{a}>: AIC {aics} -> order {best}, eps = {fb.eps:.5f} +- {fb.std('eps'):.5f}")

t = Tallies.from_series(probs)
dx, dz = witnesses(t, spam_calibrate(t))
print("delta_z:", np.round(dz, 5))
print("F_e:", np.round(ef_from_probs(probs).F, 4))
