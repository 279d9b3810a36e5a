"""
Identifying a short FIR system, one sample at a time
====================================================

A single OPLMF filter learns a five-tap system from noisy observations.
The step size is recomputed every sample from the current deviation, so it
starts large and shrinks on its own as the estimate improves.
"""
import numpy as np

from oplmf import FilterState, MomentSet, OplmfConfig, OplmfFilter, msd_db
from oplmf.noise import NoiseSpec, moments, sample

rng = np.random.default_rng(1)
w_true = np.array([0.8, 0.2, -0.7, 0.2, 0.1])

# Gaussian measurement noise with standard deviation 0.5
noise = NoiseSpec("gaussian", 0.5)
m: MomentSet = moments(noise)
print("noise moments (E[rho^2], E[rho^4], E[rho^6]):", m.as_tuple())

state = FilterState.zeros(len(w_true))
engine = OplmfFilter(OplmfConfig(), m, state)

x = rng.normal(size=4000)
rho = sample(noise, rng, x.size)

for n in range(x.size):
    state.push(x[n])
    d = state.window @ w_true + rho[n]
    diag = engine.step(d, w_true)
    if n in (0, 9, 99, 999, 3999):
        print(f"n={n + 1:5d}  mu={float(diag.mu):.2e}  MSD={msd_db(w_true, state.weights):7.2f} dB")

print("estimate:", np.round(state.weights, 3))
