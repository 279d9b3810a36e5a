"""
Where the optimal step sits on the one-step MSD map
===================================================

For a given deviation level the expected next-step MSD is a parabola in
the step size. This script evaluates it on a grid and shows that the
closed-form step lands on the bottom, and how that step compares with the
stability limit and the fastest-convergence step as the deviation shrinks.
"""
import numpy as np

from oplmf.engine import (
    MomentSet,
    fastest_convergence_step,
    one_step_msd,
    optimal_step,
    stability_bound,
)

L, sx = 5, 1.0
gauss = MomentSet(1.0, 3.0, 15.0)
bound = stability_bound(L, sx, gauss)
print(f"stability limit = fastest-convergence step = {bound:.6f} "
      f"(= 1/105: {np.isclose(bound, 1 / 105)})")
assert np.isclose(fastest_convergence_step(L, sx, gauss), bound)

grid = np.linspace(0, 2 * bound, 20001)
print(f"{'MSD':>8} {'closed form':>12} {'grid argmin':>12} {'mu / limit':>10}")
for msd in (5.0, 1.0, 0.1, 1e-2, 1e-3, 1e-4):
    mu = optimal_step(msd, sx, gauss, L)
    best = grid[np.argmin(one_step_msd(msd, sx, grid, gauss, L))]
    print(f"{msd:8.0e} {mu:12.6f} {best:12.6f} {mu / bound:10.3f}")

# At small deviation the step is roughly proportional to the deviation, which
# is why the learning curve ends up decaying like 1/n rather than geometrically.
ratio = optimal_step(1e-4, sx, gauss, L) / optimal_step(1e-5, sx, gauss, L)
print(f"mu(1e-4) / mu(1e-5) = {ratio:.3f}")
