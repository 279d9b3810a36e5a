"""
Simulated learning curves against the deterministic MSD recursion
=================================================================

Run the first catalog experiment at full size and put the Monte Carlo
average of the OPLMF deviation next to the curve predicted by the cubic
MSD recursion. An SVG with three panels (MSD, prediction error, step size)
is written next to this script.
"""
from pathlib import Path

import numpy as np

from oplmf.harness import catalog_entry, format_summary, run_experiment, theory_error
from oplmf.svg import experiment_svg

cfg = catalog_entry(1)
traces = run_experiment(cfg)
print(format_summary(cfg, traces))

op = traces["OPLMF"]
err_lin, _ = theory_error(op)
for n in (10, 100, 1000, 5000):
    print(f"n={n:5d}  simulated {op.msd_db_sim[n - 1]:7.2f} dB   "
          f"predicted {op.msd_db_theory[n - 1]:7.2f} dB   "
          f"|difference| {err_lin[n - 1]:.2e}")

tail = slice(-cfg.iterations // 10, None)
print("final-10% mean of e^2 divided by the noise power:",
      round(float(np.mean(op.e2_mean[tail]) / cfg.moments().sigma_rho_sq), 4))

out = Path(__file__).with_name("theory_vs_simulation.svg")
out.write_text(experiment_svg(traces, "catalog experiment 1"))
print("wrote", out)
