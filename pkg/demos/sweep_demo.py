"""Small Monte Carlo sweep reproducing the efficiency-versus-power story:
the sum-rate objective's efficiency decays past the peak while the
efficiency objective saturates.  Writes CSVs and a gnuplot script.

Run:  python demos/sweep_demo.py [out_dir]   (default demo_out/)
"""
import sys

from hapsim.config import ScenarioConfig
from hapsim.harness import SweepSpec, run_sweep, write_gnuplot_script

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
powers = [78.0, 82.0, 86.0, 90.0]
drops = 40

for objective in ("max_sum_rate", "max_ee"):
    cfg = ScenarioConfig.preset("18x4x2", objective=objective, seed=2)
    spec = SweepSpec(cfg, "p_max_dbm", powers, drops)
    import os
    out_dir = os.path.join(out, objective)
    os.makedirs(out_dir, exist_ok=True)
    result = run_sweep(spec, out_dir=out_dir)
    write_gnuplot_script(out_dir)
    print(f"\n{objective}  (CSV in {out_dir})")
    print("  P [dBm]   outage   sum rate [b/s/Hz]      EE [b/s/Hz/W]")
    for p in powers:
        print(f"  {p:7.1f}   {result.outage(p):6.2f}   "
              f"{result.mean(p, 'sum_rate'):10.2f} +- {result.ci_halfwidth(p, 'sum_rate'):5.2f}   "
              f"{result.mean(p, 'energy_efficiency'):.5f}")
