"""Two-stage power allocation on a toy two-cluster instance: per-user
minima, water level, cascaded follower updates, and the efficiency peak.

Run:  python demos/power_allocation_demo.py
"""
import numpy as np

from hapsim.powalloc import cluster_rates, energy_efficiency, fractional_level, \
    max_ee_level, min_coefficients, solve_power

RHO = 300.0          # transmit SNR P_max / sigma^2
R_QOS = 1.0
P_TOL = 0.0
P_MAX = 1.0

gains = [np.array([1.0, 0.35]), np.array([0.5, 0.2])]

print("=== stage 1: minimum coefficients per cluster ===")
levels, rate_floor = [], 0.0
for i, g in enumerate(gains):
    omin, oqos, osic = min_coefficients(g, RHO, R_QOS, P_TOL, P_MAX)
    rates = cluster_rates(g, omin, RHO)
    levels.append(fractional_level(g, rates, RHO, P_MAX))
    rate_floor += rates.sum()
    print(f"cluster {i}: gains {g}, omega_min {np.round(omin, 5)}, "
          f"rates {np.round(rates, 3)}")
    print(f"  fractional level H = {levels[i]:.4f} W")

print("\n=== stage 2: spend the residual, once per objective ===")
for objective in ("max_sum_rate", "max_ee"):
    sol = solve_power(gains, RHO, R_QOS, P_TOL, P_MAX, objective=objective)
    print(f"{objective}: water level {sol.water_level:.4f} "
          f"(budget level {sol.lam_budget:.4f})")
    print(f"  omegas: {[np.round(w, 4) for w in sol.omega]}")
    print(f"  sum rate {sol.sum_rate:.3f} b/s/Hz, power {sol.total_power:.3f} W, "
          f"EE {sol.energy_efficiency:.3f}")

print("\n=== the efficiency curve is unimodal in the water level ===")
p_req = P_MAX * sum(min_coefficients(g, RHO, R_QOS, P_TOL, P_MAX)[0].sum()
                    for g in gains)
lam_star = max_ee_level(levels, rate_floor, p_req, lam_budget=2.0)
for lam in np.linspace(min(levels), 1.5, 7):
    print(f"  lam = {lam:.3f}: EE = {energy_efficiency(rate_floor, levels, lam, p_req):.3f}")
print(f"peak at lam* = {lam_star:.4f}")
