"""Drop users, group them into sectors and NOMA clusters, and show the
time-slot schedule that keeps interfering sectors apart.

Run:  python demos/clustering_demo.py
"""
import math
from collections import Counter

import numpy as np

from hapsim.channel import ChannelParams, los_steering
from hapsim.config import ScenarioConfig
from hapsim.geometry import drop_users
from hapsim.topology import build_cluster_plan, los_correlation

cfg = ScenarioConfig.preset("18x4x2", seed=1)
rng = np.random.default_rng(cfg.seed)
users = drop_users(cfg, rng)
means = {}
for u in users:
    p = ChannelParams(1, 0.0, 1.0, 1.0, True, u.elevation, cfg.antenna_spacing)
    means[u.user_id] = los_steering(p, cfg.elements_per_sector)

plan = build_cluster_plan(users, means, cfg)

print(f"{cfg.total_users} users over {cfg.n_sectors} sectors; "
      f"time slots N_t = {plan.n_time_slots}")
print("slot -> sectors:")
for slot in range(1, plan.n_time_slots + 1):
    sectors = [k for k, s in plan.time_slot_of_sector.items() if s == slot]
    print(f"  {slot}: {sectors}")

sizes = Counter(len(c) for cl in plan.clusters.values() for c in cl)
print(f"\ncluster size histogram: {dict(sorted(sizes.items()))} "
      f"(threshold rho = {cfg.rho_threshold})")

sector = max(plan.clusters, key=lambda s: len(plan.clusters[s]))
print(f"\nsector {sector} clusters (user: elevation deg):")
for idx, members in enumerate(plan.clusters[sector]):
    line = ", ".join(f"{u}: {math.degrees(users[u].elevation):.1f}"
                     for u in members)
    print(f"  cluster {idx}: {line}")
    if len(members) > 1:
        r = los_correlation(means[members[0]], means[members[1]])
        print(f"    anchor-member correlation r = {r:.4f}")
