"""Sector grouping, correlation-based NOMA clustering, and time-slot schedule.

Sectors and slots are numbered from 1 (sector n serves the azimuth wedge
[(n-1)*delta, n*delta)); user ids keep whatever 0-based ids geometry gave
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ZeroVector(ValueError):
    """Correlation coefficient is undefined for a zero channel vector."""


@dataclass
class ClusterPlan:
    """Sector membership, per-sector clusters, and the slot schedule.

    `clusters[n]` lists sector n's clusters, each an ordered list of user
    ids; ordering within a cluster is by descending effective channel gain
    once the transceiver has produced the gains (descending LoS gain until
    then).
    """

    sector_of_user: dict[int, int]
    clusters: dict[int, list[list[int]]]
    time_slot_of_sector: dict[int, int]
    n_time_slots: int

    def csv_rows(self) -> list[tuple[int, int, int, int]]:
        rows = []
        for sector in sorted(self.clusters):
            for c_idx, members in enumerate(self.clusters[sector]):
                for uid in members:
                    rows.append((uid, sector, c_idx, self.time_slot_of_sector[sector]))
        return sorted(rows)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("user,sector,cluster,slot\n")
            for row in self.csv_rows():
                fh.write(",".join(str(v) for v in row) + "\n")


def assign_sectors(azimuths: np.ndarray, n_sectors: int) -> np.ndarray:
    """1-based sector index per azimuth; wedges are half-open [(n-1)d, n*d)."""
    delta = 2.0 * math.pi / n_sectors
    idx = np.floor(np.asarray(azimuths) / delta).astype(int)
    return np.minimum(idx, n_sectors - 1) + 1


def los_correlation(h_i: np.ndarray, h_j: np.ndarray, conjugate: bool = True) -> float:
    """Normalized inner-product magnitude of two LoS vectors, in [0, 1].

    The conjugated inner product is the meaningful correlation for complex
    steering vectors; conjugate=False evaluates the plain-transpose variant.
    """
    ni = np.linalg.norm(h_i)
    nj = np.linalg.norm(h_j)
    if ni == 0.0 or nj == 0.0:
        raise ZeroVector("correlation coefficient needs nonzero vectors")
    inner = np.vdot(h_i, h_j) if conjugate else h_i @ h_j
    return min(float(np.abs(inner) / (ni * nj)), 1.0)


def form_clusters(sector_users: list[int], los_means: dict[int, np.ndarray],
                  rho: float, capacity: int, conjugate: bool = True) -> list[list[int]]:
    """Greedy anchor clustering by descending LoS gain.

    The strongest unassigned user anchors a new cluster; unassigned users
    whose correlation with the anchor reaches `rho` join (strongest first)
    until the cluster holds `capacity` users.
    """
    order = sorted(sector_users, key=lambda u: (-np.linalg.norm(los_means[u]), u))
    unassigned = list(order)
    clusters = []
    while unassigned:
        anchor = unassigned.pop(0)
        members = [anchor]
        remaining = []
        for uid in unassigned:
            if len(members) < capacity and \
                    los_correlation(los_means[anchor], los_means[uid], conjugate) >= rho:
                members.append(uid)
            else:
                remaining.append(uid)
        unassigned = remaining
        clusters.append(members)
    return clusters


def n_time_slots(phi_3db_deg: float, delta_deg: float) -> int:
    """Slot count N_t = 2*ceil((phi - delta)/(2*delta)) + 1, clamped to 1.

    phi is the effective interference beamwidth, taken as the full 3 dB
    width of the sector pattern.  No overlap (phi <= delta) needs one slot.
    """
    if phi_3db_deg <= 0 or delta_deg <= 0:
        raise ValueError("beamwidth and sector width must be positive")
    if phi_3db_deg <= delta_deg:
        return 1
    return 2 * math.ceil((phi_3db_deg - delta_deg) / (2.0 * delta_deg)) + 1


def azimuth_pattern_db(angle_deg: float, phi_3db_deg: float) -> float:
    """Relative sector pattern -12*(angle/phi_3dB)^2 in dB."""
    return -12.0 * (angle_deg / phi_3db_deg) ** 2


def assign_time_slots(n_sectors: int, n_t: int) -> dict[int, int]:
    """Sector k (1-based) gets slot ((k-1) mod N_t) + 1."""
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    return {k: ((k - 1) % n_t) + 1 for k in range(1, n_sectors + 1)}


def build_cluster_plan(users, los_means: dict[int, np.ndarray], config) -> ClusterPlan:
    """Run the full clustering pipeline for one drop."""
    azimuths = np.array([u.azimuth for u in users])
    sectors = assign_sectors(azimuths, config.n_sectors)
    sector_of_user = {u.user_id: int(s) for u, s in zip(users, sectors)}
    conjugate = config.cluster_corr_form == "conjugate"
    clusters = {}
    for sector in range(1, config.n_sectors + 1):
        members = [u.user_id for u in users if sector_of_user[u.user_id] == sector]
        clusters[sector] = form_clusters(members, los_means, config.rho_threshold,
                                         config.users_per_cluster, conjugate)
    n_t = n_time_slots(config.phi_3db, math.degrees(config.sector_width))
    return ClusterPlan(sector_of_user, clusters,
                       assign_time_slots(config.n_sectors, n_t), n_t)
