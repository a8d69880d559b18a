"""Zero-forcing detection, effective gains, SIC ordering, per-user rates.

With the identity precoder, cluster m's signal leaves on array element m,
so a user's detection vector must be orthogonal to every other column of
its channel matrix.  The gain-optimal such vector is the unit projection of
the desired column onto the orthogonal complement of the interfering
columns; all rate computations then run on the resulting scalar effective
gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RANK_DEFICIENCY_RTOL = 1e-12


class RankDeficiency(RuntimeError):
    """Desired column lies (numerically) inside the interference subspace."""


@dataclass
class EffectiveLink:
    user_id: int
    cluster_index: int
    sector_index: int
    detection_vector: np.ndarray
    effective_gain: float
    rank_in_cluster: int = 0    # 1-based after descending-gain ordering


def detection_vector(h: np.ndarray, column: int) -> tuple[np.ndarray, float]:
    """Unit detection vector nulling all columns but `column`, and its gain.

    Returns (v, gamma) with gamma = |v^H h_col|^2, which equals the squared
    norm of the residual of h_col against the interfering columns.
    """
    n, m = h.shape
    if n < m:
        raise ValueError(f"need at least as many user antennas as columns ({n} < {m})")
    desired = h[:, column]
    interferers = np.delete(h, column, axis=1)
    if interferers.shape[1] == 0:
        norm = np.linalg.norm(desired)
        if norm == 0.0:
            raise RankDeficiency("zero channel column")
        return desired / norm, float(norm ** 2)
    q, _ = np.linalg.qr(interferers)
    residual = desired - q @ (q.conj().T @ desired)
    res_norm = np.linalg.norm(residual)
    if res_norm < RANK_DEFICIENCY_RTOL * np.linalg.norm(desired):
        raise RankDeficiency(
            f"column {column} has projection norm {res_norm:.3e}; degenerate draw")
    v = residual / res_norm
    return v, float(res_norm ** 2)


def nulling_residual(v: np.ndarray, h: np.ndarray, column: int) -> float:
    """Largest leakage |v^H h_k| over interfering columns k != column."""
    leak = np.abs(v.conj() @ h)
    leak[column] = 0.0
    return float(leak.max())


def order_cluster(links: list[EffectiveLink]) -> list[EffectiveLink]:
    """Descending effective gain, user id breaking ties; sets rank_in_cluster."""
    ordered = sorted(links, key=lambda l: (-l.effective_gain, l.user_id))
    for rank, link in enumerate(ordered, start=1):
        link.rank_in_cluster = rank
    return ordered


def user_rate(gamma: float, omega: float, interferer_omegas, rho: float) -> float:
    """Post-SIC rate log2(1 + rho*omega*gamma / (1 + rho*gamma*sum(interferers)))."""
    interference = rho * gamma * math.fsum(interferer_omegas)
    return math.log2(1.0 + rho * omega * gamma / (1.0 + interference))


def sic_power_check(omegas, gammas, p_max: float, p_tol: float
                    ) -> tuple[bool, np.ndarray]:
    """Received power-gap margins for decoding user l at user l-1's gain.

    margin_l = P_max*gamma_{l-1}*(omega_l - sum_{k<l} omega_k) - P_tol for
    l >= 2; the check passes when every margin >= -1e-9*P_max.  Single-user
    clusters pass vacuously.
    """
    omegas = np.asarray(omegas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    if len(omegas) < 2:
        return True, np.empty(0)
    prefix = np.cumsum(omegas)[:-1]
    margins = p_max * gammas[:-1] * (omegas[1:] - prefix) - p_tol
    return bool(np.all(margins >= -1e-9 * p_max)), margins
