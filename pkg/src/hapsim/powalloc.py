"""Two-stage QoS/SIC-constrained power allocation with water-filling.

Stage one gives every user the minimum coefficient that satisfies its rate
floor and the SIC decoding power gap, computed sequentially from the
strongest user down (each minimum folds in the interference of the minima
above it).  Stage two spreads the residual budget across clusters by
equalizing their fractional levels

    H_m = P_max * 2**(sum of current cluster rates) / (rho * gamma_m1),

the marginal power cost of one more bit/s/Hz of cluster sum rate once the
followers' minima are re-cascaded.  Filling a cluster to a common water
level lam therefore costs (lam - H_m) watts and buys log2(lam/H_m) rate
when the followers stay rate-floor-bound, which is what makes the
closed-form energy-efficiency expression in `energy_efficiency` exact.

Residual power always enters through the cluster's strongest user: moving
any of it to a weaker user lowers the cluster sum rate, and moving power
between clusters at the water level lowers the total (see the grid oracle
used by the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BUDGET_RTOL = 1e-9


class Infeasible(RuntimeError):
    """Minimum coefficients exceed the power budget (P_req > P_max)."""


def min_coefficients(gammas, rho: float, r_qos: float, p_tol: float, p_max: float,
                     sic_gap_form: str = "absolute"):
    """Per-user minimum coefficients for one SIC-ordered cluster.

    Returns (omega_min, omega_qos, omega_sic) arrays; omega_sic[0] is 0 by
    convention (the strongest user decodes last and has no gap condition).
    The "absolute" gap form divides P_tol by P_max*gamma so the received
    power gap is P_tol watts; "snr_relative" divides by rho*gamma.
    """
    gammas = np.asarray(gammas, dtype=float)
    values = gammas.tolist()
    if any(g <= 0 for g in values):
        raise ValueError("effective gains must be positive")
    if any(a < b for a, b in zip(values, values[1:])):
        raise ValueError("gains must be sorted in descending order")
    scale = 2.0 ** r_qos - 1.0
    denom = p_max if sic_gap_form == "absolute" else rho
    omega_qos = np.zeros(len(values))
    omega_sic = np.zeros(len(values))
    omega_min = np.zeros(len(values))
    prefix = 0.0
    for l, g in enumerate(values):
        omega_qos[l] = scale * (prefix + 1.0 / (rho * g))
        if l == 0:
            omega_min[l] = omega_qos[l]
        else:
            omega_sic[l] = prefix + p_tol / (denom * values[l - 1])
            omega_min[l] = max(omega_qos[l], omega_sic[l])
        prefix += omega_min[l]
    return omega_min, omega_qos, omega_sic


def cluster_rates(gammas, omegas, rho: float) -> np.ndarray:
    """Per-user rates log2(1 + rho*w_l*g_l / (1 + rho*g_l*sum_{k<l} w_k))."""
    gammas = np.asarray(gammas, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    prefix = np.concatenate([[0.0], np.cumsum(omegas)[:-1]])
    return np.log2(1.0 + rho * omegas * gammas / (1.0 + rho * gammas * prefix))


def fractional_level(gammas, rates, rho: float, p_max: float) -> float:
    """Water-filling level H = P_max * 2**(sum rates) / (rho * gamma_1), in watts."""
    gammas = np.asarray(gammas, dtype=float)
    return p_max * 2.0 ** float(np.sum(rates)) / (rho * gammas[0])


def energy_efficiency(min_rate_sum: float, levels, lam: float, p_req: float) -> float:
    """Closed-form efficiency of the water-filled allocation at level `lam`.

    (sum of minimum rates + sum of [log2(lam) - log2(H_m)]+) over
    (P_req + sum of [lam - H_m]+); levels and lam share power units.
    """
    if p_req <= 0:
        raise ValueError("p_req must be positive")
    return _ee_expression(min_rate_sum, levels, lam, p_req)


def _ee_expression(min_rate_sum, levels, lam, p_req) -> float:
    levels = np.asarray(levels, dtype=float)
    gain = np.maximum(np.log2(lam) - np.log2(levels), 0.0)
    cost = np.maximum(lam - levels, 0.0)
    denom = p_req + float(cost.sum())
    if denom <= 0.0:
        return math.nan
    return (min_rate_sum + float(gain.sum())) / denom


def max_ee_level(levels, min_rate_sum: float, p_req: float, lam_budget: float,
                 rtol: float = 1e-8) -> float:
    """Level maximizing the closed-form efficiency over [min(levels), lam_budget].

    The objective is unimodal in the level (concave rate gain over affine
    power), so golden-section search converges to the unique peak.
    """
    lo = float(np.min(levels))
    hi = float(lam_budget)
    if hi <= lo:
        return lo
    return _golden_max(lambda lam: _ee_expression(min_rate_sum, levels, lam, p_req),
                       lo, hi, rtol * hi)


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Cluster state and the vectorized fill used by the water-filling bisection.

@dataclass
class _Clusters:
    """Padded per-cluster arrays for one drop (NOMA path)."""

    sizes: np.ndarray           # (n_c,)
    gammas: np.ndarray          # (n_c, Lmax), padded with 1.0
    omega_min: np.ndarray       # (n_c, Lmax), padded with 0.0
    rates_min: np.ndarray       # (n_c, Lmax)
    levels: np.ndarray          # (n_c,)
    pow2_r1: np.ndarray         # (n_c,), 2**rates_min[:, 0]
    mask: np.ndarray            # (n_c, Lmax) validity


def _cascade_followers(omega: np.ndarray, gammas: np.ndarray, mask: np.ndarray,
                       rho, r_qos, p_tol, p_max, sic_gap_form) -> np.ndarray:
    """Fill columns 1.. of `omega` with the follower minima induced by column 0."""
    scale = 2.0 ** r_qos - 1.0
    denom = p_max if sic_gap_form == "absolute" else rho
    prefix = omega[:, 0].copy()
    for l in range(1, omega.shape[1]):
        qos = scale * (prefix + 1.0 / (rho * gammas[:, l]))
        sic = prefix + p_tol / (denom * gammas[:, l - 1])
        omega[:, l] = np.where(mask[:, l], np.maximum(qos, sic), 0.0)
        prefix = prefix + omega[:, l]
    return omega


def _rates_padded(gammas: np.ndarray, omega: np.ndarray, mask: np.ndarray,
                  rho: float) -> np.ndarray:
    prefix = np.cumsum(omega, axis=1) - omega
    rates = np.log2(1.0 + rho * omega * gammas / (1.0 + rho * gammas * prefix))
    return np.where(mask, rates, 0.0)


def _pack_clusters(cluster_gains, rho, r_qos, p_tol, p_max, sic_gap_form) -> _Clusters:
    sizes = np.array([len(g) for g in cluster_gains])
    n_c, l_max = len(cluster_gains), int(sizes.max())
    gammas = np.ones((n_c, l_max))
    for i, g in enumerate(cluster_gains):
        gammas[i, :sizes[i]] = g
    mask = np.arange(l_max)[None, :] < sizes[:, None]
    omega_min = np.zeros((n_c, l_max))
    omega_min[:, 0] = (2.0 ** r_qos - 1.0) / (rho * gammas[:, 0])
    omega_min = _cascade_followers(omega_min, gammas, mask, rho, r_qos, p_tol,
                                   p_max, sic_gap_form)
    rates_min = _rates_padded(gammas, omega_min, mask, rho)
    levels = p_max * 2.0 ** rates_min.sum(axis=1) / (rho * gammas[:, 0])
    pow2_r1 = 1.0 + rho * gammas[:, 0] * omega_min[:, 0]
    return _Clusters(sizes, gammas, omega_min, rates_min, levels, pow2_r1, mask)


def _fill_at_level(cl: _Clusters, lam: float, rho, r_qos, p_tol, p_max,
                   sic_gap_form, cascade: bool) -> np.ndarray:
    """Coefficients after filling every cluster below `lam` up to it."""
    ratio = np.maximum(lam / cl.levels, 1.0)
    eps1 = (ratio - 1.0) * cl.pow2_r1 / (rho * cl.gammas[:, 0])
    omega = cl.omega_min.copy()
    omega[:, 0] += eps1
    if cascade and omega.shape[1] > 1:
        omega = _cascade_followers(omega, cl.gammas, cl.mask, rho, r_qos, p_tol,
                                   p_max, sic_gap_form)
    return omega


def _consumed(cl: _Clusters, omega: np.ndarray, p_max: float) -> float:
    return p_max * float((omega - cl.omega_min).sum())


def water_fill(cluster_gains, p_remaining: float, p_max: float, rho: float,
               r_qos: float, p_tol: float, sic_gap_form: str = "absolute",
               cascade: bool = True):
    """Spread `p_remaining` watts across clusters by equalizing levels.

    Bisects the water level until the consumed power (first-user increments
    plus the re-cascaded follower minima they induce) matches the budget.
    Returns (list of per-cluster coefficient arrays, water level).
    """
    cl = _pack_clusters(cluster_gains, rho, r_qos, p_tol, p_max, sic_gap_form)
    lam = _solve_budget_level(cl, p_remaining, rho, r_qos, p_tol, p_max,
                              sic_gap_form, cascade)
    omega = _fill_at_level(cl, lam, rho, r_qos, p_tol, p_max, sic_gap_form, cascade)
    return [omega[i, :cl.sizes[i]] for i in range(len(cluster_gains))], lam


def _solve_budget_level(cl: _Clusters, p_remaining, rho, r_qos, p_tol, p_max,
                        sic_gap_form, cascade: bool) -> float:
    lo = float(cl.levels.min())
    if p_remaining <= 0:
        return lo

    def consumed(lam):
        return _consumed(cl, _fill_at_level(cl, lam, rho, r_qos, p_tol, p_max,
                                            sic_gap_form, cascade), p_max)

    hi = float(cl.levels.max()) + p_remaining
    while consumed(hi) < p_remaining:
        hi = 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if consumed(mid) < p_remaining:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# OMA baseline: cluster members time-share their slot equally.

def oma_min_coefficients(gammas, rho: float, r_qos: float) -> np.ndarray:
    """Time-averaged coefficients hitting the rate floor under 1/L time sharing."""
    gammas = np.asarray(gammas, dtype=float)
    l = len(gammas)
    return (2.0 ** (l * r_qos) - 1.0) / (l * rho * gammas)


def oma_rates(gammas, omegas, rho: float) -> np.ndarray:
    """Per-user rates (1/L)*log2(1 + L*rho*w*g): bursting the share in 1/L time."""
    gammas = np.asarray(gammas, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    l = len(gammas)
    return np.log2(1.0 + l * rho * omegas * gammas) / l


@dataclass
class _OmaUsers:
    sizes_rep: np.ndarray    # cluster size L_c repeated per user
    gammas: np.ndarray
    omega_min: np.ndarray
    rates_min: np.ndarray
    levels: np.ndarray


def _pack_oma(cluster_gains, rho, r_qos, p_max) -> _OmaUsers:
    sizes_rep, gam, omin, rmin = [], [], [], []
    for g in cluster_gains:
        g = np.asarray(g, dtype=float)
        w = oma_min_coefficients(g, rho, r_qos)
        sizes_rep += [len(g)] * len(g)
        gam += list(g)
        omin += list(w)
        rmin += list(oma_rates(g, w, rho))
    sizes_rep = np.array(sizes_rep, dtype=float)
    gam = np.array(gam)
    rmin = np.array(rmin)
    levels = p_max * 2.0 ** (sizes_rep * rmin) / (rho * gam)
    return _OmaUsers(sizes_rep, gam, np.array(omin), rmin, levels)


def _oma_fill(ou: _OmaUsers, lam: float, rho, p_max) -> np.ndarray:
    scaled = np.maximum(lam, ou.levels) * rho * ou.gammas / p_max
    return (scaled - 1.0) / (ou.sizes_rep * rho * ou.gammas)


def oma_water_fill(cluster_gains, p_remaining: float, p_max: float, rho: float,
                   r_qos: float):
    """Residual power across OMA users; consumption per user is (lam - H)/L."""
    ou = _pack_oma(cluster_gains, rho, r_qos, p_max)
    lo = float(ou.levels.min())
    lam = lo
    if p_remaining > 0:
        def consumed(level):
            return p_max * float((_oma_fill(ou, level, rho, p_max) - ou.omega_min).sum())
        hi = float(ou.levels.max()) + p_remaining * float(ou.sizes_rep.max())
        while consumed(hi) < p_remaining:
            hi = 2.0 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if consumed(mid) < p_remaining:
                lo = mid
            else:
                hi = mid
        lam = hi
    omega = _oma_fill(ou, lam, rho, p_max)
    out, pos = [], 0
    for g in cluster_gains:
        out.append(omega[pos:pos + len(g)])
        pos += len(g)
    return out, lam


def oma_energy_efficiency(ou: _OmaUsers, lam: float, p_req: float) -> float:
    gain = np.maximum(np.log2(lam) - np.log2(ou.levels), 0.0) / ou.sizes_rep
    cost = np.maximum(lam - ou.levels, 0.0) / ou.sizes_rep
    return (float(ou.rates_min.sum()) + float(gain.sum())) / (p_req + float(cost.sum()))


# ---------------------------------------------------------------------------
# Full per-drop solve.

@dataclass
class PowerSolution:
    """Allocation, rates, and efficiency for one drop's active clusters."""

    omega: list = field(default_factory=list)       # per-cluster arrays
    omega_min: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    p_req: float = math.nan
    water_level: float = math.nan
    lam_budget: float = math.nan                    # level that spends the full budget
    sum_rate: float = math.nan                      # slot-normalized
    energy_efficiency: float = math.nan             # exact: sum_rate / total power
    analytic_ee: float = math.nan                   # closed-form, same normalization
    total_power: float = math.nan
    levels: np.ndarray | None = None
    feasible: bool = False

    @property
    def total_omega(self) -> float:
        return float(sum(np.sum(w) for w in self.omega))

    @property
    def ee_saturated(self) -> bool:
        """True when the efficiency peak sits strictly inside the budget."""
        return self.feasible and self.water_level < self.lam_budget * (1.0 - 1e-6)


def solve_power(cluster_gains, rho: float, r_qos: float, p_tol: float, p_max: float,
                objective: str = "max_sum_rate", access_mode: str = "noma",
                sic_gap_form: str = "absolute", slot_scale: float = 1.0
                ) -> PowerSolution:
    """Run both allocation stages for one drop's active clusters.

    Infeasible drops (P_req > P_max) come back with feasible=False, the
    demanded minima, and NaN metrics; no exception is raised so Monte Carlo
    sweeps can count outages.
    """
    cluster_gains = [np.asarray(g, dtype=float) for g in cluster_gains]
    if access_mode == "oma":
        return _solve_oma(cluster_gains, rho, r_qos, p_max, objective, slot_scale)

    cl = _pack_clusters(cluster_gains, rho, r_qos, p_tol, p_max, sic_gap_form)
    sol = PowerSolution(
        omega_min=[cl.omega_min[i, :cl.sizes[i]] for i in range(len(cluster_gains))],
        levels=cl.levels.copy(),
    )
    sol.p_req = p_max * float(cl.omega_min.sum())
    if sol.p_req > p_max * (1.0 + BUDGET_RTOL):
        sol.omega = [w.copy() for w in sol.omega_min]
        sol.rates = [cluster_rates(g, w, rho) for g, w in zip(cluster_gains, sol.omega)]
        return sol

    p_remaining = max(p_max - sol.p_req, 0.0)
    lam_budget = _solve_budget_level(cl, p_remaining, rho, r_qos, p_tol, p_max,
                                     sic_gap_form, cascade=True)
    sol.lam_budget = lam_budget
    lam = lam_budget
    if objective == "max_ee":
        lam = max_ee_level(cl.levels, float(cl.rates_min.sum()), sol.p_req, lam_budget)

    omega = _fill_at_level(cl, lam, rho, r_qos, p_tol, p_max, sic_gap_form, cascade=True)
    sol.omega = [omega[i, :cl.sizes[i]] for i in range(len(cluster_gains))]
    sol.rates = [cluster_rates(g, w, rho) for g, w in zip(cluster_gains, sol.omega)]
    sol.water_level = lam
    sol.feasible = True
    sol.total_power = p_max * float(omega.sum())
    sol.sum_rate = slot_scale * float(sum(r.sum() for r in sol.rates))
    sol.energy_efficiency = sol.sum_rate / sol.total_power
    sol.analytic_ee = slot_scale * _ee_expression(
        float(cl.rates_min.sum()), cl.levels, lam, sol.p_req)
    return sol


def _solve_oma(cluster_gains, rho, r_qos, p_max, objective, slot_scale) -> PowerSolution:
    ou = _pack_oma(cluster_gains, rho, r_qos, p_max)
    sol = PowerSolution(levels=ou.levels.copy())
    mins, pos = [], 0
    for g in cluster_gains:
        mins.append(ou.omega_min[pos:pos + len(g)])
        pos += len(g)
    sol.omega_min = mins
    sol.p_req = p_max * float(ou.omega_min.sum())
    if sol.p_req > p_max * (1.0 + BUDGET_RTOL):
        sol.omega = [w.copy() for w in mins]
        sol.rates = [oma_rates(g, w, rho) for g, w in zip(cluster_gains, sol.omega)]
        return sol

    p_remaining = max(p_max - sol.p_req, 0.0)
    _, lam_budget = oma_water_fill(cluster_gains, p_remaining, p_max, rho, r_qos)
    sol.lam_budget = lam_budget
    lam = lam_budget
    if objective == "max_ee" and lam_budget > float(ou.levels.min()):
        lam = _golden_max(lambda level: oma_energy_efficiency(ou, level, sol.p_req),
                          float(ou.levels.min()), lam_budget, 1e-8 * lam_budget)
    omega_flat = _oma_fill(ou, lam, rho, p_max)
    out, pos = [], 0
    for g in cluster_gains:
        out.append(omega_flat[pos:pos + len(g)])
        pos += len(g)
    sol.omega = out
    sol.rates = [oma_rates(g, w, rho) for g, w in zip(cluster_gains, sol.omega)]
    sol.water_level = lam
    sol.feasible = True
    sol.total_power = p_max * float(omega_flat.sum())
    sol.sum_rate = slot_scale * float(sum(r.sum() for r in sol.rates))
    sol.energy_efficiency = sol.sum_rate / sol.total_power
    sol.analytic_ee = slot_scale * oma_energy_efficiency(ou, lam, sol.p_req)
    return sol


def fill_cluster_with_power(gammas, extra_watts: float, rho: float, r_qos: float,
                            p_tol: float, p_max: float,
                            sic_gap_form: str = "absolute") -> np.ndarray:
    """Coefficients of one cluster given `extra_watts` above its minima.

    Bisects the cluster's own level so the cascade-inclusive consumption
    matches the target; used to evaluate power shifts between clusters.
    """
    cl = _pack_clusters([np.asarray(gammas, dtype=float)], rho, r_qos, p_tol,
                        p_max, sic_gap_form)
    lam = _solve_budget_level(cl, extra_watts, rho, r_qos, p_tol, p_max,
                              sic_gap_form, cascade=True)
    omega = _fill_at_level(cl, lam, rho, r_qos, p_tol, p_max, sic_gap_form, True)
    return omega[0, :cl.sizes[0]]


# ---------------------------------------------------------------------------
# Exhaustive grid oracle (validation only; used by the optimality tests).

def _grid_allocations(l: int, budget: float, step: float):
    """All coefficient tuples on the step grid with total <= budget."""
    n = int(math.floor(budget / step + 1e-9))
    axis = np.arange(n + 1) * step
    grids = np.meshgrid(*([axis] * l), indexing="ij")
    alloc = np.stack([g.ravel() for g in grids], axis=1)
    return alloc[alloc.sum(axis=1) <= budget + 1e-12]


def _grid_feasible(alloc: np.ndarray, gammas, rho, r_qos, p_tol, p_max,
                   sic_gap_form) -> np.ndarray:
    gammas = np.asarray(gammas, dtype=float)
    prefix = np.concatenate([np.zeros((len(alloc), 1)), np.cumsum(alloc, axis=1)[:, :-1]],
                            axis=1)
    rates = np.log2(1.0 + rho * alloc * gammas / (1.0 + rho * gammas * prefix))
    ok = np.all(rates >= r_qos - 1e-12, axis=1)
    if alloc.shape[1] > 1:
        denom = p_max if sic_gap_form == "absolute" else rho
        margins = (alloc[:, 1:] - prefix[:, 1:]) * gammas[:-1] - p_tol / denom
        ok &= np.all(margins >= -1e-12, axis=1)
    return ok, rates


def bruteforce_cluster_oracle(gammas, rho: float, r_qos: float, p_tol: float,
                              p_max: float, budget: float, step: float):
    """Best feasible grid allocation of one cluster and its sum rate.

    Exhaustive search over the coefficient simplex; intended for L <= 3 and
    validation-scale steps only.
    """
    gammas = np.asarray(gammas, dtype=float)
    if len(gammas) > 3:
        raise ValueError("grid oracle supports clusters of at most 3 users")
    alloc = _grid_allocations(len(gammas), budget, step)
    ok, rates = _grid_feasible(alloc, gammas, rho, r_qos, p_tol, p_max, "absolute")
    if not np.any(ok):
        return -math.inf, None
    sums = np.where(ok, rates.sum(axis=1), -math.inf)
    best = int(np.argmax(sums))
    return float(sums[best]), alloc[best]


def bruteforce_budget_profile(gammas, rho: float, r_qos: float, p_tol: float,
                              p_max: float, budget: float, step: float) -> np.ndarray:
    """profile[k] = best feasible cluster sum rate with total coefficient <= k*step.

    Lets a two-cluster exhaustive search scan budget splits without
    re-running the per-cluster grid for every split.
    """
    alloc = _grid_allocations(len(np.asarray(gammas)), budget, step)
    ok, rates = _grid_feasible(alloc, gammas, rho, r_qos, p_tol, p_max, "absolute")
    n_bins = int(round(budget / step))
    profile = np.full(n_bins + 1, -math.inf)
    if np.any(ok):
        totals = alloc[ok].sum(axis=1)
        bins = np.ceil(totals / step - 1e-9).astype(int)
        np.maximum.at(profile, bins, rates[ok].sum(axis=1))
    return np.maximum.accumulate(profile)
