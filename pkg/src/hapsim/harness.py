"""Monte Carlo experiment driver: drops, sweeps, and CSV outputs.

One drop runs the full pipeline (user placement, per-user channel
realization toward the serving sector, clustering and slot schedule,
zero-forcing gains, power allocation) and reports slot-normalized sum rate,
energy efficiency, and the required minimum power.  A sweep repeats drops
over values of one scenario parameter with per-(point, drop) derived seeds,
so results are reproducible and independent of execution order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel, geometry, powalloc, topology, transceiver
from .config import ConfigError, ScenarioConfig, dbm_to_watts

DEGENERATE_RETRIES = 16

SWEEPABLE = ("p_max_dbm", "r_qos", "antenna_spacing", "spatial_mode",
             "polarization", "access_mode", "objective")

METRICS = ("sum_rate", "energy_efficiency", "p_req")


@dataclass
class ClusterReport:
    """Detail of one active cluster, in SIC (descending gain) order."""

    sector: int
    index_in_sector: int
    user_ids: list
    gammas: np.ndarray
    omega_min: np.ndarray
    omega: np.ndarray
    rates: np.ndarray


@dataclass
class DropResult:
    feasible: bool
    sum_rate: float
    energy_efficiency: float
    analytic_ee: float
    p_req: float
    total_power: float
    n_time_slots: int
    n_active_users: int
    ee_saturated: bool = False
    clusters: list = field(default_factory=list)     # ClusterReport, if collected
    channel_rows: list = field(default_factory=list)
    plan: topology.ClusterPlan | None = None


@dataclass
class SweepSpec:
    base_config: ScenarioConfig
    swept_parameter: str
    values: list
    n_drops: int
    confidence: float = 0.95

    def __post_init__(self):
        if self.swept_parameter not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {self.swept_parameter!r}; "
                              f"choose from {SWEEPABLE}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.n_drops < 1:
            raise ConfigError("n_drops must be >= 1")


@dataclass
class SweepResult:
    """Per-(value, metric) aggregates plus the per-drop table."""

    param: str
    values: list
    stats: dict          # (value, metric) -> (mean, ci_halfwidth, outage, n_drops)
    drop_rows: list      # dicts, one per (value, drop)

    def mean(self, value, metric) -> float:
        return self.stats[(value, metric)][0]

    def ci_halfwidth(self, value, metric) -> float:
        return self.stats[(value, metric)][1]

    def outage(self, value) -> float:
        return self.stats[(value, METRICS[0])][2]

    def any_point_all_infeasible(self) -> bool:
        return any(self.outage(v) >= 1.0 for v in self.values)


def apply_sweep_value(config: ScenarioConfig, param: str, value) -> ScenarioConfig:
    if param == "p_max_dbm":
        return config.replace(p_max=dbm_to_watts(float(value)))
    if param in ("r_qos", "antenna_spacing"):
        return config.replace(**{param: float(value)})
    if param in ("spatial_mode", "polarization", "access_mode", "objective"):
        return config.replace(**{param: str(value)})
    raise ConfigError(f"cannot sweep {param!r}")


def _active_clusters(clusters: list[list[int]], capacity: int,
                     drop_index: int) -> list[list[int]]:
    # Clusters beyond the per-sector capacity time-share the sector's slot
    # round-robin across drops.
    if len(clusters) <= capacity:
        return list(clusters)
    shift = (drop_index * capacity) % len(clusters)
    rotated = clusters[shift:] + clusters[:shift]
    return rotated[:capacity]


def _batched_covariances(config: ScenarioConfig, elevations: np.ndarray,
                         beta_nlos: np.ndarray) -> np.ndarray:
    """(n, M, M) covariance stack following the configured spatial mode."""
    m = config.elements_per_sector
    n = len(elevations)
    if config.spatial_mode == "uncorrelated":
        return beta_nlos[:, None, None] * np.eye(m, dtype=complex)[None]
    sigma_theta = math.radians(config.sigma_theta)
    if config.polarization == "dual_interleaved":
        lags = channel.correlation_lags_batch(elevations, sigma_theta,
                                              2.0 * config.antenna_spacing, m // 2)
        sub = beta_nlos[:, None, None] * channel.toeplitz_from_lags(lags)
        corr = np.zeros((n, m, m), dtype=complex)
        corr[:, 0::2, 0::2] = sub
        corr[:, 1::2, 1::2] = sub
        return corr
    lags = channel.correlation_lags_batch(elevations, sigma_theta,
                                          config.antenna_spacing, m)
    return beta_nlos[:, None, None] * channel.toeplitz_from_lags(lags)


def run_drop(config: ScenarioConfig, drop_seed, drop_index: int = 0,
             collect_detail: bool = False, collect_channels: bool = False
             ) -> DropResult:
    """Run one Monte Carlo drop; deterministic for fixed (config, drop_seed)."""
    rng = np.random.default_rng(drop_seed)
    users = geometry.drop_users(config, rng)
    n = len(users)
    m = config.elements_per_sector
    n_rx = config.user_antennas

    shadow_los = rng.normal(0.0, config.sigma_sf_los, n)
    shadow_nlos = rng.normal(0.0, config.sigma_sf_nlos, n)
    los_draw = rng.random(n)

    azimuths = np.array([u.azimuth for u in users])
    elevations = np.array([u.elevation for u in users])
    slants = np.array([u.slant_distance for u in users])
    sectors = topology.assign_sectors(azimuths, config.n_sectors)

    fspl = 20.0 * (np.log10(slants) + math.log10(config.carrier_freq)
                   + math.log10(4.0 * math.pi / channel.SPEED_OF_LIGHT))
    beta_los = 10.0 ** (-(fspl + shadow_los) / 10.0)
    beta_nlos = 10.0 ** (-(fspl + shadow_nlos) / 10.0)
    p_los = 1.0 / (1.0 + config.kappa * np.exp(
        -config.omega * (np.degrees(elevations) - config.kappa)))
    los_flags = los_draw < p_los

    params = {}
    for u, sector in zip(users, sectors):
        uid = u.user_id
        params[uid] = channel.ChannelParams(
            sector_id=int(sector),
            sector_boresight_azimuth=(sector - 0.5) * config.sector_width,
            beta_los=float(beta_los[uid]),
            beta_nlos=float(beta_nlos[uid]),
            los_indicator=bool(los_flags[uid]),
            elevation=u.elevation,
            d_v=config.antenna_spacing,
        )
    steer_phase = np.exp(1j * 2.0 * np.pi * config.antenna_spacing
                         * np.outer(np.sin(elevations), np.arange(m)))
    los_mean_rows = np.sqrt(beta_los)[:, None] * steer_phase
    los_means = {uid: los_mean_rows[uid] for uid in range(n)}

    plan = topology.build_cluster_plan(users, los_means, config)

    # One eigen-factor per user, reused when a degenerate draw is resampled.
    cov = _batched_covariances(config, elevations, beta_nlos)
    eigvals, eigvecs = np.linalg.eigh(cov)
    top = eigvals[:, -1]
    if np.any(eigvals[:, 0] < -1e-8 * top):
        raise channel.EigendecompositionFailure("negative covariance eigenvalue")
    kl_factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))[:, None, :]
    mean_term = np.where(los_flags[:, None], los_mean_rows, 0.0)

    noise = rng.standard_normal((n, n_rx, m)) + 1j * rng.standard_normal((n, n_rx, m))
    channels = math.sqrt(0.5) * noise @ kl_factor.transpose(0, 2, 1) \
        + mean_term[:, None, :]

    def redraw(uid: int) -> np.ndarray:
        e = rng.standard_normal((n_rx, m)) + 1j * rng.standard_normal((n_rx, m))
        return math.sqrt(0.5) * e @ kl_factor[uid].T + mean_term[uid][None, :]

    # Effective gains for the active clusters; degenerate draws are resampled.
    reports = []
    channel_rows = []
    for sector in range(1, config.n_sectors + 1):
        active = _active_clusters(plan.clusters[sector], config.clusters_per_sector,
                                  drop_index)
        for col, members in enumerate(active):
            links = []
            for uid in members:
                for attempt in range(DEGENERATE_RETRIES + 1):
                    try:
                        v, gam = transceiver.detection_vector(channels[uid], col)
                        break
                    except transceiver.RankDeficiency:
                        if attempt == DEGENERATE_RETRIES:
                            raise
                        channels[uid] = redraw(uid)
                links.append(transceiver.EffectiveLink(uid, col, sector, v, gam))
            ordered = transceiver.order_cluster(links)
            members[:] = [l.user_id for l in ordered]
            reports.append(ClusterReport(
                sector, col, list(members),
                np.array([l.effective_gain for l in ordered]),
                np.empty(0), np.empty(0), np.empty(0)))

    if collect_channels:
        for uid in sorted(params):
            channel_rows.append(channel.channel_dump_row(
                drop_index, uid, params[uid].sector_id, params[uid], channels[uid]))

    sol = powalloc.solve_power(
        [r.gammas for r in reports], rho=config.rho, r_qos=config.r_qos,
        p_tol=config.p_tol, p_max=config.p_max, objective=config.objective,
        access_mode=config.access_mode, sic_gap_form=config.sic_gap_form,
        slot_scale=1.0 / plan.n_time_slots)

    for report, omin, omega, rates in zip(reports, sol.omega_min, sol.omega, sol.rates):
        report.omega_min = omin
        report.omega = omega
        report.rates = rates

    return DropResult(
        feasible=sol.feasible,
        sum_rate=sol.sum_rate,
        energy_efficiency=sol.energy_efficiency,
        analytic_ee=sol.analytic_ee,
        p_req=sol.p_req,
        total_power=sol.total_power,
        n_time_slots=plan.n_time_slots,
        n_active_users=sum(len(r.user_ids) for r in reports),
        ee_saturated=sol.ee_saturated,
        clusters=reports if collect_detail else [],
        channel_rows=channel_rows,
        plan=plan if collect_detail else None,
    )


def drop_seed_for(master_seed: int, point_index: int, drop_index: int) -> list[int]:
    # Counter-style derivation: independent stream per (point, drop), no
    # dependence on execution order.
    return [master_seed, point_index, drop_index]


def _run_point_drop(args):
    config, point_index, drop_index, master_seed = args
    res = run_drop(config, drop_seed_for(master_seed, point_index, drop_index),
                   drop_index)
    return point_index, drop_index, res


def run_sweep(spec: SweepSpec, out_dir=None, workers: int | None = None
              ) -> SweepResult:
    """Aggregate `spec.n_drops` drops at each swept value; optionally write CSVs."""
    if workers is None:
        workers = int(os.environ.get("SIM_WORKERS", "1"))
    master = spec.base_config.seed
    tasks = []
    for i, value in enumerate(spec.values):
        cfg = apply_sweep_value(spec.base_config, spec.swept_parameter, value)
        for j in range(spec.n_drops):
            tasks.append((cfg, i, j, master))

    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, j, res in pool.map(_run_point_drop, tasks, chunksize=8):
                results[(i, j)] = res
    else:
        for task in tasks:
            i, j, res = _run_point_drop(task)
            results[(i, j)] = res

    z = _z_value(spec.confidence)
    stats = {}
    drop_rows = []
    for i, value in enumerate(spec.values):
        point = [results[(i, j)] for j in range(spec.n_drops)]
        feas = [r for r in point if r.feasible]
        outage = 1.0 - len(feas) / len(point)
        for metric in METRICS:
            if metric == "p_req":
                samples = np.array([r.p_req for r in point])
            else:
                samples = np.array([getattr(r, metric) for r in feas])
            stats[(value, metric)] = (*_mean_ci(samples, z), outage, len(point))
        for j, r in enumerate(point):
            drop_rows.append(dict(
                param_value=value, drop=j, feasible=int(r.feasible),
                ee_saturated=int(r.ee_saturated), n_time_slots=r.n_time_slots,
                n_active_users=r.n_active_users, p_req=r.p_req,
                total_power=r.total_power, sum_rate=r.sum_rate,
                energy_efficiency=r.energy_efficiency, analytic_ee=r.analytic_ee))

    result = SweepResult(spec.swept_parameter, list(spec.values), stats, drop_rows)
    if out_dir is not None:
        write_sweep_csv(result, os.path.join(out_dir, "sweep.csv"))
        write_drops_csv(result, os.path.join(out_dir, "drops.csv"))
    return result


def _mean_ci(samples: np.ndarray, z: float) -> tuple[float, float]:
    if len(samples) == 0:
        return math.nan, math.nan
    if len(samples) == 1:
        return float(samples[0]), math.inf
    return float(samples.mean()), float(z * samples.std(ddof=1) / math.sqrt(len(samples)))


def _z_value(confidence: float) -> float:
    # Two-sided normal quantile via bisection on erf; erfinv is not in math.
    target = confidence
    lo, hi = 0.0, 10.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if math.erf(mid / math.sqrt(2.0)) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# CSV output.  Floats use repr (shortest round-trip) so identical runs give
# byte-identical files.

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(result: SweepResult, path):
    with open(path, "w") as fh:
        fh.write("# sum_rate: bits/s/Hz (slot-normalized); "
                 "energy_efficiency: bits/s/Hz per watt; p_req: watts\n")
        fh.write("param_value,metric,mean,ci_halfwidth,outage_fraction,n_drops\n")
        for value in result.values:
            for metric in METRICS:
                mean, half, outage, n = result.stats[(value, metric)]
                fh.write(",".join([_fmt(value), metric, _fmt(mean), _fmt(half),
                                   _fmt(outage), str(n)]) + "\n")


def write_drops_csv(result: SweepResult, path):
    cols = ["param_value", "drop", "feasible", "ee_saturated", "n_time_slots",
            "n_active_users", "p_req", "total_power", "sum_rate",
            "energy_efficiency", "analytic_ee"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in result.drop_rows:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def write_power_csv(drop_results: list[tuple[int, DropResult]], path):
    """Per-user allocation rows: drop, sector, cluster, user, gamma, omegas, rate."""
    with open(path, "w") as fh:
        fh.write("drop,sector,cluster,user,gamma,omega_min,omega,rate,feasible\n")
        for drop_idx, res in drop_results:
            for rep in res.clusters:
                for k, uid in enumerate(rep.user_ids):
                    fh.write(",".join([
                        str(drop_idx), str(rep.sector), str(rep.index_in_sector),
                        str(uid), _fmt(float(rep.gammas[k])),
                        _fmt(float(rep.omega_min[k])), _fmt(float(rep.omega[k])),
                        _fmt(float(rep.rates[k])), str(int(res.feasible))]) + "\n")


def write_channel_csv(rows: list, m_elements: int, n_antennas: int, path):
    with open(path, "w") as fh:
        fh.write(",".join(channel.channel_dump_header(m_elements, n_antennas)) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def write_gnuplot_script(out_dir, metric: str = "energy_efficiency"):
    """Plain-text gnuplot script plotting `metric` from sweep.csv."""
    path = os.path.join(out_dir, "sweep.gp")
    with open(path, "w") as fh:
        fh.write(
            'set datafile separator ","\n'
            "set key left top\n"
            f'set ylabel "{metric}"\n'
            'set xlabel "swept parameter"\n'
            f'plot "sweep.csv" using 1:($2 eq "{metric}" ? $3 : 1/0) '
            'with linespoints title "mean", \\\n'
            f'     "sweep.csv" using 1:($2 eq "{metric}" ? $3 : 1/0):4 '
            'with yerrorbars title "95% CI"\n')
    return path
