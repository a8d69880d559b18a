"""Acceptance suite: one test per numbered criterion.

Each criterion prints a PASS/FAIL line (on the real stdout, so it shows in
any run mode).  Monte Carlo sweeps reuse a module fixture; criterion 10
re-runs the whole sweep set and compares output bytes.

Criterion 7 is asserted twice: once literally at the specified 30-50 dBm
window (which the scenario's own link budget cannot serve; that test
documents the defect and fails), and once at the window that brackets the
feasibility knee, where the required curve shape is checked for real.
"""

import math
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from hapsim.channel import correlation_matrix, sample_channel
from hapsim.config import ScenarioConfig, dbm_to_watts
from hapsim.harness import SweepSpec, run_drop, run_sweep, drop_seed_for
from hapsim.powalloc import bruteforce_budget_profile, cluster_rates, \
    fill_cluster_with_power, min_coefficients, solve_power
from hapsim.topology import assign_time_slots, n_time_slots
from hapsim.transceiver import detection_vector, nulling_residual, sic_power_check
from tests.test_channel import make_params, trapezoid_lags

Z95 = 1.959963984540054

POWERS_MAIN = [80.0 + k for k in range(10)]       # dBm, brackets the outage knee
POWERS_SPACING = [112.0 + k for k in range(10)]   # half-wavelength needs far more
POWERS_SHAPE = [78.0 + 2 * k for k in range(10)]
POWERS_LITERAL = [30.0 + 20.0 * k / 9 for k in range(10)]
RQOS_VALUES = [round(0.25 + 0.3 * k, 2) for k in range(10)]
N_DROPS = 200
WORKERS = 2


@contextmanager
def criterion(num, label):
    try:
        yield
    except BaseException:
        print(f"\n[acceptance] criterion {num:>2} ({label}): FAIL",
              file=sys.__stdout__, flush=True)
        raise
    print(f"\n[acceptance] criterion {num:>2} ({label}): PASS",
          file=sys.__stdout__, flush=True)


def paired_ee_diffs(result_hi, result_lo):
    """Per-point mean/CI of per-drop efficiency differences (hi - lo)."""
    out = {}
    for value in result_hi.values:
        pairs = {}
        for row in result_hi.drop_rows:
            if row["param_value"] == value and row["feasible"]:
                pairs[row["drop"]] = row["energy_efficiency"]
        diffs = []
        for row in result_lo.drop_rows:
            if row["param_value"] == value and row["feasible"] and \
                    row["drop"] in pairs:
                diffs.append(pairs[row["drop"]] - row["energy_efficiency"])
        diffs = np.array(diffs)
        if len(diffs) < 2:
            out[value] = (math.nan, math.inf, 0)
        else:
            out[value] = (float(diffs.mean()),
                          float(Z95 * diffs.std(ddof=1) / math.sqrt(len(diffs))),
                          len(diffs))
    return out


def count_separated(diffs_by_value) -> int:
    return sum(1 for mean, half, _ in diffs_by_value.values()
               if not math.isnan(mean) and mean - half > 0.0)


# --- criterion 1: correlation kernel ----------------------------------------

def test_c1_correlation_kernel_matches_trapezoid_oracle():
    with criterion(1, "correlation kernel vs brute-force quadrature"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        m = 4
        for trial in range(100):
            d_v = rng.uniform(0.25, 4.0)
            theta = rng.uniform(0.05, 1.5)
            sigma = math.radians(rng.uniform(1.0, 10.0))
            corr = correlation_matrix(make_params(theta, d_v), m, sigma)
            assert np.max(np.abs(corr - corr.conj().T)) < 1e-12
            eig = np.linalg.eigvalsh(corr)
            assert eig[0] >= -1e-10 * eig[-1]
            want = trapezoid_lags(theta, sigma, d_v, m)
            if trial < 10:  # oracle resolution self-check
                coarse = trapezoid_lags(theta, sigma, d_v, m, n_points=5 * 10 ** 5)
                assert np.max(np.abs(want - coarse)) < 1e-9
            for lag in range(m):
                err = abs(corr[lag, 0] - want[lag])
                assert err / max(abs(want[lag]), 1e-30) < 1e-7 or err < 1e-7
        assert time.perf_counter() - t0 < 30.0


# --- criterion 2: Karhunen-Loeve sampling fidelity ---------------------------

def test_c2_kl_sampling_covariance():
    with criterion(2, "KL sampling covariance"):
        t0 = time.perf_counter()
        corr = correlation_matrix(make_params(math.radians(30.0), 2.0), 4,
                                  math.radians(5.0))
        rng = np.random.default_rng(202)
        h = sample_channel(np.zeros(4), corr, False, 10 ** 5, rng)
        cov = h.T @ h.conj() / len(h)
        rel = np.linalg.norm(cov - corr) / np.linalg.norm(corr)
        assert rel < 0.05
        assert time.perf_counter() - t0 < 10.0


# --- criterion 3: zero-forcing detection -------------------------------------

def test_c3_zero_forcing_nulling():
    with criterion(3, "ZF nulling and projection gain"):
        rng = np.random.default_rng(303)
        for _ in range(1000):
            h = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            col = int(rng.integers(0, 4))
            v, gamma = detection_vector(h, col)
            assert nulling_residual(v, h, col) < 1e-9 * np.linalg.norm(h)
            q, _ = np.linalg.qr(np.delete(h, col, axis=1))
            resid = h[:, col] - q @ (q.conj().T @ h[:, col])
            closed = float(np.linalg.norm(resid) ** 2)
            assert abs(gamma - closed) <= 1e-10 * closed


# --- criterion 4: constraint satisfaction on the reference preset ------------

def test_c4_constraints_on_feasible_drops():
    with criterion(4, "QoS/SIC/budget on 1000 feasible drops"):
        cfg = ScenarioConfig.preset("18x4x2")
        n_feasible = 0
        attempts = 0
        while n_feasible < 1000:
            res = run_drop(cfg, drop_seed_for(404, 0, attempts), attempts,
                           collect_detail=True)
            attempts += 1
            assert attempts <= 1600, "outage far above expectation"
            if not res.feasible:
                continue
            n_feasible += 1
            total = 0.0
            for rep in res.clusters:
                assert np.all(rep.rates >= cfg.r_qos - 1e-9)
                ok, _ = sic_power_check(rep.omega, rep.gammas, cfg.p_max, cfg.p_tol)
                assert ok
                total += float(np.sum(rep.omega))
            assert 1.0 - 1e-9 <= total <= 1.0 + 1e-9


# --- criterion 5: residual power belongs to the strongest user ---------------

def test_c5_transfer_toward_leader_always_helps():
    with criterion(5, "coefficient transfer to the cluster leader"):
        rng = np.random.default_rng(505)
        checked = 0
        while checked < 10 ** 4:
            l = int(rng.integers(2, 4))
            gains = np.sort(rng.lognormal(0.0, 0.8, l))[::-1]
            if np.min(-np.diff(gains)) <= 1e-9:
                continue
            omin, _, _ = min_coefficients(gains, 100.0, 0.8, 0.001, 1.0)
            if omin.sum() > 0.8:
                continue
            omega = omin + rng.uniform(0.0, (0.95 - omin.sum()) / l, l)
            base = cluster_rates(gains, omega, 100.0).sum()
            r = int(rng.integers(1, l))
            eps = rng.uniform(0.0, 1.0) * (omega[r] - omin[r])
            if eps <= 0.0:
                continue
            shifted = omega.copy()
            shifted[r] -= eps
            shifted[0] += eps
            assert cluster_rates(gains, shifted, 100.0).sum() > base
            checked += 1


# --- criterion 6: two-cluster optimality against the grid oracle -------------

def test_c6_two_cluster_optimality():
    with criterion(6, "water filling vs exhaustive grid"):
        rng = np.random.default_rng(606)
        step = 1e-3
        checked = 0
        while checked < 1000:
            gains = [np.sort(rng.lognormal(0.0, 0.7, 2))[::-1] for _ in range(2)]
            r_qos = rng.uniform(1.0, 1.4)
            kw = dict(rho=300.0, r_qos=r_qos, p_tol=0.0, p_max=1.0)
            sol = solve_power(gains, **kw)
            if not sol.feasible or sol.p_req > 0.8:
                continue
            checked += 1

            profiles = [bruteforce_budget_profile(g, 300.0, r_qos, 0.0, 1.0,
                                                  budget=1.0, step=step)
                        for g in gains]
            n_bins = len(profiles[0]) - 1
            split = profiles[0][:, None] + profiles[1][None, :]
            b1, b2 = np.meshgrid(np.arange(n_bins + 1), np.arange(n_bins + 1),
                                 indexing="ij")
            split[b1 + b2 > n_bins] = -math.inf
            oracle = float(split.max())

            # Continuity bound: each coordinate sits within one grid step of
            # the continuum, and sum-rate slopes are at most rho*gamma/ln 2.
            bound = step * sum(300.0 * g[0] / math.log(2.0) for g in gains)
            assert sol.sum_rate >= oracle - bound
            assert sol.sum_rate >= oracle - 1e-6  # observed: algorithm wins outright

            if checked <= 200:
                base = math.fsum(cluster_rates(g, w, 300.0).sum()
                                 for g, w in zip(gains, sol.omega))
                extras = [float(w.sum() - m.sum())
                          for w, m in zip(sol.omega, sol.omega_min)]
                for donor, receiver in ((0, 1), (1, 0)):
                    for dp in (0.01, 0.05):
                        if extras[donor] < dp:
                            continue
                        new = [fill_cluster_with_power(gains[donor],
                                                       extras[donor] - dp,
                                                       300.0, r_qos, 0.0, 1.0),
                               fill_cluster_with_power(gains[receiver],
                                                       extras[receiver] + dp,
                                                       300.0, r_qos, 0.0, 1.0)]
                        shifted = math.fsum(
                            cluster_rates(g, w, 300.0).sum() for g, w in
                            zip((gains[donor], gains[receiver]), new))
                        assert shifted - base <= 1e-12


# --- criterion 7: efficiency-versus-power curve shape -------------------------

def run_objective_pair(powers, preset="18x4x2", n_drops=N_DROPS, seed=707):
    cfg = ScenarioConfig.preset(preset, seed=seed)
    res = {}
    for objective in ("max_ee", "max_sum_rate"):
        spec = SweepSpec(cfg.replace(objective=objective), "p_max_dbm",
                         list(powers), n_drops)
        res[objective] = run_sweep(spec, workers=WORKERS)
    return res


def point_rows(result, value):
    return [r for r in result.drop_rows if r["param_value"] == value]


def ee_shape_assertions(res, powers):
    maxee, maxr = res["max_ee"], res["max_sum_rate"]

    evaluable = [v for v in powers
                 if any(r["feasible"] for r in point_rows(maxee, v))]
    assert len(evaluable) >= 3, (
        "no feasible drops at these budgets: the preset needs roughly 77 dBm "
        "before the per-user rate floors fit inside the power constraint")

    # Efficiency under the efficiency objective never falls below the
    # sum-rate objective's efficiency, drop by drop.
    for v in evaluable:
        ee_rows = {r["drop"]: r for r in point_rows(maxee, v) if r["feasible"]}
        for row in point_rows(maxr, v):
            if row["feasible"] and row["drop"] in ee_rows:
                assert (ee_rows[row["drop"]]["energy_efficiency"]
                        >= row["energy_efficiency"] - 1e-9)

    # Constancy above the first saturated point.  Compare like-with-like:
    # hold the drop population fixed (p_req within the anchor budget, peak
    # inside the budget) so outage-driven selection cannot tilt the means.
    anchor = None
    for v in evaluable:
        rows = [r for r in point_rows(maxee, v) if r["feasible"]]
        sat = np.mean([r["ee_saturated"] for r in rows]) if rows else 0.0
        outage = 1.0 - len(rows) / N_DROPS
        if sat >= 0.95 and outage <= 0.10:
            anchor = v
            break
    assert anchor is not None, "no saturated sweep point with low outage"
    cap = dbm_to_watts(anchor)

    def anchored_mean(v):
        vals = [r["energy_efficiency"] for r in point_rows(maxee, v)
                if r["feasible"] and r["ee_saturated"] and r["p_req"] <= cap]
        vals = np.array(vals)
        return (float(vals.mean()),
                float(Z95 * vals.std(ddof=1) / math.sqrt(len(vals))))

    m0, h0 = anchored_mean(anchor)
    for v in [v for v in evaluable if v > anchor]:
        m, h = anchored_mean(v)
        assert abs(m - m0) <= h + h0, (
            f"max_ee curve moved between {anchor} and {v} dBm: "
            f"{m0:.4g}+-{h0:.2g} vs {m:.4g}+-{h:.2g}")


def test_c7_ee_shape_literal_window():
    """Criterion 7 exactly as specified: sweep 30-50 dBm.

    The scenario cannot carry 144 users at 1 bit/s/Hz below roughly 77 dBm
    (free-space loss over a 100 km cell with unit-gain elements), so every
    drop in this window is infeasible and the required curve does not exist.
    Kept failing deliberately; see the feasible-window twin below for the
    actual shape check.
    """
    with criterion(7, "EE shape, literal 30-50 dBm window"):
        res = run_objective_pair(POWERS_LITERAL)
        ee_shape_assertions(res, POWERS_LITERAL)


def test_c7_ee_shape_feasible_window():
    with criterion(7, "EE shape at the feasibility knee"):
        t0 = time.perf_counter()
        res = run_objective_pair(POWERS_SHAPE)
        ee_shape_assertions(res, POWERS_SHAPE)
        assert time.perf_counter() - t0 < 300.0


# --- criterion 8: qualitative trend suite -------------------------------------

def run_trend_suite(out_root):
    """All criterion-8 sweeps; returns {name: SweepResult} and writes CSVs."""
    jobs = {}

    def add(name, preset, param, values, **overrides):
        cfg = ScenarioConfig.preset(preset, seed=808, **overrides)
        jobs[name] = SweepSpec(cfg, param, list(values), N_DROPS)

    add("corr", "18x4x2", "p_max_dbm", POWERS_MAIN)
    add("uncorr", "18x4x2", "p_max_dbm", POWERS_MAIN, spatial_mode="uncorrelated")
    add("oma", "18x4x2", "p_max_dbm", POWERS_MAIN, access_mode="oma")
    add("spacing_wide", "18x4x2", "p_max_dbm", POWERS_SPACING)
    add("spacing_narrow", "18x4x2", "p_max_dbm", POWERS_SPACING,
        antenna_spacing=0.5)
    add("uni_9x8", "9x8x2", "p_max_dbm", POWERS_MAIN)
    add("dual_9x8", "9x8x2", "p_max_dbm", POWERS_MAIN,
        polarization="dual_interleaved")
    add("dual_18x4", "18x4x2", "p_max_dbm", POWERS_MAIN,
        polarization="dual_interleaved")
    add("rqos", "18x4x2", "r_qos", RQOS_VALUES)

    results = {}
    for name, spec in jobs.items():
        out_dir = out_root / name
        out_dir.mkdir(parents=True, exist_ok=True)
        results[name] = run_sweep(spec, out_dir=out_dir, workers=WORKERS)
    return results


@pytest.fixture(scope="module")
def trend_results(tmp_path_factory):
    root = tmp_path_factory.mktemp("trends_run1")
    t0 = time.perf_counter()
    results = run_trend_suite(root)
    return results, root, time.perf_counter() - t0


def test_c8_qualitative_trends(trend_results):
    with criterion(8, "qualitative trend suite"):
        results, _, elapsed = trend_results

        # (a) spatial correlation costs efficiency
        assert count_separated(
            paired_ee_diffs(results["uncorr"], results["corr"])) >= 7

        # (b) superposed access beats orthogonal time sharing
        assert count_separated(
            paired_ee_diffs(results["corr"], results["oma"])) >= 7

        # (c) wider element spacing decorrelates and wins
        assert count_separated(
            paired_ee_diffs(results["spacing_wide"], results["spacing_narrow"])) >= 7

        # (d) interleaved polarization wins, and wins more with 8 elements
        gaps_9x8 = paired_ee_diffs(results["dual_9x8"], results["uni_9x8"])
        assert count_separated(gaps_9x8) >= 7
        gaps_18x4 = paired_ee_diffs(results["dual_18x4"], results["corr"])
        wider = 0
        for v in POWERS_MAIN:
            m9, h9, n9 = gaps_9x8[v]
            m4, h4, n4 = gaps_18x4[v]
            if math.isnan(m9) or math.isnan(m4):
                continue
            se = math.hypot(h9, h4)
            if m9 - m4 > se:
                wider += 1
        assert wider >= 7

        # (e) efficiency flat in the rate floor, then decreasing
        rqos = results["rqos"]
        stats = {v: (rqos.mean(v, "energy_efficiency"),
                     rqos.ci_halfwidth(v, "energy_efficiency"))
                 for v in RQOS_VALUES}
        m0, h0 = stats[RQOS_VALUES[0]]
        for v in RQOS_VALUES[1:3]:
            m, h = stats[v]
            assert abs(m - m0) <= h + h0
        m_last, h_last = stats[RQOS_VALUES[-1]]
        assert m_last + h_last < m0 - h0

        assert elapsed < 1200.0


# --- criterion 9: slot arithmetic ---------------------------------------------

def test_c9_time_slot_pattern():
    with criterion(9, "time-slot count and pattern"):
        cfg = ScenarioConfig.preset("18x4x2")
        n_t = n_time_slots(cfg.phi_3db, 360.0 / cfg.n_sectors)
        assert n_t == 5
        slots = assign_time_slots(cfg.n_sectors, n_t)
        assert [k for k, s in slots.items() if s == 1] == [1, 6, 11, 16]


# --- criterion 10: byte-identical reruns ---------------------------------------

def test_c10_deterministic_reruns(trend_results, tmp_path_factory):
    with criterion(10, "byte-identical rerun of the trend suite"):
        _, first_root, _ = trend_results
        second_root = tmp_path_factory.mktemp("trends_run2")
        run_trend_suite(second_root)
        compared = 0
        for csv1 in sorted(first_root.rglob("*.csv")):
            csv2 = second_root / csv1.relative_to(first_root)
            assert csv2.exists()
            assert csv1.read_bytes() == csv2.read_bytes(), csv1.name
            compared += 1
        assert compared == 18  # sweep.csv + drops.csv for nine sweeps
