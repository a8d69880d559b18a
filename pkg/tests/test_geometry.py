import math

import numpy as np
import pytest
from scipy import stats

from hapsim.config import ScenarioConfig
from hapsim.geometry import drop_users, look_angles


def many_user_config(n_users: int) -> ScenarioConfig:
    return ScenarioConfig(n_sectors=1, elements_per_sector=1, users_per_cluster=1,
                          clusters_per_sector=n_users, user_antennas=4)


def test_nadir_angles():
    az, el, slant = look_angles(0.0, 0.0, 20000.0)
    assert slant == 20000.0
    assert el == pytest.approx(math.pi / 2)


def test_45_degree_symmetry():
    az, el, slant = look_angles(20000.0, 0.0, 20000.0)
    assert el == pytest.approx(math.pi / 4)
    assert slant == pytest.approx(20000.0 * math.sqrt(2))


def test_azimuth_wraps_to_positive():
    az, _, _ = look_angles(1.0, -1.0, 20000.0)
    assert 0.0 <= az < 2 * math.pi
    assert az == pytest.approx(2 * math.pi - math.pi / 4)


def test_uniform_disk_area_fraction():
    # Monte Carlo counting oracle: area ratio (50/100)^2 = 0.25.
    cfg = many_user_config(10 ** 6)
    users = drop_users(cfg, np.random.default_rng(123))
    radii = np.hypot([u.x for u in users], [u.y for u in users])
    frac = np.mean(radii <= 50e3)
    assert abs(frac - 0.25) < 0.002


def test_fields_mutually_consistent():
    cfg = many_user_config(2000)
    users = drop_users(cfg, np.random.default_rng(7))
    for u in users:
        az, el, slant = look_angles(u.x, u.y, cfg.haps_altitude)
        assert az == pytest.approx(u.azimuth, rel=1e-12)
        assert el == pytest.approx(u.elevation, rel=1e-12)
        assert slant == pytest.approx(u.slant_distance, rel=1e-12)
        assert 0.0 < u.elevation <= math.pi / 2
        assert 0.0 <= u.azimuth < 2 * math.pi


def test_radius_cdf_matches_area_law():
    cfg = many_user_config(10 ** 5)
    users = drop_users(cfg, np.random.default_rng(42))
    radii = np.hypot([u.x for u in users], [u.y for u in users])
    d, _ = stats.kstest(radii / cfg.cell_radius, lambda r: r ** 2)
    assert d < 0.01


def test_minimum_standoff():
    cfg = many_user_config(50000)
    users = drop_users(cfg, np.random.default_rng(3))
    assert min(np.hypot(u.x, u.y) for u in users) >= 1.0
