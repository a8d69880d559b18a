"""Scenario configuration: array geometry, link budget, QoS targets, run modes.

A scenario is described by a flat set of scalar fields (one `key = value`
pair per line in config files).  Presets follow the NxMxL naming used for
the cylindrical-array scenarios, e.g. "18x4x2" = 18 sectors, 4 elements
(and 4 clusters) per sector, 2 users per cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

SPEED_OF_LIGHT = 2.998e8  # m/s

SPATIAL_MODES = ("correlated", "uncorrelated")
POLARIZATIONS = ("uni", "dual_interleaved")
ACCESS_MODES = ("noma", "oma")
OBJECTIVES = ("max_sum_rate", "max_ee")
SIC_GAP_FORMS = ("absolute", "snr_relative")
CORR_FORMS = ("conjugate", "plain")

# Sector-count x elements-per-sector x users-per-cluster, all with 72 total
# elements on the cylinder.
PRESETS = {
    "18x4x2": (18, 4, 2),
    "12x6x2": (12, 6, 2),
    "9x8x2": (9, 8, 2),
    "18x4x3": (18, 4, 3),
    "12x6x3": (12, 6, 3),
    "9x8x3": (9, 8, 3),
}


def thermal_noise_watts(bandwidth_hz: float, noise_figure_db: float = 7.0) -> float:
    """Receiver noise power: -174 dBm/Hz plus noise figure over the bandwidth."""
    noise_dbm = -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((noise_dbm - 30.0) / 10.0)


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    return 10.0 * math.log10(p_watts) + 30.0


@dataclass
class ScenarioConfig:
    """Full experiment description.

    Angles are stored in the units noted per field (degrees for beamwidths
    and angular spreads, which is how they enter the formulas).  Powers are
    watts, rates bits/s/Hz, antenna spacing in carrier wavelengths.
    """

    n_sectors: int = 18
    elements_per_sector: int = 4
    users_per_cluster: int = 2
    clusters_per_sector: int | None = None   # defaults to elements_per_sector
    user_antennas: int | None = None         # defaults to elements_per_sector
    antenna_spacing: float = 2.0             # wavelengths
    carrier_freq: float = 2.5e9              # Hz
    bandwidth: float = 10e6                  # Hz
    haps_altitude: float = 20e3              # m
    cell_radius: float = 100e3               # m
    # Default budget sits just above the preset scenarios' typical required
    # minimum power (the model carries no antenna or beamforming gains, so
    # serving 144 users at 1 bit/s/Hz over a 100 km cell takes ~77 dBm).
    p_max: float = field(default_factory=lambda: dbm_to_watts(86.0))
    noise_power: float = field(default_factory=lambda: thermal_noise_watts(10e6))
    r_qos: float = 1.0                       # bits/s/Hz
    p_tol: float = field(default_factory=lambda: thermal_noise_watts(10e6))
    phi_3db: float = 65.0                    # degrees
    sigma_theta: float = 5.0                 # degrees, scattering angular spread
    sigma_sf_los: float = 4.0                # dB
    sigma_sf_nlos: float = 6.0               # dB
    kappa: float = 9.61
    omega: float = 0.16
    rho_threshold: float = 0.95
    spatial_mode: str = "correlated"
    polarization: str = "uni"
    access_mode: str = "noma"
    objective: str = "max_sum_rate"
    sic_gap_form: str = "absolute"           # "snr_relative" = divide P_tol by rho*gamma
    cluster_corr_form: str = "conjugate"     # "plain" = non-conjugated inner product
    seed: int = 0

    def __post_init__(self):
        if self.clusters_per_sector is None:
            self.clusters_per_sector = self.elements_per_sector
        if self.user_antennas is None:
            self.user_antennas = self.elements_per_sector
        self.validate()

    def validate(self):
        if self.n_sectors < 1 or self.elements_per_sector < 1:
            raise ConfigError("n_sectors and elements_per_sector must be >= 1")
        if self.users_per_cluster < 1 or self.clusters_per_sector < 1:
            raise ConfigError("users_per_cluster and clusters_per_sector must be >= 1")
        if self.user_antennas < self.elements_per_sector:
            raise ConfigError(
                "user_antennas must be >= elements_per_sector for zero-forcing "
                f"feasibility (got {self.user_antennas} < {self.elements_per_sector})")
        for name in ("p_max", "noise_power", "cell_radius", "haps_altitude",
                     "carrier_freq", "bandwidth", "antenna_spacing", "phi_3db",
                     "sigma_theta"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.p_tol < 0 or self.r_qos < 0:
            raise ConfigError("p_tol and r_qos must be nonnegative")
        if not 0.0 <= self.rho_threshold <= 1.0:
            raise ConfigError("rho_threshold must lie in [0, 1]")
        for name, allowed in (("spatial_mode", SPATIAL_MODES),
                              ("polarization", POLARIZATIONS),
                              ("access_mode", ACCESS_MODES),
                              ("objective", OBJECTIVES),
                              ("sic_gap_form", SIC_GAP_FORMS),
                              ("cluster_corr_form", CORR_FORMS)):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}")
        if self.polarization == "dual_interleaved" and self.elements_per_sector % 2:
            raise ConfigError("dual_interleaved polarization needs an even element count")

    @property
    def rho(self) -> float:
        """Transmit SNR P_max / sigma^2."""
        return self.p_max / self.noise_power

    @property
    def sector_width(self) -> float:
        """Azimuth wedge width delta = 2*pi/N_s, radians."""
        return 2.0 * math.pi / self.n_sectors

    @property
    def total_users(self) -> int:
        return self.n_sectors * self.clusters_per_sector * self.users_per_cluster

    def replace(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)

    @classmethod
    def preset(cls, name: str, **overrides) -> "ScenarioConfig":
        try:
            n_s, m, l = PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        base = dict(n_sectors=n_s, elements_per_sector=m, users_per_cluster=l)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        return cls(**parse_config_file(path))

    def to_file(self, path):
        with open(path, "w") as fh:
            fh.write("# scenario configuration\n")
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")


class ConfigError(ValueError):
    """Invalid scenario configuration or config file."""


_INT_FIELDS = {"n_sectors", "elements_per_sector", "users_per_cluster",
               "clusters_per_sector", "user_antennas", "seed"}
_STR_FIELDS = {"spatial_mode", "polarization", "access_mode", "objective",
               "sic_gap_form", "cluster_corr_form"}


def parse_config_file(path) -> dict:
    """Read flat `key = value` pairs; '#' starts a comment; unknown keys error."""
    known = {f.name for f in fields(ScenarioConfig)}
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            if key in _STR_FIELDS:
                out[key] = value
            elif key in _INT_FIELDS:
                out[key] = int(value)
            else:
                out[key] = float(value)
    return out
