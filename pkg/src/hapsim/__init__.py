"""System-level simulator for a sectorized cylindrical-array aerial base
station serving MIMO-NOMA ground users over spatially correlated Rician
channels."""

from .config import PRESETS, ConfigError, ScenarioConfig, dbm_to_watts, \
    thermal_noise_watts, watts_to_dbm
from .geometry import UserGeometry, drop_users
from .channel import ChannelParams, correlation_matrix, dual_polarized_structure, \
    large_scale_fading, los_probability, los_steering, sample_channel
from .topology import ClusterPlan, assign_sectors, assign_time_slots, \
    build_cluster_plan, form_clusters, los_correlation, n_time_slots
from .transceiver import EffectiveLink, detection_vector, order_cluster, \
    sic_power_check, user_rate
from .powalloc import PowerSolution, bruteforce_cluster_oracle, cluster_rates, \
    energy_efficiency, fractional_level, max_ee_level, min_coefficients, \
    oma_min_coefficients, solve_power, water_fill
from .harness import DropResult, SweepResult, SweepSpec, run_drop, run_sweep

__version__ = "0.1.0"
