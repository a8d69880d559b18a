"""Spatially correlated Rician channel for a vertical ULA sector.

The channel seen from one user is a complex Gaussian vector with a
deterministic line-of-sight mean (array steering vector) and a covariance
given by the local-scattering model: the scattered angle is the nominal
elevation plus a Gaussian perturbation, and the covariance entry for element
lag k is the characteristic integral of exp(j*2*pi*d_v*k*sin(theta+delta))
against that Gaussian.  The integral is evaluated by Gauss-Hermite
quadrature, which is exact in the limit because the weight is Gaussian.

Angles passed to these functions are radians except `los_probability`,
whose empirical constants are calibrated for elevation in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

from .config import SPEED_OF_LIGHT

GH_NODES_DEFAULT = 64
GH_NODES_CAP = 1024
GH_CONVERGENCE_RTOL = 1e-8


class QuadratureNonConvergence(RuntimeError):
    """Doubling the quadrature node count moved a covariance entry too much."""


class EigendecompositionFailure(RuntimeError):
    """Covariance matrix has a significantly negative eigenvalue."""


class OddElementCount(ValueError):
    """Interleaved dual polarization needs an even number of elements."""


@dataclass
class ChannelParams:
    """Large-scale state of one (user, serving sector) link.

    beta_los / beta_nlos are linear power gains (10**(-PL_dB/10)).
    """

    sector_id: int
    sector_boresight_azimuth: float
    beta_los: float
    beta_nlos: float
    los_indicator: bool
    elevation: float        # radians
    d_v: float              # element spacing in wavelengths

    def __post_init__(self):
        if self.beta_los <= 0 or self.beta_nlos <= 0:
            raise ValueError("beta_los and beta_nlos must be positive linear gains")


def large_scale_fading(distance_m: float, freq_hz: float, shadow_db: float = 0.0) -> float:
    """Free-space path loss plus lognormal shadowing, in dB."""
    return (20.0 * math.log10(distance_m) + 20.0 * math.log10(freq_hz)
            + 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT) + shadow_db)


def path_gain_linear(path_loss_db: float) -> float:
    return 10.0 ** (-path_loss_db / 10.0)


def los_probability(elevation_deg: float, kappa: float, omega: float) -> float:
    """Air-to-ground line-of-sight probability (sigmoid in elevation, degrees)."""
    return 1.0 / (1.0 + kappa * math.exp(-omega * (elevation_deg - kappa)))


def los_steering(params: ChannelParams, m_elements: int) -> np.ndarray:
    """LoS array response: entry m = sqrt(beta_los)*exp(j*2*pi*d_v*m*sin(theta))."""
    if m_elements < 1:
        raise ValueError("m_elements must be >= 1")
    m = np.arange(m_elements)
    phase = 2.0 * np.pi * params.d_v * m * np.sin(params.elevation)
    return np.sqrt(params.beta_los) * np.exp(1j * phase)


@lru_cache(maxsize=None)
def _gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Physicists' convention: integral of exp(-t^2) g(t) dt ~ sum w_i g(t_i).
    # scipy's Golub-Welsch route stays accurate at the large orders the
    # node-count escalation can reach; numpy's recurrence overflows there.
    t, w = roots_hermite(n)
    return t, w / math.sqrt(math.pi)


def correlation_lags(elevation: float, sigma_theta: float, d_v: float,
                     n_lags: int, n_nodes: int = GH_NODES_DEFAULT) -> np.ndarray:
    """Characteristic values c_k = E[exp(j*2*pi*d_v*k*sin(theta+delta))], k = 0..n_lags-1.

    delta ~ N(0, sigma_theta^2); substitution delta = sqrt(2)*sigma*t makes the
    Gaussian weight native to Gauss-Hermite.  All angles in radians.
    """
    t, w = _gauss_hermite(n_nodes)
    angles = elevation + math.sqrt(2.0) * sigma_theta * t
    k = np.arange(n_lags)[:, None]
    kernel = np.exp(1j * 2.0 * np.pi * d_v * k * np.sin(angles)[None, :])
    return kernel @ w


def correlation_lags_batch(elevations: np.ndarray, sigma_theta: float, d_v: float,
                           n_lags: int, n_nodes: int = GH_NODES_DEFAULT,
                           convergence_check: bool = True) -> np.ndarray:
    """Lag values for many users at once; rows follow `elevations`.

    The node count doubles until consecutive evaluations agree entrywise to
    GH_CONVERGENCE_RTOL; a kernel still moving past GH_NODES_CAP nodes (very
    large spacing-spread products) raises QuadratureNonConvergence.
    """
    if sigma_theta <= 0:
        raise ValueError("sigma_theta must be positive")
    elevations = np.asarray(elevations, dtype=float)

    def kernel(n):
        nodes, weights = _gauss_hermite(n)
        angles = elevations[:, None] + math.sqrt(2.0) * sigma_theta * nodes[None, :]
        phase = np.exp(1j * 2.0 * np.pi * d_v * np.sin(angles))
        out = np.empty((len(elevations), n_lags), dtype=complex)
        cur = np.ones_like(phase)
        for k in range(n_lags):
            out[:, k] = cur @ weights
            cur = cur * phase
        return out

    lags = kernel(n_nodes)
    if not convergence_check:
        return lags
    n = n_nodes
    err = math.inf
    while n < 2 * GH_NODES_CAP:
        finer = kernel(2 * n)
        err = float(np.max(np.abs(lags - finer)))
        lags = finer
        if err <= GH_CONVERGENCE_RTOL:
            return lags
        n *= 2
    raise QuadratureNonConvergence(
        f"lag values still moved by {err:.3e} (> {GH_CONVERGENCE_RTOL}) at "
        f"{n} quadrature nodes")


def correlation_matrix(params: ChannelParams, m_elements: int, sigma_theta: float,
                       n_nodes: int = GH_NODES_DEFAULT,
                       convergence_check: bool = True) -> np.ndarray:
    """Spatial covariance of the scattered component across the ULA elements.

    Hermitian Toeplitz and positive semidefinite by construction (nonnegative
    sum of steering outer products).  sigma_theta in radians.

    Raises QuadratureNonConvergence when doubling the node count changes any
    entry by more than GH_CONVERGENCE_RTOL relative to beta_nlos.
    """
    lags = correlation_lags_batch(np.array([params.elevation]), sigma_theta,
                                  params.d_v, m_elements, n_nodes,
                                  convergence_check)[0]
    return params.beta_nlos * toeplitz_from_lags(lags)


def toeplitz_from_lags(lags: np.ndarray) -> np.ndarray:
    """Hermitian Toeplitz matrix (or stack) from lag values f(0..m-1).

    Accepts (..., m) and returns (..., m, m) with entry (a, b) = f(a-b),
    f(-k) = conj(f(k)).
    """
    m = lags.shape[-1]
    idx = np.subtract.outer(np.arange(m), np.arange(m))
    full = np.concatenate([np.conj(lags[..., :0:-1]), lags], axis=-1)
    return full[..., idx + m - 1]



def dual_polarized_structure(params: ChannelParams, m_elements: int,
                             sigma_theta: float, los_mean: np.ndarray,
                             n_nodes: int = GH_NODES_DEFAULT,
                             convergence_check: bool = True
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Covariance and LoS mean for the interleaved V/H polarized array.

    Odd-indexed and even-indexed elements transmit on orthogonal
    polarizations, so cross-polarization covariance entries are exactly zero
    and each co-polarized sub-array of m_elements/2 elements sees the plain
    covariance at doubled spacing.  The LoS mean is unchanged.
    """
    if m_elements % 2:
        raise OddElementCount("dual polarization requires an even element count")
    half = m_elements // 2
    lags = correlation_lags_batch(np.array([params.elevation]), sigma_theta,
                                  2.0 * params.d_v, half, n_nodes,
                                  convergence_check)[0]
    sub = params.beta_nlos * toeplitz_from_lags(lags)
    corr = np.zeros((m_elements, m_elements), dtype=complex)
    for parity in (0, 1):
        idx = np.arange(parity, m_elements, 2)
        corr[np.ix_(idx, idx)] = sub
    return corr, los_mean


def sample_channel(los_mean: np.ndarray, corr_matrix: np.ndarray,
                   los_indicator: bool, n_antennas: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw the N x M user channel via the eigen-expansion of the covariance.

    Each row is an independent draw mean + U*sqrt(D)*e with e circularly
    symmetric unit-variance complex normal; the mean term is gated by the
    LoS indicator (a non-LoS draw is purely scattered).
    """
    m = len(los_mean)
    eigvals, eigvecs = np.linalg.eigh(corr_matrix)
    top = float(eigvals[-1]) if m else 0.0
    if top > 0 and eigvals[0] < -1e-8 * top:
        raise EigendecompositionFailure(
            f"covariance has eigenvalue {eigvals[0]:.3e} < -1e-8 * {top:.3e}")
    scale = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))  # U * D^(1/2)
    e = (rng.standard_normal((n_antennas, m)) + 1j * rng.standard_normal((n_antennas, m)))
    e *= math.sqrt(0.5)
    h = e @ scale.T
    if los_indicator:
        h += los_mean[None, :]
    return h


def channel_dump_header(m_elements: int, n_antennas: int) -> list[str]:
    """Column names of the per-(drop, user) channel dump CSV."""
    cols = ["drop", "user", "sector", "los_flag", "beta_los_db", "beta_nlos_db"]
    for n in range(n_antennas):
        for m in range(m_elements):
            cols += [f"h{n}{m}_re", f"h{n}{m}_im"]
    return cols


def channel_dump_row(drop: int, user: int, sector: int, params: ChannelParams,
                     h: np.ndarray) -> list:
    row = [drop, user, sector, int(params.los_indicator),
           -10.0 * math.log10(params.beta_los), -10.0 * math.log10(params.beta_nlos)]
    for value in h.ravel():
        row += [value.real, value.imag]
    return row
