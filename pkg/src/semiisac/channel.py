"""Fading, path loss and the averaged radar-echo interference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .specfun import DomainError

SPEED_OF_LIGHT = 3e8
FLAT_SPECTRUM_GAMMA_SQ = (2 * math.pi) ** 2 / 12


@dataclass(frozen=True)
class FadingModel:
    """Nakagami-m power fading with unit mean (Gamma(m, 1/m) power gain)."""

    m: int = 3

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ValueError(f"Nakagami shape must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    def pdf(self, x):
        m = self.m
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            logp = m * math.log(m) - specfun.ln_gamma(m) + (m - 1) * np.log(x) - m * x
        return np.where(x > 0, np.exp(logp), 1.0 if m == 1 else 0.0)

    def cdf(self, x):
        return specfun.reg_lower_gamma(self.m, self.m * x) if x > 0 else 0.0


@dataclass(frozen=True)
class LinkGeometry:
    d_c: float = 800.0
    d_r: float = 1300.0
    alpha_c: float = 2.5
    alpha_r: float = 4.5
    f_c: float = 1e9

    def __post_init__(self):
        if self.d_c < 1 or self.d_r < 1:
            raise ValueError("distances must be at least the 1 m reference distance")
        if self.alpha_c < 0 or self.alpha_r < 0:
            raise ValueError("path-loss exponents must be non-negative")
        if not self.f_c > 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.f_c

    @property
    def C_c(self):
        return (SPEED_OF_LIGHT / (4 * math.pi * self.f_c)) ** 2


@dataclass(frozen=True)
class RadarParams:
    duty_cycle: float = 0.01
    pulse_duration: float = 1e-6
    sigma_rcs: float = 0.1
    sigma_tau_sq: float = 1e-12
    gamma_sq: float = FLAT_SPECTRUM_GAMMA_SQ

    def __post_init__(self):
        if not 0 < self.duty_cycle <= 1:
            raise ValueError("duty cycle must lie in (0, 1]")
        for name in ("pulse_duration", "sigma_rcs", "sigma_tau_sq", "gamma_sq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def radar_intercept(geom, radar):
    """``C_r = sigma_RCS * lambda^2 / (4 pi)^3``."""
    return radar.sigma_rcs * geom.wavelength**2 / (4 * math.pi) ** 3


def pathloss_comm(geom, d):
    if d < 1:
        raise DomainError(f"distance must be >= 1 m, got {d}")
    return geom.C_c * d ** (-geom.alpha_c)


def pathloss_radar(geom, radar, d):
    if d < 1:
        raise DomainError(f"distance must be >= 1 m, got {d}")
    return radar_intercept(geom, radar) * d ** (-geom.alpha_r)


def residual_echo_factor(cfg):
    """``gamma^2 beta^2 B^2 sigma_tau^2``: mean power of the echo-prediction residual."""
    bw = cfg.bandwidth
    return cfg.radar.gamma_sq * bw.beta_semi**2 * bw.B**2 * cfg.radar.sigma_tau_sq


def mean_radar_interference(cfg):
    """Average residual echo power at the BS in watts.

    The two radar hops are unit-mean and independent, so the fading drops
    out of the expectation.
    """
    g = cfg.geometry
    return cfg.powers.P_BS * cfg.powers.G_r * pathloss_radar(g, cfg.radar, g.d_r) * residual_echo_factor(cfg)


def product_channel_pdf(m, z):
    """Density of ``|h_rd|^2 |h_ru|^2``: ``2 m^{2m} / Gamma(m)^2 z^{m-1} K0(2 m sqrt z)``."""
    m = specfun._check_shape(m)
    z_arr = np.asarray(z, dtype=float)
    if np.any(~(z_arr > 0)):
        raise DomainError("product_channel_pdf requires z > 0")
    log_c = math.log(2.0) + 2 * m * math.log(m) - 2 * specfun.ln_gamma(m)
    arg = 2 * m * np.sqrt(z_arr)
    from scipy.special import k0e

    out = np.exp(log_c + (m - 1) * np.log(z_arr) - arg) * k0e(arg)
    return float(out) if out.ndim == 0 else out


def product_channel_cdf(m, x, settings=specfun.DEFAULT_QUAD):
    return specfun.meijer_cdf_product_gamma(m, x, settings)


def sample_nakagami_power(m, rng, size=None):
    """Unit-mean Gamma(m, 1/m) draws; numpy's generator uses Marsaglia-Tsang."""
    return rng.gamma(m, 1.0 / m, size=size)
