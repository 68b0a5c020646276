"""System configuration, derived link constants and the exact SINR model.

The SINR functions broadcast over numpy arrays, so the Monte Carlo module
feeds whole batches of fading draws through the same expressions the
closed forms are derived from.
"""

from __future__ import annotations

import copy
import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import (
    FadingModel,
    LinkGeometry,
    RadarParams,
    mean_radar_interference,
    pathloss_comm,
    pathloss_radar,
    residual_echo_factor,
)

BOLTZMANN = 1.380649e-23


class ContractError(ValueError):
    """Invalid combination of scenario, user and detection stage."""


class Scenario(str, enum.Enum):
    FD_ISAC = "fd"
    OMA_SEMI = "oma"
    NOMA_SEMI_I = "noma-i"
    NOMA_SEMI_II = "noma-ii"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "fdisac": cls.FD_ISAC, "fd-isac": cls.FD_ISAC,
            "omasemi": cls.OMA_SEMI, "oma-semi": cls.OMA_SEMI,
            "nomasemii": cls.NOMA_SEMI_I, "noma-semi-i": cls.NOMA_SEMI_I, "noma1": cls.NOMA_SEMI_I,
            "nomasemiii": cls.NOMA_SEMI_II, "noma-semi-ii": cls.NOMA_SEMI_II, "noma2": cls.NOMA_SEMI_II,
        }
        key = str(value).strip().lower()
        try:
            return cls(key)
        except ValueError:
            if key in aliases:
                return aliases[key]
            raise ValueError(f"unknown scenario {value!r}") from None

    @property
    def is_noma(self):
        return self in (Scenario.NOMA_SEMI_I, Scenario.NOMA_SEMI_II)

    def near_user(self):
        """User detected first by SIC."""
        if self is Scenario.NOMA_SEMI_I:
            return "c"
        if self is Scenario.NOMA_SEMI_II:
            return "r"
        raise ContractError(f"{self.value} has no SIC ordering")


def _check_user(user):
    if user not in ("c", "r"):
        raise ContractError(f"user must be 'c' or 'r', got {user!r}")
    return user


# ---------------------------------------------------------------------------
# Configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandwidthSplit:
    alpha_semi: float = 0.0
    beta_semi: float = 1.0
    epsilon_semi: float = 0.0
    B: float = 10e6

    def __post_init__(self):
        for name in ("alpha_semi", "beta_semi", "epsilon_semi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        total = self.alpha_semi + self.beta_semi + self.epsilon_semi
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"bandwidth fractions must sum to 1, got {total!r}")
        if not self.B > 0:
            raise ValueError("bandwidth B must be positive")

    @property
    def B_R(self):
        return self.alpha_semi * self.B

    @property
    def B_I(self):
        return self.beta_semi * self.B

    @property
    def B_W(self):
        return self.epsilon_semi * self.B


@dataclass(frozen=True)
class PowerConfig:
    P_c: float = 0.01
    P_r: float = 0.01
    P_BS: float = 0.01
    G_c: float = 1.0
    G_r: float = 1.0
    varsigma_c: float = 0.0
    varsigma_r: float = 0.0

    def __post_init__(self):
        for name in ("P_c", "P_r", "P_BS", "G_c", "G_r"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("varsigma_c", "varsigma_r"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")

    @property
    def perfect_sic(self):
        return self.varsigma_c == 0 and self.varsigma_r == 0


@dataclass(frozen=True)
class NoiseModel:
    k_B: float = BOLTZMANN
    T_temp: float = 724.0

    def power(self, bandwidth_hz):
        return self.k_B * self.T_temp * bandwidth_hz


@dataclass(frozen=True)
class Thresholds:
    gamma_th: float = 1.0
    gamma_sic: float = 0.4
    gamma_th_oma: float = 1.0

    def __post_init__(self):
        for name in ("gamma_th", "gamma_sic", "gamma_th_oma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_rates(cls, rate_noma, rate_oma=None, gamma_sic=0.4):
        rate_oma = rate_noma if rate_oma is None else rate_oma
        return cls(2.0**rate_noma - 1.0, gamma_sic, 2.0**rate_oma - 1.0)


@dataclass(frozen=True)
class SystemConfig:
    bandwidth: BandwidthSplit = field(default_factory=BandwidthSplit)
    powers: PowerConfig = field(default_factory=PowerConfig)
    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    radar: RadarParams = field(default_factory=RadarParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    thresholds: Thresholds = field(default_factory=Thresholds)
    fading: FadingModel = field(default_factory=FadingModel)

    @property
    def m(self):
        return self.fading.m

    @property
    def noise_power(self):
        """Noise power in the ISaC sub-band, ``k_B T beta B``."""
        return self.noise.power(self.bandwidth.B_I)

    def replace(self, **sections):
        """Copy with whole sections or dotted ``section.field`` values swapped."""
        data = config_to_dict(self)
        for key, value in sections.items():
            if "." in key or "__" in key:
                sec, name = key.replace("__", ".").split(".", 1)
                data[sec][name] = value
            else:
                data[key] = value if isinstance(value, dict) else _section_dict(value)
        return config_from_dict(data)

    def swapped_geometry(self):
        """Same system with the two users' distances exchanged."""
        g = self.geometry
        return self.replace(**{"geometry.d_c": g.d_r, "geometry.d_r": g.d_c})


def _section_dict(section):
    d = asdict(section)
    if isinstance(section, PowerConfig):
        return _powers_to_file(d)
    return d


# ---------------------------------------------------------------------------
# Config files and presets
# ---------------------------------------------------------------------------

def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * math.log10(watts) + 30.0


_POWER_DBM_FIELDS = ("P_c", "P_r", "P_BS")

PRESETS = {
    "paper-sec6": {
        "bandwidth": {"alpha_semi": 0.0, "beta_semi": 1.0, "epsilon_semi": 0.0, "B": 10e6},
        "powers": {"P_c_dBm": 10.0, "P_r_dBm": 10.0, "P_BS_dBm": 10.0, "G_c": 1.0, "G_r": 1.0,
                   "varsigma_c": 0.0, "varsigma_r": 0.0},
        "geometry": {"d_c": 800.0, "d_r": 1300.0, "alpha_c": 2.5, "alpha_r": 4.5, "f_c": 1e9},
        "radar": {"duty_cycle": 0.01, "pulse_duration": 1e-6, "sigma_rcs": 0.1,
                  "sigma_tau_sq": 1e-12, "gamma_sq": (2 * math.pi) ** 2 / 12},
        "noise": {"k_B": BOLTZMANN, "T_temp": 724.0},
        "thresholds": {"gamma_th": 1.0, "gamma_sic": 0.4, "gamma_th_oma": 1.0},
        "fading": {"m": 3},
    },
}
# Scenario-II geometry: far communication transmitter, near radar target
PRESETS["paper-sec6-ii"] = copy.deepcopy(PRESETS["paper-sec6"])
PRESETS["paper-sec6-ii"]["geometry"].update(d_c=1300.0, d_r=800.0)


def _powers_to_file(d):
    out = {k: v for k, v in d.items() if k not in _POWER_DBM_FIELDS}
    for name in _POWER_DBM_FIELDS:
        out[f"{name}_dBm"] = watts_to_dbm(d[name])
    return out


def _deep_merge(base, overrides):
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def config_from_dict(data):
    """Build a config from the file schema (powers in dBm or watts).

    A ``preset`` key selects a base that the remaining sections override.
    """
    data = dict(data)
    preset = data.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
        data = _deep_merge(PRESETS[preset], data)
    unknown = set(data) - {"bandwidth", "powers", "geometry", "radar", "noise", "thresholds", "fading"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    powers = dict(data.get("powers", {}))
    for name in _POWER_DBM_FIELDS:
        key = f"{name}_dBm"
        if key in powers:
            if name in powers:
                raise ValueError(f"give either {name} or {key}, not both")
            powers[name] = dbm_to_watts(powers.pop(key))
    try:
        return SystemConfig(
            bandwidth=BandwidthSplit(**data.get("bandwidth", {})),
            powers=PowerConfig(**powers),
            geometry=LinkGeometry(**data.get("geometry", {})),
            radar=RadarParams(**data.get("radar", {})),
            noise=NoiseModel(**data.get("noise", {})),
            thresholds=Thresholds(**data.get("thresholds", {})),
            fading=FadingModel(**data.get("fading", {})),
        )
    except TypeError as exc:
        raise ValueError(f"invalid config field: {exc}") from None


def config_to_dict(cfg):
    d = {name: asdict(getattr(cfg, name)) for name in
         ("bandwidth", "powers", "geometry", "radar", "noise", "thresholds", "fading")}
    d["powers"] = _powers_to_file(d["powers"])
    return d


def preset(name="paper-sec6", **overrides):
    """Named preset with optional dotted overrides, e.g. ``**{"fading.m": 1}``."""
    cfg = config_from_dict({"preset": name})
    return cfg.replace(**overrides) if overrides else cfg


def load_config(path):
    """Read a JSON config file, or resolve a preset name."""
    if str(path) in PRESETS:
        return preset(str(path))
    with open(Path(path), encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Derived constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkBudget:
    """Everything the closed forms need, reduced to numbers for one band.

    ``gain_c``/``gain_r`` are the communication-link intercepts
    ``G_c C_c d^{-alpha_c}`` of the two users, ``echo`` the mean residual
    echo power and ``noise`` the band's thermal noise.
    """

    m: int
    P_c: float
    P_r: float
    gain_c: float
    gain_r: float
    echo: float
    noise: float


def link_budget(cfg, band="isac"):
    g = cfg.geometry
    p = cfg.powers
    gain_c = p.G_c * pathloss_comm(g, g.d_c)
    gain_r = p.G_c * pathloss_comm(g, g.d_r)
    if band == "isac":
        if cfg.bandwidth.beta_semi <= 0:
            raise ValueError("ISaC-band metrics need beta_semi > 0")
        echo = mean_radar_interference(cfg)
        noise = cfg.noise_power
    elif band == "comm":
        if cfg.bandwidth.epsilon_semi <= 0:
            raise ValueError("communication-only band metrics need epsilon_semi > 0")
        echo = 0.0
        noise = cfg.noise.power(cfg.bandwidth.B_W)
    else:
        raise ValueError(f"band must be 'isac' or 'comm', got {band!r}")
    return LinkBudget(cfg.m, p.P_c, p.P_r, gain_c, gain_r, echo, noise)


@dataclass(frozen=True)
class DerivedConstants:
    Omega_c: float
    Omega_r: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    b1: float
    b2: float
    b3: float
    Lambda1: float
    Lambda2: float
    Lambda3: float
    Lambda4: float
    Lambda5: float
    Xi_r1: float


def derive_constants(cfg, band="isac"):
    """Derived link-budget shorthands. ``Omega_j`` excludes the threshold factor.

    ``Xi_r1`` is the deterministic echo-SNR prefactor without the
    ``d_r^{-alpha_r}`` path loss, so that ``2 T beta B gamma_echo`` equals
    ``Xi_r1 * d_r^{-alpha_r} * |h_rd|^2 |h_ru|^2`` under perfect SIC.
    """
    lb = link_budget(cfg, band)
    return _constants_from_budget(lb, cfg.thresholds.gamma_sic, _xi(cfg) if band == "isac" else math.nan)


def _xi(cfg):
    bw = cfg.bandwidth
    g = cfg.geometry
    p = cfg.powers
    c_r = pathloss_radar(g, cfg.radar, 1.0)
    return (2 * cfg.radar.pulse_duration * bw.B_I * p.P_BS * p.G_r * c_r
            * residual_echo_factor(cfg) / cfg.noise_power)


def _constants_from_budget(lb, gamma_sic, xi):
    m = lb.m
    a1 = lb.echo / lb.gain_c
    a2 = lb.noise / lb.gain_c
    a3 = lb.gain_r / lb.gain_c
    a4 = lb.echo / lb.gain_r
    a5 = lb.noise / lb.gain_r
    b1, b2, b3 = a4, a5, 1.0 / a3
    lam1 = m * (a1 + a2) / lb.P_c
    lam2 = m * (a4 + a5) / lb.P_r * (gamma_sic * a3 * lb.P_r / lb.P_c + 1.0)
    lam3 = m * (b1 + b2) / lb.P_r
    lam4 = m / lb.P_c * (a1 + a2) * (gamma_sic / lb.P_r * lb.P_c * b3 + 1.0)
    lam5 = m * gamma_sic * (b1 + b2) / lb.P_r
    omega_c = m * (lb.echo + lb.noise) / (lb.P_c * lb.gain_c)
    omega_r = m * (lb.echo + lb.noise) / (lb.P_r * lb.gain_r)
    return DerivedConstants(omega_c, omega_r, a1, a2, a3, a4, a5, b1, b2, b3,
                            lam1, lam2, lam3, lam4, lam5, xi)


# ---------------------------------------------------------------------------
# Exact SINR / SNR expressions
# ---------------------------------------------------------------------------

@dataclass
class FadingSample:
    """Small-scale power gains of one draw (scalars or equal-length arrays)."""

    h_c_sq: object
    h_r_sq: object
    h_rd_sq: object
    h_ru_sq: object

    def __post_init__(self):
        for name in ("h_c_sq", "h_r_sq", "h_rd_sq", "h_ru_sq"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be non-negative")

    @property
    def g_r_sq(self):
        """Equivalent radar hop gain ``|h_rd|^2 |h_ru|^2`` (without the residual factor)."""
        return np.asarray(self.h_rd_sq) * np.asarray(self.h_ru_sq)


def _signal_powers(cfg, fading, band="isac"):
    g = cfg.geometry
    p = cfg.powers
    s_c = p.P_c * p.G_c * pathloss_comm(g, g.d_c) * np.asarray(fading.h_c_sq)
    s_r = p.P_r * p.G_c * pathloss_comm(g, g.d_r) * np.asarray(fading.h_r_sq)
    if band == "isac":
        echo = (p.P_BS * p.G_r * pathloss_radar(g, cfg.radar, g.d_r)
                * fading.g_r_sq * residual_echo_factor(cfg))
        noise = cfg.noise_power
    elif band == "comm":
        echo = 0.0
        noise = cfg.noise.power(cfg.bandwidth.B_W)
    else:
        raise ValueError(f"band must be 'isac' or 'comm', got {band!r}")
    return s_c, s_r, echo, noise


def sinr_oma(cfg, user, fading, band="isac"):
    """OMA sub-channel SINR: own signal over residual echo plus noise."""
    _check_user(user)
    s_c, s_r, echo, noise = _signal_powers(cfg, fading, band)
    own = s_c if user == "c" else s_r
    return own / (echo + noise)


_VALID_STAGES = {
    (Scenario.NOMA_SEMI_I, "c"): "pre_sic",
    (Scenario.NOMA_SEMI_I, "r"): "post_sic",
    (Scenario.NOMA_SEMI_II, "r"): "pre_sic",
    (Scenario.NOMA_SEMI_II, "c"): "post_sic",
}


def sinr_noma(cfg, scenario, user, stage, fading, band="isac"):
    """NOMA SINR of ``user`` at the given SIC stage.

    The near user is decoded first against everything else; the far user
    is decoded after SIC with a residual ``varsigma`` of the near user's
    signal left behind.
    """
    scenario = Scenario.parse(scenario)
    _check_user(user)
    if _VALID_STAGES.get((scenario, user)) != stage:
        raise ContractError(f"no {stage!r} stage for user {user!r} in {scenario.value}")
    s_c, s_r, echo, noise = _signal_powers(cfg, fading, band)
    p = cfg.powers
    if scenario is Scenario.NOMA_SEMI_I:
        if user == "c":
            return s_c / (s_r + echo + noise)
        return s_r / (p.varsigma_c * s_c + echo + noise)
    if user == "r":
        return s_r / (s_c + echo + noise)
    return s_c / (p.varsigma_r * s_r + echo + noise)


def sic_sinr(cfg, scenario, fading, band="isac"):
    """SINR of the near user's signal as seen by the SIC stage."""
    scenario = Scenario.parse(scenario)
    near = scenario.near_user()
    return sinr_noma(cfg, scenario, near, "pre_sic", fading, band)


def snr_radar_echo(cfg, fading, varsigma_c=None, varsigma_r=None):
    """Echo SNR after the last SIC stage, with residual communication terms."""
    if cfg.bandwidth.beta_semi <= 0:
        raise ValueError("radar echo SNR needs beta_semi > 0")
    p = cfg.powers
    vc = p.varsigma_c if varsigma_c is None else varsigma_c
    vr = p.varsigma_r if varsigma_r is None else varsigma_r
    s_c, s_r, echo, noise = _signal_powers(cfg, fading, "isac")
    return echo / (vc * s_c + vr * s_r + noise)


def average_received_snr_db(cfg, user):
    """``10 log10(P_j C d_j^-alpha / sigma^2)``: the figure axis, with unit-mean fading."""
    _check_user(user)
    lb = link_budget(cfg)
    own = lb.P_c * lb.gain_c if user == "c" else lb.P_r * lb.gain_r
    return 10.0 * math.log10(own / lb.noise)
