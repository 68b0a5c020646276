"""Monte Carlo oracle for outage, ergodic rate and REIR.

Each batch draws the four fading gains from its own spawned stream and
reduces to ``(n, mean, M2)``. Batches are merged pairwise in a fixed tree,
so an estimate depends only on the seed and batch size, never on how many
workers ran the batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .analytic import MetricResult, high_snr_slope, noma_scenario_for
from .channel import sample_nakagami_power
from .scenario import (
    ContractError,
    FadingSample,
    Scenario,
    _check_user,
    sic_sinr,
    sinr_noma,
    sinr_oma,
    snr_radar_echo,
)


@dataclass(frozen=True)
class McSettings:
    n_samples: int = 1_000_000
    seed: int = 20220516
    batch_size: int = 250_000
    confidence: float = 0.99
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1000:
            raise ValueError("n_samples must be at least 1000")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    @property
    def z(self):
        return float(norm.ppf(0.5 + self.confidence / 2))

    def batch_sizes(self):
        full, rest = divmod(self.n_samples, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])


def draw_fading(m, n, rng):
    """Four independent unit-mean Gamma(m) gain vectors, always in the same order."""
    return FadingSample(
        h_c_sq=sample_nakagami_power(m, rng, n),
        h_r_sq=sample_nakagami_power(m, rng, n),
        h_rd_sq=sample_nakagami_power(m, rng, n),
        h_ru_sq=sample_nakagami_power(m, rng, n),
    )


def _batch_stats(x):
    x = np.asarray(x, dtype=float)
    mean = float(np.mean(x))
    return (x.size, mean, float(np.sum((x - mean) ** 2)))


def _merge(a, b):
    n_a, mean_a, m2_a = a
    n_b, mean_b, m2_b = b
    n = n_a + n_b
    delta = mean_b - mean_a
    return (n, mean_a + delta * n_b / n, m2_a + m2_b + delta * delta * n_a * n_b / n)


def _tree_reduce(stats):
    while len(stats) > 1:
        nxt = [_merge(stats[i], stats[i + 1]) for i in range(0, len(stats) - 1, 2)]
        if len(stats) % 2:
            nxt.append(stats[-1])
        stats = nxt
    return stats[0]


def run_batches(m, settings, statistic):
    """Apply ``statistic(fading) -> array`` over all batches; returns ``(n, mean, M2)``."""
    sizes = settings.batch_sizes()
    seeds = np.random.SeedSequence(settings.seed).spawn(len(sizes))

    def work(i):
        rng = np.random.Generator(np.random.PCG64(seeds[i]))
        return _batch_stats(statistic(draw_fading(m, sizes[i], rng)))

    if settings.workers == 1:
        stats = [work(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(settings.workers) as pool:
            stats = list(pool.map(work, range(len(sizes))))
    return _tree_reduce(stats)


def wilson_halfwidth(p, n, z):
    denom = 1 + z * z / n
    return z / denom * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))


def _mean_result(stats, settings, unit):
    n, mean, m2 = stats
    sd = math.sqrt(m2 / (n - 1)) if n > 1 else 0.0
    return MetricResult(mean, unit, "montecarlo", settings.z * sd / math.sqrt(n))


def _outage_indicator(cfg, scenario, user, gamma_th, gamma_sic, band):
    if scenario is Scenario.OMA_SEMI:
        return lambda f: sinr_oma(cfg, user, f, band) < gamma_th
    if not scenario.is_noma:
        raise ContractError(f"no outage defined for {scenario.value}")
    near = scenario.near_user()
    if user == near:
        return lambda f: sinr_noma(cfg, scenario, user, "pre_sic", f, band) < gamma_th

    def far(f):
        sic_ok = sic_sinr(cfg, scenario, f, band) >= gamma_sic
        own_ok = sinr_noma(cfg, scenario, user, "post_sic", f, band) >= gamma_th
        return ~(sic_ok & own_ok)
    return far


def mc_outage(cfg, scenario, user, gamma_th=None, gamma_sic=None, settings=McSettings(), band="isac"):
    """Empirical outage with a Wilson half-width.

    A far user is in outage when SIC of the near user fails or when its
    own post-SIC SINR misses the threshold.
    """
    scenario = Scenario.parse(scenario)
    _check_user(user)
    th = cfg.thresholds
    if gamma_th is None:
        gamma_th = th.gamma_th_oma if scenario is Scenario.OMA_SEMI else th.gamma_th
    gamma_sic = th.gamma_sic if gamma_sic is None else gamma_sic
    ind = _outage_indicator(cfg, scenario, user, gamma_th, gamma_sic, band)
    n, p, _ = run_batches(cfg.m, settings, lambda f: ind(f).astype(float))
    return MetricResult(p, "probability", "montecarlo", wilson_halfwidth(p, n, settings.z))


def _rate_sample(cfg, scenario, user, band):
    if scenario is Scenario.OMA_SEMI:
        return lambda f: 0.5 * np.log2(1.0 + sinr_oma(cfg, user, f, band))
    if not scenario.is_noma:
        raise ContractError(f"no per-user rate defined for {scenario.value}")
    if user == scenario.near_user():
        return lambda f: np.log2(1.0 + sinr_noma(cfg, scenario, user, "pre_sic", f, band))
    gamma_sic = cfg.thresholds.gamma_sic

    def far(f):
        # nothing is delivered to the far user when SIC of the near user fails
        ok = sic_sinr(cfg, scenario, f, band) >= gamma_sic
        return np.where(ok, np.log2(1.0 + sinr_noma(cfg, scenario, user, "post_sic", f, band)), 0.0)
    return far


def mc_rate(cfg, scenario, user, settings=McSettings(), band="isac"):
    """Sample mean of ``log2(1 + SINR)`` (halved for OMA)."""
    scenario = Scenario.parse(scenario)
    _check_user(user)
    stats = run_batches(cfg.m, settings, _rate_sample(cfg, scenario, user, band))
    return _mean_result(stats, settings, "bits/s/Hz")


def mc_reir(cfg, settings=McSettings(), sic="imperfect"):
    """Sample mean of ``(delta / 2T) log2(1 + 2 T beta B gamma_echo)`` in bits/s.

    ``sic="perfect"`` zeroes the residual communication terms; otherwise
    the configured residual fractions apply.
    """
    if sic not in ("perfect", "imperfect"):
        raise ValueError("sic must be 'perfect' or 'imperfect'")
    if cfg.bandwidth.beta_semi == 0:
        return MetricResult(0.0, "bits/s", "montecarlo", 0.0)
    radar = cfg.radar
    scale = 2 * radar.pulse_duration * cfg.bandwidth.B_I
    pref = high_snr_slope(radar)
    zero = 0.0 if sic == "perfect" else None

    def sample(f):
        snr = snr_radar_echo(cfg, f, varsigma_c=zero, varsigma_r=zero)
        return pref * np.log1p(scale * snr)

    stats = run_batches(cfg.m, settings, sample)
    return _mean_result(stats, settings, "bits/s")


def mc_capacity(cfg, mode, settings=McSettings()):
    """Monte Carlo counterpart of the aggregate capacity in bits/s/Hz.

    Combines ``mc_rate`` and ``mc_reir`` with the same band weights as the
    analytic aggregate; the half-widths add in quadrature.
    """
    mode = noma_scenario_for(cfg) if str(mode).lower() in ("noma", "noma-semi") else Scenario.parse(mode)
    bw = cfg.bandwidth
    parts = []
    if mode is Scenario.FD_ISAC:
        if bw.beta_semi < 1:
            alt = cfg.replace(bandwidth={"alpha_semi": 0.0, "beta_semi": 0.0,
                                         "epsilon_semi": 1.0, "B": bw.B * (1 - bw.beta_semi)})
            for user in ("c", "r"):
                parts.append((1 - bw.beta_semi, mc_rate(alt, Scenario.OMA_SEMI, user, settings, "comm")))
        if bw.beta_semi > 0:
            parts.append((1 / bw.B, mc_reir(cfg, settings, "perfect")))
    else:
        for band, weight in (("isac", bw.beta_semi), ("comm", bw.epsilon_semi)):
            if weight > 0:
                for user in ("c", "r"):
                    parts.append((weight, mc_rate(cfg, mode, user, settings, band)))
        if bw.beta_semi > 0:
            parts.append((1 / bw.B, mc_reir(cfg, settings, "imperfect")))
    value = math.fsum(w * r.value for w, r in parts)
    ci = math.sqrt(math.fsum((w * r.ci_halfwidth) ** 2 for w, r in parts))
    return MetricResult(value, "bits/s/Hz", "montecarlo", ci)
