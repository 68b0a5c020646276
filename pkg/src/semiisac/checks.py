"""Self-validation suite behind ``semiisac validate``.

Each check yields one :class:`CheckResult`. Monte Carlo comparisons use
``max(3 * CI, 5e-3)`` for probabilities and 1 % (0.01 absolute below 0.5)
for rates.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import analytic as A
from . import montecarlo as M
from . import specfun
from .channel import product_channel_pdf
from .scenario import Scenario, config_from_dict, config_to_dict, derive_constants, watts_to_dbm

PROFILES = {
    "default": {"n_samples": 1_000_000},
    "quick": {"n_samples": 200_000},
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    expected: float
    got: float
    tolerance: float
    passed: bool

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"


def _abs(name, expected, got, tol):
    ok = math.isfinite(got) and abs(got - expected) <= tol
    return CheckResult(name, float(expected), float(got), float(tol), ok)


def _rel(name, expected, got, rel):
    tol = rel * abs(expected)
    return _abs(name, expected, got, tol)


def _rate_tol(value):
    return 0.01 if value < 0.5 else 0.01 * abs(value)


def independent_constants(cfg):
    """Link-budget shorthands recomputed from raw parameters, without the scenario helpers."""
    g, p, r, bw = cfg.geometry, cfg.powers, cfg.radar, cfg.bandwidth
    lam = 3e8 / g.f_c
    cc = (lam / (4 * math.pi)) ** 2
    cr = r.sigma_rcs * lam**2 / (4 * math.pi) ** 3
    sigma2 = cfg.noise.k_B * cfg.noise.T_temp * bw.beta_semi * bw.B
    resid = r.gamma_sq * (bw.beta_semi * bw.B) ** 2 * r.sigma_tau_sq
    echo = p.P_BS * p.G_r * cr * g.d_r ** (-g.alpha_r) * resid
    lc = p.G_c * cc * g.d_c ** (-g.alpha_c)
    lr = p.G_c * cc * g.d_r ** (-g.alpha_c)
    m, gs = cfg.m, cfg.thresholds.gamma_sic
    a = [echo / lc, sigma2 / lc, lr / lc, echo / lr, sigma2 / lr]
    b = [a[3], a[4], lc / lr]
    return {
        "Omega_c": m * (echo + sigma2) / (p.P_c * lc),
        "Omega_r": m * (echo + sigma2) / (p.P_r * lr),
        "a1": a[0], "a2": a[1], "a3": a[2], "a4": a[3], "a5": a[4],
        "b1": b[0], "b2": b[1], "b3": b[2],
        "Lambda1": m * (a[0] + a[1]) / p.P_c,
        "Lambda2": m * (a[3] + a[4]) * (gs * a[2] * p.P_r / p.P_c + 1) / p.P_r,
        "Lambda3": m * (b[0] + b[1]) / p.P_r,
        "Lambda4": m * (a[0] + a[1]) * (gs * p.P_c * b[2] / p.P_r + 1) / p.P_c,
        "Lambda5": m * gs * (b[0] + b[1]) / p.P_r,
        "Xi_r1": 2 * r.pulse_duration * bw.beta_semi * bw.B * p.P_BS * p.G_r * cr * resid / sigma2,
    }


def check_constants(cfg, constants=None):
    dc = derive_constants(cfg) if constants is None else constants
    ref = independent_constants(cfg)
    return [_rel(f"constants_consistency:{k}", v, getattr(dc, k), 1e-12) for k, v in ref.items()]


def check_specfun(seed=7):
    rng = np.random.default_rng(seed)
    out = []
    worst = 0.0
    for a, x in zip(rng.uniform(0.1, 30, 40), rng.uniform(0.01, 60, 40)):
        worst = max(worst, abs(specfun.reg_lower_gamma(a, x) + specfun.reg_upper_gamma(a, x) - 1))
    out.append(_abs("specfun:gamma_complement", 0.0, worst, 1e-13))
    worst = 0.0
    for n, x in zip(rng.integers(1, 12, 40), rng.uniform(0.01, 40, 40)):
        n = int(n)
        lhs = n * specfun.exp_integral_en_scaled(n + 1, x)
        rhs = 1.0 - x * specfun.exp_integral_en_scaled(n, x)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    out.append(_abs("specfun:En_recurrence", 0.0, worst, 1e-10))
    worst = 0.0
    for a, x in zip(rng.uniform(0.2, 10, 40), rng.uniform(0.05, 20, 40)):
        lhs = specfun.upper_gamma(a + 1, x)
        rhs = a * specfun.upper_gamma(a, x) + x**a * math.exp(-x)
        worst = max(worst, abs(lhs - rhs) / rhs)
    out.append(_abs("specfun:upper_gamma_recurrence", 0.0, worst, 1e-12))
    for m in (1, 2, 3, 5):
        total = specfun.integrate_semi_infinite(lambda z: product_channel_pdf(m, np.maximum(z, 1e-300)),
                                                scale=1.0 / m)
        out.append(_abs(f"specfun:product_pdf_normalisation:m={m}", 1.0, total, 1e-8))
    return out


def _mc_pair_checks(cfg, mc):
    out = []
    for user in ("c", "r"):
        a = A.op_oma(cfg, user)
        e = M.mc_outage(cfg, Scenario.OMA_SEMI, user, settings=mc)
        out.append(_abs(f"op_vs_mc:oma:{user}", a.value, e.value, max(3 * e.ci_halfwidth, 5e-3)))
        closed = A.rate_oma(cfg, user).value
        out.append(_rel(f"rate_closed_vs_quadrature:oma:{user}", closed, A.rate_oma_quadrature(cfg, user).value, 1e-6))
        e = M.mc_rate(cfg, Scenario.OMA_SEMI, user, settings=mc)
        out.append(_abs(f"rate_vs_mc:oma:{user}", closed, e.value, _rate_tol(closed)))
    for sc in (Scenario.NOMA_SEMI_I, Scenario.NOMA_SEMI_II):
        for user in ("c", "r"):
            a = A.op_noma(cfg, sc, user)
            e = M.mc_outage(cfg, sc, user, settings=mc)
            out.append(_abs(f"op_vs_mc:{sc.value}:{user}", a.value, e.value, max(3 * e.ci_halfwidth, 5e-3)))
            r = A.rate_noma(cfg, sc, user).value
            e = M.mc_rate(cfg, sc, user, settings=mc)
            out.append(_abs(f"rate_vs_mc:{sc.value}:{user}", r, e.value, _rate_tol(r)))
        far = "r" if sc is Scenario.NOMA_SEMI_I else "c"
        out.append(_rel(f"far_rate_finite_vs_quadrature:{sc.value}", A.rate_noma(cfg, sc, far).value,
                        A.rate_noma_far_finite(cfg, sc).value, 1e-7))
    return out


def _reir_checks(cfg, mc):
    out = []
    if cfg.bandwidth.beta_semi == 0:
        return [_abs("reir_zero_at_beta0", 0.0, A.reir_general(cfg).value, 0.0)]
    g = A.reir_general(cfg).value
    e = M.mc_reir(cfg, mc, "perfect")
    out.append(_abs("reir_vs_mc", g, e.value, 0.01 * g))
    if cfg.m == 1:
        out.append(_rel("reir_general_vs_rayleigh", A.reir_rayleigh(cfg).value, g, 1e-6))
    # high-SNR behaviour: 100 dB above the configured BS power
    base = watts_to_dbm(cfg.powers.P_BS)
    hi = cfg.replace(**{"powers.P_BS_dBm": base + 100.0})
    hi2 = cfg.replace(**{"powers.P_BS_dBm": base + 101.0})
    slope_ref = A.high_snr_slope(cfg.radar)
    r1, r2 = A.reir_general(hi).value, A.reir_general(hi2).value
    fd = (r2 - r1) / (0.1 * math.log(10.0))
    out.append(_rel("reir_high_snr_slope", slope_ref, fd, 0.02))
    if cfg.m >= 3:
        out.append(_rel("reir_asymptotic_vs_general", r1, A.reir_asymptotic(hi).value, 0.03))
    return out


def near_user_slope(cfg, scenario, step_db=1.0, start_dbm=-20.0, stop_dbm=120.0):
    """Least-squares slope of ``log10 OP`` vs ``log10 P`` over the first decade of power with OP < 1e-3."""
    scenario = Scenario.parse(scenario)
    near = scenario.near_user()
    key = "P_c_dBm" if near == "c" else "P_r_dBm"
    data = config_to_dict(cfg)
    xs, ys = [], []
    p = start_dbm
    while p <= stop_dbm:
        data["powers"][key] = p
        op = A.op_noma(config_from_dict(data), scenario, near).value
        if 0 < op < 1e-3:
            xs.append(p / 10.0)
            ys.append(math.log10(op))
            if p / 10.0 - xs[0] >= 1.0 - 1e-9:
                break
        p += step_db
    if len(xs) < 3:
        return math.nan
    return float(np.polyfit(xs, ys, 1)[0])


def _diversity_checks(cfg, mc):
    out = []
    for sc in (Scenario.NOMA_SEMI_I, Scenario.NOMA_SEMI_II):
        near = sc.near_user()
        far = "r" if near == "c" else "c"
        d = A.diversity_order(cfg, sc, near)
        out.append(_abs(f"diversity_slope:{sc.value}:{near}", -d, near_user_slope(cfg, sc), 0.15))
        key = "P_c_dBm" if near == "c" else "P_r_dBm"
        base = watts_to_dbm(cfg.powers.P_c if near == "c" else cfg.powers.P_r)
        hi = cfg.replace(**{f"powers.{key}": base + 60.0})
        floor = A.outage_floor(hi, sc, far)
        e = M.mc_outage(hi, sc, far, settings=mc)
        out.append(_abs(f"far_user_floor:{sc.value}:{far}", floor, e.value, 3 * e.ci_halfwidth))
    return out


def _capacity_checks(cfg):
    out = []
    worst = math.inf
    for i in range(11):
        b = i / 10
        c = cfg.replace(bandwidth={"alpha_semi": 0.0, "beta_semi": b, "epsilon_semi": 1 - b, "B": cfg.bandwidth.B})
        fd = A.aggregate_capacity(c, "fd").value
        oma = A.aggregate_capacity(c, "oma").value
        noma = A.aggregate_capacity(c, "noma").value
        # relative slack covers exact ties at the endpoints
        slack = 1e-9 * max(1.0, abs(noma))
        worst = min(worst, oma - fd + slack, noma - oma + slack)
    out.append(CheckResult("capacity_ordering_beta_grid", 0.0, worst, 0.0, worst >= 0))
    c0 = cfg.replace(bandwidth={"alpha_semi": 0.0, "beta_semi": 0.0, "epsilon_semi": 1.0, "B": cfg.bandwidth.B})
    out.append(_abs("reir_zero_at_beta0", 0.0, A.reir_general(c0).value, 0.0))
    return out


def _imperfect_sic_checks(cfg, mc):
    out = []
    if cfg.bandwidth.beta_semi == 0:
        return out
    perfect = cfg.replace(**{"powers.varsigma_c": 0.0, "powers.varsigma_r": 0.0})
    for v in (0.05, 0.2):
        imp = cfg.replace(**{"powers.varsigma_c": v, "powers.varsigma_r": v})
        for sc in (Scenario.NOMA_SEMI_I, Scenario.NOMA_SEMI_II):
            for user in ("c", "r"):
                p = M.mc_rate(perfect, sc, user, settings=mc)
                q = M.mc_rate(imp, sc, user, settings=mc)
                # common random numbers: imperfect can only lose, so any excess is a bug
                out.append(CheckResult(f"imperfect_sic_rate:{sc.value}:{user}:{v}", p.value, q.value, 0.0,
                                       q.value <= p.value))
        p = M.mc_reir(perfect, mc, "perfect")
        q = M.mc_reir(imp, mc, "imperfect")
        out.append(CheckResult(f"imperfect_sic_reir:{v}", p.value, q.value, 3 * q.ci_halfwidth,
                               q.value <= p.value and (p.value - q.value) > 0))
    return out


def run_checks(cfg, profile="default", seed=None, n_samples=None, constants=None):
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
    kw = dict(PROFILES[profile])
    if n_samples is not None:
        kw["n_samples"] = n_samples
    if seed is not None:
        kw["seed"] = seed
    mc = M.McSettings(**kw)
    perfect = cfg.replace(**{"powers.varsigma_c": 0.0, "powers.varsigma_r": 0.0})
    results = []
    results += check_constants(cfg, constants)
    results += check_specfun()
    results += _mc_pair_checks(perfect, mc)
    results += _reir_checks(perfect, mc)
    results += _diversity_checks(perfect, mc)
    results += _capacity_checks(perfect)
    results += _imperfect_sic_checks(cfg, mc)
    results.append(_rel("high_snr_slope_formula", cfg.radar.duty_cycle / (2 * cfg.radar.pulse_duration * math.log(2)),
                        A.high_snr_slope(cfg.radar), 1e-15))
    return results


def corrupt_constants(cfg, field, factor=1.01):
    """Derived constants with one entry scaled, for fault-injection runs."""
    dc = derive_constants(cfg)
    return dataclasses.replace(dc, **{field: getattr(dc, field) * factor})


__all__ = ["CheckResult", "PROFILES", "run_checks", "corrupt_constants", "independent_constants",
           "near_user_slope"]
