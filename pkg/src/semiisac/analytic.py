"""Closed-form and asymptotic performance metrics.

Outage probabilities and the OMA rate are finite sums. NOMA ergodic rates
are integrals of the outage closed forms, ``(1/ln2) int (1 - OP(x)) / (1 + x) dx``,
with the finite-sum or series evaluations kept as cross-checks. All
NOMA expressions assume perfect SIC and replace the random residual echo
by its mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .scenario import (
    ContractError,
    Scenario,
    _check_user,
    derive_constants,
    link_budget,
)

LN2 = math.log(2.0)


class UnsupportedAsymptoticError(ValueError):
    """Requested asymptotic form is undefined for this Nakagami shape."""


@dataclass(frozen=True)
class MetricResult:
    value: float
    unit: str
    method: str
    ci_halfwidth: float | None = None

    @property
    def out_of_range(self):
        return self.unit == "probability" and not 0.0 <= self.value <= 1.0

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# Shared finite sums
# ---------------------------------------------------------------------------

def _gamma_ratio(m, r):
    """``Gamma(m + r) / Gamma(m)`` for integer ``r >= 0``."""
    return math.exp(math.lgamma(m + r) - math.lgamma(m))


def _near_user_success(m, lam, c):
    """``Pr{X >= lam/m + c Y}``-type sum for the first-decoded user.

    ``X, Y`` are unit-mean Gamma(m); the event is ``X > (lam/m)(1) + c Y``
    after normalisation. Returns the probability of success.
    """
    total = 0.0
    for p in range(m):
        inv_pfact = 1.0 / math.factorial(p)
        for r in range(p + 1):
            # r counts powers of the interferer term
            total += (math.comb(p, r) * inv_pfact * lam ** (p - r) * c**r
                      * _gamma_ratio(m, r) * (1.0 + c) ** (-(m + r)))
    return math.exp(-lam) * total


def _far_user_success(m, lam_sic, c, own_threshold):
    """Joint SIC-success and own-SINR-success probability of the second-decoded user.

    ``own_threshold`` is the normalised gain the far user must exceed
    after cancellation.
    """
    total = 0.0
    z = m * (1.0 + c) * own_threshold
    for p in range(m):
        inv_pfact = 1.0 / math.factorial(p)
        for r in range(p + 1):
            total += (math.comb(p, r) * inv_pfact * lam_sic ** (p - r) * c**r
                      * _gamma_ratio(m, r) * specfun.reg_upper_gamma(m + r, z)
                      * (1.0 + c) ** (-(m + r)))
    return math.exp(-lam_sic) * total


def _noma_roles(cfg, scenario, band):
    """Normalised quantities for the (near, far) users of a NOMA scenario.

    Returns ``(near_noise, far_noise, cross)`` where, for the near user,
    outage at threshold ``x`` is ``1 - success(lam=m x near_noise, c=x cross)``.
    ``near_noise`` is ``(echo+noise)/(P_near gain_near)``, ``far_noise`` the
    same for the far user and ``cross = P_far gain_far / (P_near gain_near)``.
    """
    lb = link_budget(cfg, band)
    s_c = lb.P_c * lb.gain_c
    s_r = lb.P_r * lb.gain_r
    imp = lb.echo + lb.noise
    if scenario is Scenario.NOMA_SEMI_I:
        return imp / s_c, imp / s_r, s_r / s_c
    return imp / s_r, imp / s_c, s_c / s_r


def _scenario(scenario):
    scenario = Scenario.parse(scenario)
    if not scenario.is_noma:
        raise ContractError(f"{scenario.value} is not a NOMA scenario")
    return scenario


# ---------------------------------------------------------------------------
# OMA
# ---------------------------------------------------------------------------

def _omega(cfg, user, band):
    dc = derive_constants(cfg, band)
    return dc.Omega_c if user == "c" else dc.Omega_r


def op_oma(cfg, user, gamma_th=None, band="isac"):
    """``gamma(m, Omega gamma_th) / Gamma(m)``."""
    _check_user(user)
    g = cfg.thresholds.gamma_th_oma if gamma_th is None else gamma_th
    if g < 0:
        raise ValueError("threshold must be non-negative")
    if g == 0:
        return MetricResult(0.0, "probability", "analytic")
    return MetricResult(specfun.reg_lower_gamma(cfg.m, _omega(cfg, user, band) * g), "probability", "analytic")


def rate_oma(cfg, user, band="isac"):
    """``(1/(2 ln2)) sum_k e^Omega E_{k+1}(Omega)`` in bits/s/Hz."""
    _check_user(user)
    omega = _omega(cfg, user, band)
    total = math.fsum(specfun.exp_integral_en_scaled(k + 1, omega) for k in range(cfg.m))
    return MetricResult(total / (2 * LN2), "bits/s/Hz", "analytic")


# ---------------------------------------------------------------------------
# NOMA outage
# ---------------------------------------------------------------------------

def _noma_success(cfg, scenario, user, gamma_th, gamma_sic, band):
    m = cfg.m
    near = scenario.near_user()
    near_noise, far_noise, cross = _noma_roles(cfg, scenario, band)
    if user == near:
        return _near_user_success(m, m * gamma_th * near_noise, gamma_th * cross)
    return _far_user_success(m, m * gamma_sic * near_noise, gamma_sic * cross, gamma_th * far_noise)


def op_noma(cfg, scenario, user, gamma_th=None, gamma_sic=None, band="isac"):
    """Exact perfect-SIC outage of either user in either NOMA scenario.

    The far user's outage includes the event that the near user's signal
    cannot be cancelled.
    """
    scenario = _scenario(scenario)
    _check_user(user)
    g = cfg.thresholds.gamma_th if gamma_th is None else gamma_th
    gs = cfg.thresholds.gamma_sic if gamma_sic is None else gamma_sic
    if g < 0 or gs < 0:
        raise ValueError("thresholds must be non-negative")
    value = 1.0 - _noma_success(cfg, scenario, user, g, gs, band)
    return MetricResult(value, "probability", "analytic")


# ---------------------------------------------------------------------------
# Ergodic rates by quadrature of the outage closed forms
# ---------------------------------------------------------------------------

_RATE_QUAD = specfun.QuadratureSettings(rel_tol=1e-10, abs_tol=1e-13, max_subdivisions=4000)
_SURVIVAL_CUTOFF = 1e-10


def _rate_from_success(success, settings=_RATE_QUAD):
    """``int_0^inf success(x) / (1 + x) dx`` for a decreasing ``success``.

    ``[0, 1]`` is integrated directly, ``[1, x_max]`` on a log axis where
    ``success(x_max) < 1e-10``, and the remainder is added as a tail
    integral from ``x_max``.
    """
    def vec(fn):
        return lambda xs: np.array([fn(float(x)) for x in np.atleast_1d(xs)])

    head, _ = specfun.integrate_interval(vec(lambda x: success(x) / (1.0 + x)), 0.0, 1.0, settings)
    x_max = 1.0
    while success(x_max) >= _SURVIVAL_CUTOFF:
        x_max *= 2.0
        if x_max > 1e300:
            raise ContractError("success probability does not vanish; rate integral diverges")
    body = 0.0
    if x_max > 1.0:
        def log_integrand(u):
            x = math.exp(u)
            return success(x) * x / (1.0 + x)
        body, _ = specfun.integrate_interval(vec(log_integrand), 0.0, math.log(x_max), settings)
    tail = specfun.integrate_semi_infinite(
        vec(lambda x: success(x) / (1.0 + x)),
        specfun.QuadratureSettings(rel_tol=1e-6, abs_tol=1e-14),
        scale=x_max, lower=x_max,
    )
    return float(head + body + tail)


def rate_noma(cfg, scenario, user, band="isac"):
    """Ergodic rate in bits/s/Hz from the outage closed form.

    For the far user the integrand is the joint success probability, so
    the rate counts only draws where SIC succeeded.
    """
    scenario = _scenario(scenario)
    _check_user(user)
    gs = cfg.thresholds.gamma_sic

    def success(x):
        return _noma_success(cfg, scenario, user, x, gs, band)

    return MetricResult(_rate_from_success(success) / LN2, "bits/s/Hz", "quadrature")


def rate_oma_quadrature(cfg, user, band="isac"):
    """OMA rate via the same integral, used to check the closed form."""
    _check_user(user)
    omega = _omega(cfg, user, band)
    m = cfg.m
    value = _rate_from_success(lambda x: specfun.reg_upper_gamma(m, omega * x))
    return MetricResult(value / (2 * LN2), "bits/s/Hz", "quadrature")


def _scaled_en_sum(n, lam):
    """``int_0^inf Gamma(n, x lam) / (1 + x) dx = (n-1)! sum_{k<n} e^lam E_{k+1}(lam)``."""
    return math.factorial(n - 1) * math.fsum(specfun.exp_integral_en_scaled(k + 1, lam) for k in range(n))


def rate_noma_far_finite(cfg, scenario, band="isac"):
    """Far-user ergodic rate as a finite sum of exponential integrals.

    Integrating each incomplete-Gamma term of the joint success
    probability over the threshold gives a closed form with no truncation.
    """
    scenario = _scenario(scenario)
    m = cfg.m
    gs = cfg.thresholds.gamma_sic
    near_noise, far_noise, cross = _noma_roles(cfg, scenario, band)
    lam_sic = m * gs * near_noise
    c = gs * cross
    lam = m * (1.0 + c) * far_noise
    total = 0.0
    for p in range(m):
        inv_pfact = 1.0 / math.factorial(p)
        for r in range(p + 1):
            total += (math.comb(p, r) * inv_pfact * lam_sic ** (p - r) * c**r
                      / math.factorial(m - 1) * _scaled_en_sum(m + r, lam)
                      * (1.0 + c) ** (-(m + r)))
    return MetricResult(math.exp(-lam_sic) * total / LN2, "bits/s/Hz", "analytic")


@dataclass(frozen=True)
class SeriesResult:
    """Outcome of the near-user binomial series cross-check."""

    value: float | None
    terms: int
    status: str  # "converged" or "skipped"


def rate_noma_near_series(cfg, scenario, band="isac", max_terms=200, rel_tol=1e-12):
    """Near-user ergodic rate by expanding ``(1 + c x)^{-n}`` binomially.

    The resulting series in ``k`` is asymptotic rather than convergent:
    its terms shrink while ``k c / lam`` is small and then grow without
    bound. Each inner series is summed until its terms drop below
    ``rel_tol`` of the running total; if a term grows first, or
    ``max_terms`` is reached, the check is reported as skipped.
    """
    scenario = _scenario(scenario)
    m = cfg.m
    near_noise, _, cross = _noma_roles(cfg, scenario, band)
    lam = m * near_noise
    c = cross
    total = 0.0
    used = 0
    for p in range(m):
        inv_pfact = 1.0 / math.factorial(p)
        for r in range(p + 1):
            n = m + r
            pref = math.comb(p, r) * inv_pfact * lam ** (p - r) * c**r * _gamma_ratio(m, r)
            inner = 0.0
            prev = math.inf
            done = False
            for k in range(max_terms + 1):
                # x^{p+k} e^{-lam x} / (1+x) integrates to (p+k)! lam^{-(p+k)} e^lam E_{p+k+1}(lam)
                log_mag = (math.lgamma(n + k) - math.lgamma(n) - math.lgamma(k + 1)
                           + k * math.log(c) + math.lgamma(p + k + 1) - (p + k) * math.log(lam)
                           if c > 0 or k == 0 else -math.inf)
                if log_mag == -math.inf:
                    done = True
                    break
                term = (-1) ** k * math.exp(log_mag) * specfun.exp_integral_en_scaled(p + k + 1, lam)
                used = max(used, k + 1)
                if abs(term) > prev:
                    return SeriesResult(None, used, "skipped")
                inner += term
                prev = abs(term)
                if abs(term) <= rel_tol * abs(inner):
                    done = True
                    break
            if not done:
                return SeriesResult(None, used, "skipped")
            total += pref * inner
    return SeriesResult(total / LN2, used, "converged")


# ---------------------------------------------------------------------------
# High-SNR outage
# ---------------------------------------------------------------------------

def _asym_sum(m, lam, c, upper=None):
    """``sum_r C(m,r) lam^{m-r} c^r G_r / (m! Gamma(m))``.

    ``G_r`` is ``Gamma(m+r)`` or, with ``upper`` set, ``Gamma(m+r, m*upper)``.
    """
    total = 0.0
    for r in range(m + 1):
        g = _gamma_ratio(m, r)
        if upper is not None:
            g *= specfun.reg_upper_gamma(m + r, m * upper)
        total += math.comb(m, r) * lam ** (m - r) * c**r * g
    return total / math.factorial(m)


def asymptotic_op(cfg, scenario, user, gamma_th=None, gamma_sic=None, band="isac"):
    """Leading high-SNR term of the perfect-SIC outage.

    The near user's outage falls as ``P^{-m}``; the far user's tends to
    the probability that its own gain misses the threshold even without
    interference, plus a vanishing SIC-failure term.
    """
    scenario = _scenario(scenario)
    _check_user(user)
    m = cfg.m
    g = cfg.thresholds.gamma_th if gamma_th is None else gamma_th
    gs = cfg.thresholds.gamma_sic if gamma_sic is None else gamma_sic
    near_noise, far_noise, cross = _noma_roles(cfg, scenario, band)
    if user == scenario.near_user():
        value = _asym_sum(m, m * g * near_noise, g * cross)
    else:
        floor = specfun.reg_lower_gamma(m, m * g * far_noise)
        value = floor + _asym_sum(m, m * gs * near_noise, gs * cross, upper=g * far_noise)
    return MetricResult(value, "probability", "asymptotic")


def outage_floor(cfg, scenario, user, gamma_th=None, band="isac"):
    """Limit of the far user's outage as the near user's power grows."""
    scenario = _scenario(scenario)
    if user == scenario.near_user():
        return 0.0
    g = cfg.thresholds.gamma_th if gamma_th is None else gamma_th
    _, far_noise, _ = _noma_roles(cfg, scenario, band)
    return specfun.reg_lower_gamma(cfg.m, cfg.m * g * far_noise)


def diversity_order(cfg, scenario, user):
    """``m`` for the first-decoded user, 0 for the one with an outage floor."""
    scenario = _scenario(scenario)
    _check_user(user)
    return cfg.m if user == scenario.near_user() else 0


# ---------------------------------------------------------------------------
# Radar estimation information rate
# ---------------------------------------------------------------------------

def high_snr_slope(radar):
    """``delta / (2 T ln 2)``: REIR gain per unit of ``ln P_BS``."""
    if not (radar.duty_cycle > 0 and radar.pulse_duration > 0):
        raise ValueError("duty cycle and pulse duration must be positive")
    return radar.duty_cycle / (2 * radar.pulse_duration * LN2)


def _reir_scale(cfg):
    """``a = d_r^{alpha_r} / Xi``: the echo-SNR product ``W`` is compared with ``a z``."""
    xi = derive_constants(cfg, "isac").Xi_r1
    return cfg.geometry.d_r ** cfg.geometry.alpha_r / xi


_REIR_OUTER = specfun.QuadratureSettings(rel_tol=1e-10, abs_tol=1e-14, max_subdivisions=4000)
_REIR_INNER = specfun.QuadratureSettings(rel_tol=1e-12, abs_tol=1e-16, max_subdivisions=4000)


def reir_kernel(m, a, outer=_REIR_OUTER, inner=_REIR_INNER):
    """``E[ln(1 + W / a)] = int_0^inf (1 - F_W(a z)) / (1 + z) dz``.

    Integrated on ``z = e^u`` split at ``u = ln(1/a)``, where the survival
    function starts to fall, so extreme SNRs cost no extra refinement.
    """
    if not a > 0:
        raise specfun.DomainError("REIR kernel needs a positive scale")

    def g(u):
        u = np.atleast_1d(u)
        out = np.empty(u.shape)
        for i, ui in enumerate(u):
            if ui > 700.0:
                out[i] = 0.0
                continue
            z = math.exp(ui)
            out[i] = specfun.product_gamma_sf(m, a * z, inner) * z / (1.0 + z)
        return out

    u0 = -math.log(a)
    # left half: u -> -inf, integrand ~ e^u
    left = specfun.integrate_semi_infinite(lambda t: g(u0 - t), outer, scale=1.0)
    right = specfun.integrate_semi_infinite(lambda t: g(u0 + t), outer, scale=1.0)
    return left + right


def reir_general(cfg):
    """Ergodic REIR in bits/s for integer ``m`` under perfect SIC."""
    if cfg.bandwidth.beta_semi == 0:
        return MetricResult(0.0, "bits/s", "quadrature")
    value = high_snr_slope(cfg.radar) * reir_kernel(cfg.m, _reir_scale(cfg))
    return MetricResult(value, "bits/s", "quadrature")


def reir_rayleigh(cfg):
    """Ergodic REIR for Rayleigh radar hops (``m`` ignored)."""
    if cfg.bandwidth.beta_semi == 0:
        return MetricResult(0.0, "bits/s", "analytic")
    value = high_snr_slope(cfg.radar) * specfun.meijer_rayleigh_reir_kernel(_reir_scale(cfg))
    return MetricResult(value, "bits/s", "analytic")


def _reir_asym_parts(m, a):
    """High-SNR pieces of ``E[ln(1 + W/a)] * Gamma(m) / m^m``.

    Returns ``(I6 + I7, [I5(k) for k = 1..m-1])``. They come from
    expanding ``e^s E_{k+1}(s)`` for small ``s = m a / x`` inside the
    outer Gamma expectation.
    """
    c = specfun.EULER_GAMMA
    psi = specfun.digamma
    lm2a = math.log(m * m * a)
    i6 = a * math.gamma(m - 1) / m ** (m - 2) - math.gamma(m) / m**m * (lm2a - psi(m) + c)
    i7 = ((m * a) ** 2 * math.gamma(m - 2) / m ** (m - 2)
          - m * a * math.gamma(m - 1) / m ** (m - 1) * (lm2a - psi(m - 1) + c))
    i5 = []
    for k in range(1, m):
        head = ((-m * a) ** k * math.gamma(m - k) / (math.factorial(k) * m ** (m - k))
                * (psi(k + 1) - lm2a + psi(m - k)))
        rest = math.fsum(
            (-m * a) ** q * math.gamma(m - q) / (math.factorial(q) * (q - k) * m ** (m - q))
            for q in range(m) if q != k
        )
        i5.append(head - rest)
    return i6 + i7, i5


def reir_asymptotic(cfg, fallback=False):
    """High-``P_BS`` closed form of the REIR, valid for ``m >= 3``.

    The correction terms are a series in the inverse echo SNR, so the result
    is only meaningful once the echo dominates the noise; at low ``P_BS`` it
    can be wildly off, even negative.
    With ``fallback`` set, shapes below 3 return the quadrature value
    instead of raising.
    """
    m = cfg.m
    if m < 3:
        if fallback:
            return reir_general(cfg)
        raise UnsupportedAsymptoticError(f"asymptotic REIR needs m >= 3, got m={m}")
    if cfg.bandwidth.beta_semi == 0:
        return MetricResult(0.0, "bits/s", "asymptotic")
    i67, i5 = _reir_asym_parts(m, _reir_scale(cfg))
    bracket = i67 + math.fsum(i5)
    value = high_snr_slope(cfg.radar) * m**m / math.gamma(m) * bracket
    return MetricResult(value, "bits/s", "asymptotic")


# ---------------------------------------------------------------------------
# BER
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BerParams:
    M: int = 4
    standard_psk: bool = False

    def __post_init__(self):
        if self.M < 2 or self.M & (self.M - 1):
            raise specfun.DomainError(f"PSK order must be a power of two >= 2, got {self.M}")

    @property
    def a_ber(self):
        return 2.0 / math.log2(self.M)

    @property
    def b_ber(self):
        s = math.sin(math.pi / self.M)
        return 2.0 * math.log2(self.M) * (s * s if self.standard_psk else s)


def ber_mpsk(params, gamma):
    """``a Q(sqrt(b gamma))`` BER approximation."""
    if gamma < 0:
        raise specfun.DomainError("SNR must be non-negative")
    return params.a_ber * specfun.gaussian_q(math.sqrt(params.b_ber * gamma))


# ---------------------------------------------------------------------------
# Aggregate channel capacity of the three system modes
# ---------------------------------------------------------------------------

def noma_scenario_for(cfg):
    """Decoding order by geometry: the closer user is decoded first."""
    g = cfg.geometry
    return Scenario.NOMA_SEMI_I if g.d_c <= g.d_r else Scenario.NOMA_SEMI_II


def _band_sum_rate(cfg, mode, band):
    if mode is Scenario.OMA_SEMI:
        return rate_oma(cfg, "c", band).value + rate_oma(cfg, "r", band).value
    return rate_noma(cfg, mode, "c", band).value + rate_noma(cfg, mode, "r", band).value


def aggregate_capacity(cfg, mode):
    """Weighted sum of the users' ergodic rates plus REIR, in bits/s/Hz.

    Semi-ISaC modes: ``beta * rates(shared band) + epsilon * rates(comm band)
    + REIR / B``. FD-ISaC: the radar gets ``beta B`` alone and both users
    share the rest orthogonally, so at ``beta = 0`` it ties with OMA-Semi.
    """
    mode = noma_scenario_for(cfg) if str(mode).lower() in ("noma", "noma-semi") else Scenario.parse(mode)
    bw = cfg.bandwidth
    if mode is Scenario.FD_ISAC:
        comm = 0.0
        if bw.beta_semi < 1:
            # all non-radar spectrum carries noise of its own width
            alt = cfg.replace(bandwidth={"alpha_semi": 0.0, "beta_semi": 0.0,
                                         "epsilon_semi": 1.0, "B": bw.B * (1 - bw.beta_semi)})
            comm = (1 - bw.beta_semi) * _band_sum_rate(alt, Scenario.OMA_SEMI, "comm")
        reir = 0.0
        if bw.beta_semi > 0:
            # radar-only band: no communication residuals reach the echo
            reir = reir_general(cfg).value / bw.B
        return MetricResult(comm + reir, "bits/s/Hz", "analytic")
    total = 0.0
    if bw.beta_semi > 0:
        total += bw.beta_semi * _band_sum_rate(cfg, mode, "isac")
        total += reir_general(cfg).value / bw.B
    if bw.epsilon_semi > 0:
        total += bw.epsilon_semi * _band_sum_rate(cfg, mode, "comm")
    return MetricResult(total, "bits/s/Hz", "analytic")
