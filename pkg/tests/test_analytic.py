import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy import integrate, stats

from semiisac import analytic as A
from semiisac import scenario as S
from semiisac import specfun
from semiisac.scenario import Scenario


def cfg_at(**kw):
    return S.preset(**kw)


# --- direct-integration oracle built from the SINR definitions --------------

def _oracle_op(cfg, scenario, user, g, gs):
    """Outage by one-dimensional quadrature over the interferer's gain."""
    lb = S.link_budget(cfg)
    m = cfg.m
    dist = stats.gamma(m, scale=1 / m)
    s_c, s_r, imp = lb.P_c * lb.gain_c, lb.P_r * lb.gain_r, lb.echo + lb.noise
    near_s, far_s = (s_c, s_r) if scenario == "noma-i" else (s_r, s_c)
    near = "c" if scenario == "noma-i" else "r"
    if user == near:
        # Pr{near X < g (far_s Y + imp) / near_s}
        f = lambda y: dist.pdf(y) * dist.cdf(g * (far_s * y + imp) / near_s)
        return integrate.quad(f, 0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)[0]
    y0 = g * imp / far_s
    f = lambda y: dist.pdf(y) * dist.sf(gs * (far_s * y + imp) / near_s)
    return 1 - integrate.quad(f, y0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)[0]


small_configs = st.fixed_dictionaries({
    "m": st.integers(1, 4),
    "pc": st.floats(0.0, 30.0),
    "pr": st.floats(0.0, 30.0),
    "dc": st.floats(100.0, 1500.0),
    "dr": st.floats(100.0, 1500.0),
    "g": st.floats(0.05, 5.0),
    "gs": st.floats(0.05, 2.0),
})


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_configs, st.sampled_from(["noma-i", "noma-ii"]), st.sampled_from(["c", "r"]))
def test_op_matches_definition_quadrature(p, scenario, user):
    cfg = cfg_at(**{"fading.m": p["m"], "powers.P_c_dBm": p["pc"], "powers.P_r_dBm": p["pr"],
                    "geometry.d_c": p["dc"], "geometry.d_r": p["dr"]})
    got = A.op_noma(cfg, scenario, user, p["g"], p["gs"]).value
    assert got == pytest.approx(_oracle_op(cfg, scenario, user, p["g"], p["gs"]), abs=1e-4)


@settings(max_examples=25, deadline=None)
@given(small_configs, st.sampled_from(["noma-i", "noma-ii"]), st.sampled_from(["c", "r"]), st.floats(1.05, 3.0))
def test_op_monotone(p, scenario, user, factor):
    cfg = cfg_at(**{"fading.m": p["m"], "powers.P_c_dBm": p["pc"], "powers.P_r_dBm": p["pr"]})
    g = p["g"]
    base = A.op_noma(cfg, scenario, user, g, p["gs"]).value
    assert A.op_noma(cfg, scenario, user, g * factor, p["gs"]).value >= base - 1e-12
    # own-power monotonicity holds for the first-decoded user only
    if user == Scenario.parse(scenario).near_user():
        key = "powers.P_c_dBm" if user == "c" else "powers.P_r_dBm"
        louder = cfg.replace(**{key: (p["pc"] if user == "c" else p["pr"]) + 3.0})
        assert A.op_noma(louder, scenario, user, g, p["gs"]).value <= base + 1e-12
    for u in ("c", "r"):
        assert A.op_oma(cfg, u, g * factor).value >= A.op_oma(cfg, u, g).value - 1e-15


# --- OMA --------------------------------------------------------------------

def test_far_user_outage_can_rise_with_own_power():
    # a louder far user makes cancelling the near user harder
    cfg = cfg_at(**{"fading.m": 1, "powers.P_c_dBm": 0.0, "powers.P_r_dBm": 0.0,
                    "geometry.d_c": 100.0, "geometry.d_r": 100.0})
    louder = cfg.replace(**{"powers.P_r_dBm": 3.0})
    before = A.op_noma(cfg, "noma-i", "r", 0.0546875, 2.0).value
    after = A.op_noma(louder, "noma-i", "r", 0.0546875, 2.0).value
    assert after > before
    assert _oracle_op(louder, "noma-i", "r", 0.0546875, 2.0) > _oracle_op(cfg, "noma-i", "r", 0.0546875, 2.0)


def test_op_oma_trivial_cases():
    cfg = cfg_at()
    assert A.op_oma(cfg, "c", 0.0).value == 0.0
    c1 = cfg_at(**{"fading.m": 1})
    omega = S.derive_constants(c1).Omega_c
    assert A.op_oma(c1, "c", 2.0).value == pytest.approx(1 - math.exp(-2 * omega), rel=1e-14)


def test_rate_oma_single_term_and_limits():
    c1 = cfg_at(**{"fading.m": 1})
    omega = S.derive_constants(c1).Omega_r
    ref = math.exp(omega) * specfun.exp_integral_en(1, omega) / (2 * math.log(2))
    assert A.rate_oma(c1, "r").value == pytest.approx(ref, rel=1e-14)
    weak = cfg_at(**{"powers.P_c_dBm": -80.0})
    assert A.rate_oma(weak, "c").value < 1e-6


@pytest.mark.parametrize("m", [1, 2, 3, 6])
@pytest.mark.parametrize("user", ["c", "r"])
def test_rate_oma_closed_form_equals_quadrature(m, user):
    cfg = cfg_at(**{"fading.m": m})
    assert A.rate_oma(cfg, user).value == pytest.approx(A.rate_oma_quadrature(cfg, user).value, rel=1e-6)


# --- NOMA -------------------------------------------------------------------

def test_op_noma_trivial_cases():
    cfg = cfg_at()
    assert A.op_noma(cfg, "noma-i", "c", 0.0).value == pytest.approx(0.0, abs=1e-15)
    assert A.op_noma(cfg, "noma-ii", "r", 0.0).value == pytest.approx(0.0, abs=1e-15)
    assert A.op_noma(cfg, "noma-i", "r", gamma_sic=1e9).value == pytest.approx(1.0, abs=1e-12)
    assert A.op_noma(cfg, "noma-ii", "c", gamma_sic=1e9).value == pytest.approx(1.0, abs=1e-12)


def test_op_noma_rejects_oma():
    with pytest.raises(S.ContractError):
        A.op_noma(cfg_at(), "oma", "c")


@pytest.mark.parametrize("scenario", ["noma-i", "noma-ii"])
@pytest.mark.parametrize("user", ["c", "r"])
def test_rate_is_integral_of_op(scenario, user):
    # rate and outage share one closed form; check with an independent integrator
    cfg = cfg_at(**{"powers.P_c_dBm": 20.0, "powers.P_r_dBm": 15.0})
    f = lambda x: (1 - A.op_noma(cfg, scenario, user, x).value) / (1 + x)
    ref = integrate.quad(f, 0, np.inf, epsabs=1e-11, epsrel=1e-10, limit=400)[0] / math.log(2)
    assert A.rate_noma(cfg, scenario, user).value == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("scenario", ["noma-i", "noma-ii"])
@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_far_rate_finite_sum(scenario, m):
    cfg = cfg_at(**{"fading.m": m, "powers.P_c_dBm": 18.0, "powers.P_r_dBm": 12.0})
    far = "r" if scenario == "noma-i" else "c"
    q = A.rate_noma(cfg, scenario, far).value
    assert A.rate_noma_far_finite(cfg, scenario).value == pytest.approx(q, rel=1e-8)


def test_near_series_converges_with_weak_interference():
    cfg = cfg_at(**{"powers.P_c_dBm": 10.0, "powers.P_r_dBm": -20.0})
    dc = S.derive_constants(cfg)
    assert dc.a3 * cfg.powers.P_r / cfg.powers.P_c < 1
    res = A.rate_noma_near_series(cfg, "noma-i")
    assert res.status == "converged" and res.terms <= 200
    assert res.value == pytest.approx(A.rate_noma(cfg, "noma-i", "c").value, rel=5e-3)
    res2 = A.rate_noma_near_series(cfg_at(**{"powers.P_r_dBm": 10.0, "powers.P_c_dBm": -20.0}), "noma-ii")
    assert res2.status == "converged"


def test_near_series_skipped_when_asymptotic():
    # a3 P_r / P_c = 0.297 < 1, yet the terms start growing immediately
    res = A.rate_noma_near_series(cfg_at(), "noma-i")
    assert res.status == "skipped" and res.value is None


# --- high-SNR outage ----------------------------------------------------------

def test_asymptotic_near_user_power_law():
    a = A.asymptotic_op(cfg_at(**{"powers.P_c_dBm": 30.0}), "noma-i", "c").value
    b = A.asymptotic_op(cfg_at(**{"powers.P_c_dBm": 30.0 + 10 * math.log10(2)}), "noma-i", "c").value
    assert a / b == pytest.approx(8.0, rel=1e-12)


def test_asymptotic_far_user_floor():
    cfg = cfg_at(**{"powers.P_c_dBm": 120.0, "powers.P_r_dBm": 20.0})
    floor = A.outage_floor(cfg, "noma-i", "r")
    dc = S.derive_constants(cfg)
    assert floor == pytest.approx(specfun.reg_lower_gamma(3, 3 * (dc.a4 + dc.a5) / cfg.powers.P_r), rel=1e-14)
    assert A.asymptotic_op(cfg, "noma-i", "r").value == pytest.approx(floor, rel=1e-9)
    assert A.op_noma(cfg, "noma-i", "r").value == pytest.approx(floor, rel=1e-9)
    cfg2 = cfg_at(**{"powers.P_r_dBm": 120.0, "powers.P_c_dBm": 20.0})
    dc2 = S.derive_constants(cfg2)
    floor2 = specfun.reg_lower_gamma(3, 3 * (dc2.a1 + dc2.a2) / cfg2.powers.P_c)
    assert A.asymptotic_op(cfg2, "noma-ii", "c").value == pytest.approx(floor2, rel=1e-9)


def _asym_ratios(scenario, user, key):
    out = []
    for p in np.arange(0.0, 70.0, 1.0):
        cfg = cfg_at(**{key: float(p), "powers.P_r_dBm" if key.endswith("c_dBm") else "powers.P_c_dBm": 20.0})
        e = A.op_noma(cfg, scenario, user).value
        out.append((e, A.asymptotic_op(cfg, scenario, user).value / e))
    return out


@pytest.mark.xfail(strict=True, reason="next-order term still contributes ~14% at OP=3e-4; see decisions ledger")
def test_asymptotic_ratio_within_5pct_below_1e3():
    for e, ratio in _asym_ratios("noma-i", "c", "powers.P_c_dBm"):
        if e < 1e-3:
            assert ratio == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("scenario,user,key", [("noma-i", "c", "powers.P_c_dBm"),
                                               ("noma-ii", "r", "powers.P_r_dBm")])
def test_asymptotic_ratio_converges(scenario, user, key):
    ratios = _asym_ratios(scenario, user, key)
    deep = [r for e, r in ratios if 1e-9 < e < 1e-5]
    assert deep and all(abs(r - 1) < 0.05 for r in deep)
    # ratio approaches 1 from above; below 1e-9 the exact form loses digits to 1 - sum
    tail = [r for e, r in ratios if 1e-9 < e < 1e-2]
    assert all(x >= y for x, y in zip(tail, tail[1:]))


def test_asymptotic_out_of_range_is_flagged_not_clamped():
    r = A.asymptotic_op(cfg_at(**{"powers.P_c_dBm": 0.0}), "noma-i", "c")
    assert r.value > 1 and r.out_of_range
    assert not A.op_noma(cfg_at(), "noma-i", "c").out_of_range


def test_diversity_orders():
    cfg = cfg_at()
    assert A.diversity_order(cfg, "noma-i", "c") == 3
    assert A.diversity_order(cfg, "noma-i", "r") == 0
    assert A.diversity_order(cfg_at(**{"fading.m": 2}), "noma-ii", "r") == 2
    assert A.diversity_order(cfg, "noma-ii", "c") == 0


# --- REIR -------------------------------------------------------------------

def test_reir_zero_without_shared_band():
    cfg = cfg_at(bandwidth={"alpha_semi": 0.0, "beta_semi": 0.0, "epsilon_semi": 1.0, "B": 1e7})
    assert A.reir_general(cfg).value == 0.0
    assert A.reir_rayleigh(cfg).value == 0.0


@pytest.mark.parametrize("pbs", [-10.0, 10.0, 60.0, 100.0, 140.0])
def test_reir_rayleigh_equals_general(pbs):
    cfg = cfg_at(**{"fading.m": 1, "powers.P_BS_dBm": pbs})
    assert A.reir_general(cfg).value == pytest.approx(A.reir_rayleigh(cfg).value, rel=1e-6)


def test_reir_vanishes_with_bs_power():
    assert A.reir_general(cfg_at(**{"powers.P_BS_dBm": -60.0})).value < 1e-6


@pytest.mark.parametrize("m", [1, 2, 4])
def test_reir_kernel_matches_expectation_of_log(m):
    # E[ln(1 + XY/a)] by integrating the Gamma-conditional closed form over X
    a = 0.05
    dist = stats.gamma(m, scale=1 / m)

    def inner(x):
        s = m * a / x
        return sum(specfun.exp_integral_en_scaled(k + 1, s) for k in range(m))

    ref = integrate.quad(lambda x: dist.pdf(x) * inner(x), 0, np.inf, epsrel=1e-11, limit=400)[0]
    assert A.reir_kernel(m, a) == pytest.approx(ref, rel=1e-8)


def test_high_snr_slope_values():
    radar = S.preset().radar
    s = A.high_snr_slope(radar)
    assert s == pytest.approx(0.01 / (2e-6 * math.log(2)), rel=1e-15)
    assert s == pytest.approx(7213.475, abs=1e-3)
    from dataclasses import replace
    assert A.high_snr_slope(replace(radar, duty_cycle=0.02)) == pytest.approx(2 * s, rel=1e-15)
    assert A.high_snr_slope(replace(radar, pulse_duration=2e-6)) == pytest.approx(s / 2, rel=1e-15)


def test_reir_asymptotic_shape_restriction():
    c2 = cfg_at(**{"fading.m": 2})
    with pytest.raises(A.UnsupportedAsymptoticError):
        A.reir_asymptotic(c2)
    assert A.reir_asymptotic(c2, fallback=True).value == pytest.approx(A.reir_general(c2).value)


def test_reir_asymptotic_matches_general_at_high_snr():
    for pbs in (100.0, 120.0, 140.0):
        cfg = cfg_at(**{"powers.P_BS_dBm": pbs})
        dc = S.derive_constants(cfg)
        # echo-SNR prefactor Xi d_r^-alpha_r at or above 40 dB
        assert 10 * math.log10(dc.Xi_r1 * cfg.geometry.d_r ** -4.5) >= 40
        assert A.reir_asymptotic(cfg).value == pytest.approx(A.reir_general(cfg).value, rel=0.03)


@pytest.mark.parametrize("m", [3, 4, 6])
def test_reir_asymptotic_leading_log(m):
    # as a -> 0, E[ln(1 + W/a)] = ln(1/a) + 2 (psi(m) - ln m) + o(1)
    a = 1e-9
    i67, i5 = A._reir_asym_parts(m, a)
    val = m**m / math.gamma(m) * (i67 + sum(i5))
    ref = -math.log(a) + 2 * (specfun.digamma(m) - math.log(m))
    assert val == pytest.approx(ref, rel=1e-6)
    assert A.reir_kernel(m, a) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("m", [3, 4])
def test_reir_asymptotic_pieces_match_defining_integrals(m):
    a = 1e-4
    i67, i5 = A._reir_asym_parts(m, a)

    def q(f):
        return integrate.quad(f, 0, np.inf, epsrel=1e-11, limit=500, points=None)[0]

    e1 = lambda x: specfun.exp_integral_en(1, m * a / x)
    i6 = q(lambda x: x ** (m - 1) * math.exp(-m * x) * e1(x) if x > 0 else 0.0)
    i7 = m * a * q(lambda x: x ** (m - 2) * math.exp(-m * x) * e1(x) if x > 0 else 0.0)
    assert i67 == pytest.approx(i6 + i7, rel=0.01)
    for k in range(1, m):
        ik = q(lambda x: x ** (m - 1) * math.exp(-m * x) * specfun.exp_integral_en(k + 1, m * a / x) if x > 0 else 0.0)
        assert i5[k - 1] == pytest.approx(ik, rel=0.01)


def test_reir_slope_finite_difference():
    r1 = A.reir_general(cfg_at(**{"powers.P_BS_dBm": 130.0})).value
    r2 = A.reir_general(cfg_at(**{"powers.P_BS_dBm": 131.0})).value
    slope = (r2 - r1) / (0.1 * math.log(10))
    assert slope == pytest.approx(A.high_snr_slope(S.preset().radar), rel=0.02)


# --- BER --------------------------------------------------------------------

def test_ber():
    p = A.BerParams(4)
    assert p.a_ber == 1.0
    assert p.b_ber == pytest.approx(4 * math.sin(math.pi / 4))
    assert A.ber_mpsk(p, 0.0) == pytest.approx(0.5 * p.a_ber)
    ref = 0.5 * math.erfc(math.sqrt(4 * math.sin(math.pi / 4) * 10) / math.sqrt(2))
    assert A.ber_mpsk(p, 10.0) == pytest.approx(ref, rel=1e-14)
    assert A.ber_mpsk(p, 1e4) < 1e-300 or A.ber_mpsk(p, 1e4) == 0.0
    assert A.BerParams(8, standard_psk=True).b_ber == pytest.approx(2 * 3 * math.sin(math.pi / 8) ** 2)
    with pytest.raises(specfun.DomainError):
        A.BerParams(1)
    with pytest.raises(specfun.DomainError):
        A.BerParams(6)


# --- capacity ---------------------------------------------------------------

def test_capacity_ties_and_ordering():
    def at(b):
        return cfg_at(bandwidth={"alpha_semi": 0.0, "beta_semi": b, "epsilon_semi": 1 - b, "B": 1e7})
    c0 = at(0.0)
    assert A.aggregate_capacity(c0, "fd").value == pytest.approx(A.aggregate_capacity(c0, "oma").value, rel=1e-14)
    for b in (0.3, 0.7):
        c = at(b)
        fd, oma, noma = (A.aggregate_capacity(c, k).value for k in ("fd", "oma", "noma"))
        assert fd <= oma <= noma


def test_noma_order_follows_geometry():
    assert A.noma_scenario_for(S.preset()) is Scenario.NOMA_SEMI_I
    assert A.noma_scenario_for(S.preset("paper-sec6-ii")) is Scenario.NOMA_SEMI_II
