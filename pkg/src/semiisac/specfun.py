"""Special functions and quadrature used by the closed-form metrics.

Everything here is scalar-in/scalar-out unless noted. The quadrature
routines expect vectorised integrands: ``f`` receives a 1-D numpy array of
abscissae and must return an array of the same shape.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

EULER_GAMMA = 0.57721566490153286060651209008240243
_EPS = 1e-15
_FPMIN = 1e-300
_MAX_ITER = 10_000


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSettings()


# ---------------------------------------------------------------------------
# Gamma family
# ---------------------------------------------------------------------------

def ln_gamma(a):
    """Natural log of the Gamma function for ``a > 0``."""
    if not a > 0:
        raise DomainError(f"ln_gamma requires a > 0, got {a}")
    if float(a).is_integer() and a < 171:
        return math.log(math.factorial(int(a) - 1))
    return math.lgamma(a)


def _gamma_cfrac(a, x):
    # modified Lentz evaluation of Gamma(a, x) * exp(x) * x^(-a)
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def reg_lower_gamma(a, x):
    """Regularised lower incomplete gamma ``P(a, x) = gamma(a, x) / Gamma(a)``."""
    if not a > 0:
        raise DomainError(f"reg_lower_gamma requires a > 0, got {a}")
    if x < 0 or math.isnan(x):
        raise DomainError(f"reg_lower_gamma requires x >= 0, got {x}")
    return float(_sp.gammainc(a, x))


def reg_upper_gamma(a, x):
    """``Q(a, x) = Gamma(a, x) / Gamma(a)`` computed without cancellation."""
    if not a > 0:
        raise DomainError(f"reg_upper_gamma requires a > 0, got {a}")
    if x < 0 or math.isnan(x):
        raise DomainError(f"reg_upper_gamma requires x >= 0, got {x}")
    return float(_sp.gammaincc(a, x))


def upper_gamma(a, x):
    """Upper incomplete gamma ``Gamma(a, x)`` for real ``a``.

    Non-positive integer ``a = -k`` goes through ``E_{k+1}(x) / x^k``;
    other negative ``a`` use the downward recurrence
    ``Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a``.
    """
    if math.isnan(x) or x < 0:
        raise DomainError(f"upper_gamma requires x >= 0, got {x}")
    if a > 0:
        if x == 0:
            return math.exp(ln_gamma(a))
        if x < a + 1.0:
            return math.exp(ln_gamma(a)) * reg_upper_gamma(a, x)
        return math.exp(-x + a * math.log(x)) * _gamma_cfrac(a, x)
    if x == 0:
        raise DomainError(f"upper_gamma(a={a}, 0) diverges for a <= 0")
    if float(a).is_integer():
        k = int(-a)
        return exp_integral_en(k + 1, x) / x**k
    if x >= 1.0:
        return math.exp(-x + a * math.log(x)) * _gamma_cfrac(a, x)
    n = math.ceil(-a)
    value = upper_gamma(a + n, x)
    for j in range(n - 1, -1, -1):
        s = a + j
        value = (value - x**s * math.exp(-x)) / s
    return value


# ---------------------------------------------------------------------------
# Exponential integrals
# ---------------------------------------------------------------------------

def _e1_series(x):
    total = 0.0
    term = 1.0
    for k in range(1, _MAX_ITER):
        term *= -x / k
        inc = term / k
        total += inc
        if abs(inc) < abs(total) * _EPS + 1e-300:
            break
    return -EULER_GAMMA - math.log(x) - total


def _en_cfrac_scaled(n, x):
    # e^x E_n(x) by Lentz, valid for x > 1 (any n >= 1)
    b = x + n
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"E_n continued fraction did not converge (n={n}, x={x})")


def exp_integral_en_scaled(n, x):
    """``e^x E_n(x)``; finite for all ``x > 0`` where ``E_n`` itself underflows."""
    n = _check_order(n)
    if not x > 0:
        raise DomainError(f"E_n requires x > 0, got {x}")
    if n == 0:
        return 1.0 / x
    if x > 1.0:
        return _en_cfrac_scaled(n, x)
    return math.exp(x) * _en_upward(n, x)


def _en_upward(n, x):
    # forward recurrence from E_1 is stable while x <= 1
    ex = math.exp(-x)
    value = _e1_series(x)
    for k in range(1, n):
        value = (ex - x * value) / k
    return value


def _check_order(n):
    if isinstance(n, float):
        if not n.is_integer():
            raise DomainError(f"E_n order must be an integer, got {n}")
        n = int(n)
    if n < 0:
        raise DomainError(f"E_n order must be >= 0, got {n}")
    return n


def exp_integral_en(n, x):
    """Generalised exponential integral ``E_n(x) = int_1^inf e^{-xt} t^{-n} dt``."""
    n = _check_order(n)
    if not x > 0:
        raise DomainError(f"E_n requires x > 0, got {x}")
    if n == 0:
        return math.exp(-x) / x
    if x > 1.0:
        if x > 745.0:
            return 0.0
        return math.exp(-x) * _en_cfrac_scaled(n, x)
    return _en_upward(n, x)


# ---------------------------------------------------------------------------
# Bessel, digamma, Gaussian tail
# ---------------------------------------------------------------------------

def bessel_k0(x):
    """Modified Bessel function of the second kind, order zero.

    Accepts scalars or arrays; every element must be positive.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("bessel_k0 requires x > 0")
    out = _sp.k0(arr)
    return float(out) if out.ndim == 0 else out


def digamma(a):
    """Psi function for ``a > 0``."""
    if not a > 0:
        raise DomainError(f"digamma requires a > 0, got {a}")
    return float(_sp.psi(a))


def gaussian_q(x):
    """Standard Gaussian tail ``Q(x) = P(N(0,1) > x)``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------

# 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG_FULL = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, centre)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _WG_FULL[_i] = _w
    _WG_FULL[14 - _i] = _w
_WG_FULL[7] = _WG[3]


def _gk15(f, a, b):
    half = 0.5 * (b - a)
    centre = 0.5 * (a + b)
    fx = np.asarray(f(centre + half * _NODES), dtype=float)
    if fx.shape != _NODES.shape:
        fx = np.broadcast_to(fx, _NODES.shape)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("integrand returned a non-finite value", math.nan, math.inf)
    res_k = half * float(_WK @ fx)
    res_g = half * float(_WG_FULL @ fx)
    mean = res_k / (2.0 * half) if half else 0.0
    resasc = abs(half) * float(_WK @ np.abs(fx - mean))
    err = abs(res_k - res_g)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    resabs = abs(half) * float(_WK @ np.abs(fx))
    if resabs > _FPMIN / (50 * 2.2e-16):
        err = max(50 * 2.2e-16 * resabs, err)
    return res_k, err


def integrate_interval(f, a, b, settings=DEFAULT_QUAD, initial=4):
    """Adaptive GK15 estimate of ``int_a^b f``; returns ``(value, error)``."""
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    edges = np.linspace(a, b, initial + 1)
    heap = []
    total = 0.0
    err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _gk15(f, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val))
        total += val
        err_total += err
    n_intervals = initial
    while err_total > max(settings.abs_tol, settings.rel_tol * abs(total)):
        if n_intervals >= settings.max_subdivisions:
            raise QuadratureError("maximum subdivisions reached", sign * total, err_total)
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            raise QuadratureError("interval cannot be subdivided further", sign * total, err_total)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n_intervals += 1
        total += v1 + v2 - val
        err_total += e1 + e2 + neg_err
        if err_total <= max(settings.abs_tol, settings.rel_tol * abs(total)):
            # running sums drift; confirm with exact summation before stopping
            total = math.fsum(item[3] for item in heap)
            err_total = math.fsum(-item[0] for item in heap)
    return sign * total, err_total


def integrate_semi_infinite(f, settings=DEFAULT_QUAD, scale=1.0, lower=0.0, full_output=False):
    """Integrate ``f`` over ``(lower, inf)``.

    The half line is compactified with ``z = lower + scale * t / (1 - t)``,
    ``t`` in ``[0, 1)``, and the mapped integrand is refined adaptively.
    ``scale`` should be of the order of where ``f`` decays.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")

    def mapped(t):
        one_minus = 1.0 - t
        z = lower + scale * t / one_minus
        return np.asarray(f(z), dtype=float) * scale / (one_minus * one_minus)

    value, err = integrate_interval(mapped, 0.0, 1.0, settings, initial=8)
    if full_output:
        return value, err
    return value


# ---------------------------------------------------------------------------
# Product-of-Gamma and Rayleigh-REIR kernels
# ---------------------------------------------------------------------------

def _product_pdf_in_u(m, u):
    # density of sqrt(W) for W = X * Y, X, Y ~ Gamma(m, 1/m):  f_W(u^2) * 2u
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    log_c = math.log(4.0) + 2 * m * math.log(m) - 2 * ln_gamma(m)
    # K0 scaled form keeps large-u tails from underflowing prematurely
    arg = 2.0 * m * up
    out[pos] = np.exp(log_c + (2 * m - 1) * np.log(up) - arg) * _sp.k0e(arg)
    return out


def _check_shape(m):
    if isinstance(m, float) and m.is_integer():
        m = int(m)
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise DomainError(f"Nakagami shape must be a positive integer, got {m}")
    return int(m)


def _product_gamma_parts(m, x, settings):
    m = _check_shape(m)
    if x < 0 or math.isnan(x):
        raise DomainError(f"product CDF requires x >= 0, got {x}")
    if x == 0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    root = math.sqrt(x)
    # integrate whichever side of u = 1 is shorter and complement the other
    if root <= 1.0:
        lower, _ = integrate_interval(lambda u: _product_pdf_in_u(m, u), 0.0, root, settings)
        lower = min(1.0, max(0.0, lower))
        return lower, 1.0 - lower
    upper = integrate_semi_infinite(
        lambda u: _product_pdf_in_u(m, u), settings, scale=1.0 / (2.0 * m), lower=root
    )
    upper = min(1.0, max(0.0, upper))
    return 1.0 - upper, upper


def meijer_cdf_product_gamma(m, x, settings=DEFAULT_QUAD):
    """CDF of ``X * Y`` with ``X, Y`` i.i.d. unit-mean ``Gamma(m, 1/m)``.

    Equals ``G^{21}_{13}(m^2 x | 1; m, m, 0) / Gamma(m)^2``, evaluated by
    quadrature of the Bessel-K0 density after ``z = u^2``.
    """
    return _product_gamma_parts(m, x, settings)[0]


def product_gamma_sf(m, x, settings=DEFAULT_QUAD):
    """Survival function ``1 - F(x)`` of the unit-mean Gamma product."""
    return _product_gamma_parts(m, x, settings)[1]


def meijer_rayleigh_reir_kernel(c, settings=DEFAULT_QUAD):
    """``G^{31}_{13}(c | 0; 0, 0, 1)`` via ``int_0^inf e^{-x} e^{c/x} E_1(c/x) dx``.

    This is ``E[ln(1 + W / c)]`` for ``W`` the product of two unit-mean
    exponentials.
    """
    if not c > 0:
        raise DomainError(f"Rayleigh REIR kernel requires c > 0, got {c}")

    def integrand(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            out[i] = math.exp(-xi) * exp_integral_en_scaled(1, c / xi) if xi > 0 else 0.0
        return out

    return integrate_semi_infinite(integrand, settings)
