"""Distribution functions needed by the ANOVA and post hoc code.

The F distribution goes through a continued-fraction regularized incomplete
beta. The studentized range CDF is a double Gauss-Legendre quadrature and
its quantile is found with Brent's method.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaincc, ndtr

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 20000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _check_dfs(d1, d2):
    if not (d1 > 0 and d2 > 0):
        raise ValueError(f"degrees of freedom must be positive, got ({d1}, {d2})")


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F(d1, d2) distribution."""
    _check_dfs(d1, d2)
    if math.isinf(x):
        return 1.0
    if x <= 0:
        return 0.0
    return betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail of F(d1, d2), computed directly to keep small p-values accurate."""
    _check_dfs(d1, d2)
    if math.isinf(x):
        return 0.0
    if x <= 0:
        return 1.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))


def chi2_sf(x: float, df: float) -> float:
    if df <= 0:
        raise ValueError("chi-square df must be positive")
    if math.isinf(x):
        return 0.0
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


_N_INNER = 240
_N_OUTER = 240
_Z_LIM = 8.5


@lru_cache(maxsize=None)
def _gl_nodes(n: int):
    return np.polynomial.legendre.leggauss(n)


def _range_cdf(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid standard normals <= w), vectorized over w."""
    x, wt = _gl_nodes(_N_INNER)
    z = _Z_LIM * x
    phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    diff = ndtr(z[None, :]) - ndtr(z[None, :] - w[:, None])
    integrand = phi[None, :] * np.clip(diff, 0.0, 1.0) ** (k - 1)
    return np.clip(k * _Z_LIM * (integrand @ wt), 0.0, 1.0)


def _log_scaled_chi_bounds(df: float, drop: float = 46.0) -> tuple[float, float]:
    """Support of u = ln(s) where s = sqrt(chi2_df / df) carries non-negligible mass.

    In u the integrand f(s)*s is proportional to exp(df*(u - (e^{2u}-1)/2)),
    peaked at u = 0.
    """
    h = lambda u: df * (u - math.expm1(2 * u) / 2) + drop
    lo = -1.0
    while h(lo) > 0:
        lo *= 2
    hi = 1.0
    while h(hi) > 0:
        hi *= 2
    return brentq(h, lo, 0.0), brentq(h, 0.0, hi)


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """P(Q <= q) for the studentized range of ``k`` means with ``df`` error dof."""
    if k < 2:
        raise ValueError("studentized range needs k >= 2")
    if df <= 0:
        raise ValueError("df must be positive")
    if q <= 0:
        return 0.0
    if math.isinf(df):
        return float(_range_cdf(np.array([q]), k)[0])
    lo, hi = _log_scaled_chi_bounds(df)
    x, wt = _gl_nodes(_N_OUTER)
    u = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    s = np.exp(u)
    # density of s times ds/du = s
    log_c = (df / 2) * math.log(df / 2) - math.lgamma(df / 2) + math.log(2.0)
    log_g = log_c + df * u - df * s * s / 2
    val = float(np.dot(wt * np.exp(log_g), _range_cdf(q * s, k))) * 0.5 * (hi - lo)
    return min(max(val, 0.0), 1.0)


def studentized_range_quantile(alpha: float, k: int, df: float, xtol: float = 1e-7) -> float:
    """Critical value q with P(Q <= q) = 1 - alpha."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if k < 2:
        raise ValueError("studentized range needs k >= 2")
    target = 1.0 - alpha
    g = lambda q: studentized_range_cdf(q, k, df) - target
    hi = 2.0
    while g(hi) < 0:
        hi *= 2
        if hi > 1e6:
            raise ArithmeticError("studentized range quantile bracket failed")
    return brentq(g, 1e-8, hi, xtol=xtol)
