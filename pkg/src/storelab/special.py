"""Distribution functions for the normal, Student t, and chi-squared laws.

The regularized incomplete beta and gamma functions follow the classical
series / continued-fraction evaluations (Abramowitz & Stegun 6.5 and 26.5,
modified Lentz recurrence for the continued fractions).  Quantiles invert
the CDFs with a bracketed Newton iteration, so quantile and CDF are exact
inverses of each other to roughly 1e-12 in probability.
"""

from __future__ import annotations

import math

_EPS = 3e-16
_TINY = 1e-300
_MAX_ITER = 10**7
_SQRT2 = math.sqrt(2.0)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 600):
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
    raise ArithmeticError(f"incomplete beta continued fraction stalled (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be > 0, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ValueError(f"shape must be > 0, got {a}")
    if x < 0:
        raise ValueError(f"argument must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    log_front = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        # series expansion, safe and fast below the bulk
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                return total * math.exp(log_front)
        raise ArithmeticError(f"incomplete gamma series stalled (a={a}, x={x})")
    # continued fraction for the upper tail (modified Lentz)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return 1.0 - math.exp(log_front) * h
    raise ArithmeticError(f"incomplete gamma continued fraction stalled (a={a}, x={x})")


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation of the standard normal quantile,
# used as the starting point for two Halley refinements below.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)


def _normal_quantile_approx(p: float) -> float:
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        c, d = _ACKLAM_C, _ACKLAM_D
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        return num / den
    if p > p_high:
        return -_normal_quantile_approx(1.0 - p)
    q = p - 0.5
    r = q * q
    a, b = _ACKLAM_A, _ACKLAM_B
    num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
    den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
    return q * num / den


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # refine in the lower tail, where erfc keeps full relative precision
        return -normal_quantile(1.0 - p)
    x = _normal_quantile_approx(p)
    # Halley refinement against the erfc-based CDF
    for _ in range(3):
        err = normal_cdf(x) - p
        if err == 0.0:
            break
        d = normal_pdf(x)
        if d <= 0.0:
            break
        u = err / d
        x -= u / (1.0 + 0.5 * x * u)
    return x


def _invert_monotone_cdf(cdf, pdf, p: float, lo: float, hi: float, x0: float) -> float:
    """Bracketed Newton solve of cdf(x) = p; cdf must be increasing on [lo, hi]."""
    x = min(max(x0, lo), hi)
    if x == lo or x == hi:
        x = 0.5 * (lo + hi)
    for _ in range(200):
        f = cdf(x) - p
        if f > 0.0:
            hi = x
        elif f < 0.0:
            lo = x
        else:
            return x
        slope = pdf(x)
        step_ok = slope > 0.0 and math.isfinite(slope)
        x_new = x - f / slope if step_ok else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * (1.0 + abs(x_new)):
            return x_new
        x = x_new
    return x


def t_cdf(x: float, df: int) -> float:
    """CDF of Student's t with df >= 1 degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if x == 0.0:
        return 0.5
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + x * x))
    return 1.0 - tail if x > 0 else tail


def t_pdf(x: float, df: int) -> float:
    log_norm = (
        math.lgamma(0.5 * (df + 1))
        - math.lgamma(0.5 * df)
        - 0.5 * math.log(df * math.pi)
    )
    return math.exp(log_norm - 0.5 * (df + 1) * math.log1p(x * x / df))


def t_quantile(p: float, df: int) -> float:
    """Inverse CDF of Student's t, by bracketed Newton on the CDF."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)
    # bracket [0, hi] by doubling; heavy tails can push hi very far out
    hi = 1.0
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError(f"failed to bracket t quantile at p={p}, df={df}")
    x0 = normal_quantile(p)
    return _invert_monotone_cdf(lambda v: t_cdf(v, df), lambda v: t_pdf(v, df), p, 0.0, hi, x0)


def chi2_cdf(x: float, df: int) -> float:
    """CDF of the chi-squared law with df >= 1 degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if x <= 0.0:
        return 0.0
    return gammainc_lower(0.5 * df, 0.5 * x)


def chi2_pdf(x: float, df: int) -> float:
    if x <= 0.0:
        return 0.0
    half = 0.5 * df
    return math.exp((half - 1.0) * math.log(x) - 0.5 * x - half * math.log(2.0) - math.lgamma(half))


def chi2_quantile(p: float, df: int) -> float:
    """Inverse CDF of the chi-squared law, by bracketed Newton on the CDF."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    half = 0.5 * df
    # Wilson-Hilferty start; fall back to inverting the small-x series
    z = normal_quantile(p)
    cube = 1.0 - 2.0 / (9.0 * df) + z * math.sqrt(2.0 / (9.0 * df))
    x0 = df * cube**3 if cube > 0 else 0.0
    if x0 <= 0.0:
        x0 = 2.0 * math.exp((math.log(p) + math.lgamma(half + 1.0)) / half)
    lo, hi = 0.0, max(x0, 1.0)
    while chi2_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError(f"failed to bracket chi2 quantile at p={p}, df={df}")
    return _invert_monotone_cdf(lambda v: chi2_cdf(v, df), lambda v: chi2_pdf(v, df), p, lo, hi, x0)
