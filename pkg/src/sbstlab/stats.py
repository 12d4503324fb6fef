"""Descriptive statistics and Welch's two-sample t-test.

The Student-t tail comes from the regularized incomplete beta function,
evaluated with the modified Lentz continued fraction; no SciPy needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

DESIRED_CL = 90.0

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


class InsufficientData(ValueError):
    pass


def mean_stdev(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1 denominator)."""
    xs = [float(v) for v in values]
    n = len(xs)
    if n < 2:
        raise InsufficientData(f"need at least 2 values for a standard deviation, got {n}")
    m = math.fsum(xs) / n
    var = math.fsum((x - m) ** 2 for x in xs) / (n - 1)
    return m, math.sqrt(var)


def _beta_cf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
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
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf_two_sided(t, df)
    return 1.0 - tail if t > 0 else tail


def t_cdf_closed_form(t: float, df: int) -> float:
    """Exact CDF for one or two degrees of freedom."""
    if df == 1:
        return 0.5 + math.atan(t) / math.pi
    if df == 2:
        return 0.5 + t / (2.0 * math.sqrt(2.0 + t * t))
    raise ValueError("closed form only for df in {1, 2}")


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p_two_sided: float
    actual_cl: float
    # both samples constant and equal: t = 0 and p = 1 by definition
    exact_equality: bool = False

    def significant(self, desired_cl: float = DESIRED_CL) -> bool:
        return self.actual_cl >= desired_cl


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided Welch (unequal variances) test; ``actual_cl = 100 (1 - p)``."""
    ma, sa = mean_stdev(a)
    mb, sb = mean_stdev(b)
    na, nb = len(a), len(b)
    va, vb = sa * sa / na, sb * sb / nb
    se2 = va + vb
    if se2 == 0.0:
        if ma == mb:
            return TTestResult(0.0, float(na + nb - 2), 1.0, 0.0, exact_equality=True)
        t = math.copysign(math.inf, ma - mb)
        return TTestResult(t, float(na + nb - 2), 0.0, 100.0)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (va * va / (na - 1) + vb * vb / (nb - 1))
    p = t_sf_two_sided(t, df)
    return TTestResult(t, df, p, 100.0 * (1.0 - p))


@dataclass(frozen=True)
class CellStats:
    ga_mean: float
    ga_std: float
    rnd_mean: float
    rnd_std: float
    actual_cl: float
    ttest: TTestResult


def summarize_cell(ga: Sequence[float], rnd: Sequence[float]) -> CellStats:
    if len(ga) != len(rnd):
        raise ValueError("GA and random samples must have equal length")
    gm, gs = mean_stdev(ga)
    rm, rs = mean_stdev(rnd)
    tt = welch_t_test(ga, rnd)
    return CellStats(gm, gs, rm, rs, tt.actual_cl, tt)
