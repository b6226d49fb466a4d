"""One-sided t-tests with Student-t tails from the regularized incomplete beta."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError

_CF_TOL = 1e-15
_CF_MAX_ITER = 1000
_TINY = 1e-300


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    delta_mu: float

    def to_dict(self):
        def clean(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")

        return {"t": clean(self.t), "df": self.df, "p": self.p, "delta_mu": self.delta_mu}


def _beta_cf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ParameterError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ParameterError("x must lie in [0, 1]")
    return _ibeta(a, b, x, 1.0 - x)


def _ibeta(a, b, x, y):
    # y = 1 - x, passed separately so callers can supply it without cancellation
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, y) / b


def t_tail(t, df):
    """Upper-tail probability P(T > t) for Student's t with ``df`` degrees of freedom."""
    if not df > 0:
        raise ParameterError("df must be > 0")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    if t == 0.0:
        return 0.5
    t2 = t * t
    half = 0.5 * _ibeta(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))
    return half if t > 0 else 1.0 - half


def _sample(x, name):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 2:
        raise ParameterError(f"{name} needs at least 2 observations")
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{name} contains non-finite values")
    return x


def _check_alternative(alternative):
    if alternative != "greater":
        raise ParameterError("only the one-sided 'greater' alternative is supported")


def welch_t(a, b, alternative="greater") -> TTestResult:
    """Welch's unequal-variance t-test of ``mean(a) > mean(b)``.

    When both samples have zero variance the decision is exact:
    p = 0 if mean(a) > mean(b), else p = 1.
    """
    _check_alternative(alternative)
    a, b = _sample(a, "a"), _sample(b, "b")
    na, nb = a.size, b.size
    delta = float(a.mean() - b.mean())
    va, vb = float(a.var(ddof=1)) / na, float(b.var(ddof=1)) / nb
    se2 = va + vb
    if se2 == 0.0:
        t = math.copysign(math.inf, delta) if delta else 0.0
        return TTestResult(t, float(na + nb - 2), 0.0 if delta > 0 else 1.0, delta)
    t = delta / math.sqrt(se2)
    df = float(se2 * se2 / (va * va / (na - 1) + vb * vb / (nb - 1)))
    return TTestResult(t, df, t_tail(t, df), delta)


def one_sample_t(sample, popmean, alternative="greater") -> TTestResult:
    """One-sample t-test of ``mean(sample) > popmean``; exact when the variance is zero."""
    _check_alternative(alternative)
    x = _sample(sample, "sample")
    n = x.size
    delta = float(x.mean() - popmean)
    s2 = float(x.var(ddof=1))
    if s2 == 0.0:
        t = math.copysign(math.inf, delta) if delta else 0.0
        return TTestResult(t, float(n - 1), 0.0 if delta > 0 else 1.0, delta)
    t = delta / math.sqrt(s2 / n)
    return TTestResult(t, float(n - 1), t_tail(t, n - 1), delta)
