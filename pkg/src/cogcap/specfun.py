"""Special functions behind the capacity and power-control formulas.

Scalar kernels are compiled with numba. Each one is exposed twice: as an
``njit`` function (``*_scalar``) for use inside other compiled loops, and as a
numpy ufunc (leading underscore) for vectorised integrands. The public
functions validate their domain and raise; the ufuncs do not.

Only what the two-user model needs is here: E1 / Gamma(0, x), I0, Kummer's
1F1 for nonnegative ``a``, Whittaker M with ``mu = 0``, and the noncentral
chi-squared law with two degrees of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-17
_E1_UNDERFLOW = 700.0


class SpecialFunctionError(ValueError):
    pass


class DomainError(SpecialFunctionError):
    pass


class SeriesNonConvergence(SpecialFunctionError):
    pass


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for the infinite sums (Poisson mixture, 1F1)."""

    abs_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be > 0, got {self.abs_tol}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


# ---------------------------------------------------------------------------
# exponential integral
# ---------------------------------------------------------------------------


@njit(cache=True)
def _e1_series(x):
    # E1 = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!), used for x <= 1
    c = 1.0
    s = 0.0
    for k in range(1, 100):
        c *= -x / k
        t = c / k
        s += t
        if abs(t) < _EPS:
            break
    return -EULER_GAMMA - math.log(x) - s


@njit(cache=True)
def e1_scaled_scalar(x):
    """exp(x) * E1(x) for x > 0."""
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    # modified Lentz continued fraction
    b = x + 1.0
    c = 1e300
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


@njit(cache=True)
def e1_scalar(x):
    if x <= 1.0:
        return _e1_series(x)
    if x > _E1_UNDERFLOW:
        return 0.0
    return e1_scaled_scalar(x) * math.exp(-x)


@vectorize(["float64(float64)"], cache=True)
def _e1(x):
    return e1_scalar(x)


@vectorize(["float64(float64)"], cache=True)
def _e1_scaled(x):
    return e1_scaled_scalar(x)


def _check_positive(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be > 0")
    return arr


def exp_integral_e1(x):
    """E1(x) = int_x^inf exp(-t)/t dt. Returns 0 beyond x = 700."""
    return _e1(_check_positive(x))


def upper_incomplete_gamma0(x):
    """Gamma(0, x); identical to E1."""
    return exp_integral_e1(x)


def exp_e1_scaled(x):
    """exp(x) * E1(x), finite for all x > 0 (~1/x for large x)."""
    return _e1_scaled(_check_positive(x))


# ---------------------------------------------------------------------------
# modified Bessel I0
# ---------------------------------------------------------------------------


@njit(cache=True)
def i0e_scalar(x):
    """exp(-x) * I0(x) for x >= 0."""
    if x <= 20.0:
        q = 0.25 * x * x
        term = 1.0
        s = 1.0
        k = 1
        while k < 200:
            term *= q / (k * k)
            s += term
            if term < _EPS * s:
                break
            k += 1
        return s * math.exp(-x)
    # large-argument asymptotic series; truncated at its smallest term
    term = 1.0
    s = 1.0
    k = 1
    while k < 200:
        nxt = term * (2 * k - 1) ** 2 / (8.0 * k * x)
        if nxt >= term:
            break
        term = nxt
        s += term
        if term < _EPS * s:
            break
        k += 1
    return s / math.sqrt(2.0 * math.pi * x)


@vectorize(["float64(float64)"], cache=True)
def _i0e(x):
    return i0e_scalar(x)


def _check_nonneg(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError(f"{name} must be >= 0")
    return arr


def bessel_i0e(x):
    """Exponentially scaled I0: exp(-x) I0(x)."""
    return _i0e(_check_nonneg(x))


def bessel_i0(x):
    arr = _check_nonneg(x)
    with np.errstate(over="ignore"):
        return _i0e(arr) * np.exp(arr)


# ---------------------------------------------------------------------------
# confluent hypergeometric / Whittaker
# ---------------------------------------------------------------------------


def kummer_m(a, b, z, control=DEFAULT_SERIES):
    """Kummer's 1F1(a; b; z) by its power series (z >= 0).

    Negative ``a`` is accepted; the stopping test is only applied once the
    factors (a + k) are all positive, since a small term before that point
    does not bound the remainder. Heavy cancellation (large z with a < 0)
    loses relative accuracy.
    """
    if b <= 0 and float(b).is_integer():
        raise DomainError(f"b must not be a nonpositive integer, got {b}")
    if z < 0:
        raise DomainError(f"z must be >= 0, got {z}")
    k_start = max(0, math.ceil(-a))
    term = 1.0
    total = 1.0
    for k in range(control.max_terms):
        term *= (a + k) / (b + k) * z / (k + 1)
        total += term
        if term == 0.0:
            return total
        if k >= k_start and abs(term) <= control.abs_tol * max(1.0, abs(total)):
            return total
    raise SeriesNonConvergence(
        f"1F1({a}; {b}; {z}) did not converge in {control.max_terms} terms"
    )


def whittaker_m(kappa, mu, z, control=DEFAULT_SERIES):
    """Whittaker M_{kappa,0}(z) = exp(-z/2) sqrt(z) 1F1(1/2 - kappa; 1; z)."""
    if mu != 0:
        raise DomainError(f"only mu = 0 is supported, got {mu}")
    if not z > 0:
        raise DomainError(f"z must be > 0, got {z}")
    return math.exp(-0.5 * z) * math.sqrt(z) * kummer_m(0.5 - kappa, 1.0, z, control)


# ---------------------------------------------------------------------------
# noncentral chi-squared, two degrees of freedom
# ---------------------------------------------------------------------------


@njit(cache=True)
def poisson_sf_scalar(n, z):
    """Pr(Poisson(z) >= n), i.e. the regularised lower gamma P(n, z)."""
    if n <= 0:
        return 1.0
    if z <= 0.0:
        return 0.0
    logp = -z + n * math.log(z) - math.lgamma(n + 1.0)
    if z < n:
        s = 1.0
        r = 1.0
        k = n
        while k < n + 100000:
            k += 1
            r *= z / k
            s += r
            if r < _EPS * s:
                break
        return math.exp(logp + math.log(s))
    # z >= n: complement of the lower Poisson tail, summed from k = n-1 down
    logq = logp + math.log(n / z)
    s = 1.0
    r = 1.0
    k = n - 1
    while k > 0:
        r *= k / z
        k -= 1
        s += r
        if r < _EPS * s:
            break
    return -math.expm1(logq + math.log(s))


@njit(cache=True)
def ncx2_cdf_scalar(lam, x, tol, max_terms):
    """Pr(chi'^2_2(lam) <= x) as a Poisson mixture of gamma CDFs.

    Summation starts at the Poisson mode and walks outwards; each direction
    stops once a geometric bound on the remaining Poisson weight (times the
    remaining gamma factor) drops below tol/2. Returns NaN when max_terms is
    exhausted.
    """
    if x <= 0.0:
        return 0.0
    z = 0.5 * x
    if z <= 0.0:  # x subnormal
        return 0.0
    mu = 0.5 * lam
    if mu <= 0.0:  # lam zero or subnormal
        return -math.expm1(-z)
    j0 = int(mu)
    w0 = math.exp(-mu + j0 * math.log(mu) - math.lgamma(j0 + 1.0))
    p0 = poisson_sf_scalar(j0 + 1, z)
    logt0 = -z + j0 * math.log(z) - math.lgamma(j0 + 1.0)
    total = w0 * p0
    terms = 1

    w = w0
    p = p0
    logt = logt0
    j = j0
    while True:
        j += 1
        w *= mu / j
        logt += math.log(z / j)
        p -= math.exp(logt)
        if p < 0.0:
            p = 0.0
        total += w * p
        terms += 1
        if p == 0.0:
            break
        if j + 2 > mu:
            tail = w * (mu / (j + 1)) / (1.0 - mu / (j + 2))
            if p * tail < 0.5 * tol:
                break
        if terms > max_terms:
            return np.nan

    w = w0
    p = p0
    logt = logt0
    j = j0
    while j > 0:
        p += math.exp(logt)
        if p > 1.0:
            p = 1.0
        logt += math.log(j / z)
        w *= j / mu
        j -= 1
        total += w * p
        terms += 1
        if j < mu:
            tail = w * (j / mu) / (1.0 - j / mu)
            if tail < 0.5 * tol:
                break
        if terms > max_terms:
            return np.nan

    if total < 0.0:
        return 0.0
    if total > 1.0:
        return 1.0
    return total


@njit(cache=True)
def ncx2_pdf_scalar(lam, x):
    if x <= 0.0:
        return 0.0
    sx = math.sqrt(x)
    sl = math.sqrt(lam)
    return 0.5 * math.exp(-0.5 * (sx - sl) ** 2) * i0e_scalar(sx * sl)


@vectorize(["float64(float64, float64, float64, int64)"], cache=True)
def _ncx2_cdf(lam, x, tol, max_terms):
    return ncx2_cdf_scalar(lam, x, tol, max_terms)


@vectorize(["float64(float64, float64)"], cache=True)
def _ncx2_pdf(lam, x):
    return ncx2_pdf_scalar(lam, x)


def ncx2_cdf(lam, x, control=DEFAULT_SERIES):
    """CDF of the noncentral chi-squared law with 2 degrees of freedom."""
    lam = _check_nonneg(lam, "lambda")
    x = _check_nonneg(x, "x")
    out = _ncx2_cdf(lam, x, control.abs_tol, control.max_terms)
    if np.any(np.isnan(out)):
        raise SeriesNonConvergence(
            f"noncentral chi2 series exceeded {control.max_terms} terms"
        )
    return out


def ncx2_pdf(lam, x):
    """Density 0.5 exp(-(x+lam)/2) I0(sqrt(lam x)), evaluated in scaled form."""
    lam = _check_nonneg(lam, "lambda")
    x = _check_positive(x)
    return _ncx2_pdf(lam, x)
