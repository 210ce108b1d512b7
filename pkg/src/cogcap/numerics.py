"""Adaptive quadrature and bracketed root finding.

``integrate`` is a globally adaptive 10/21-point Gauss-Kronrod scheme. A
semi-infinite range [c, inf) is mapped onto (0, 1] with t = 1/(1 + v - c);
Kronrod nodes are interior, so neither the mapped endpoint t = 0 nor an
integrable log singularity at ``lo`` is ever evaluated.

Integrands must be vectorised: they receive a 1-D float array.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

# Kronrod 21-point abscissae (nonnegative half) and weights; Gauss 10-point
# weights sit on the odd-indexed abscissae.
_XGK = np.array([
    0.99565716302580808074, 0.97390652851717172008, 0.93015749135570822600,
    0.86506336668898451073, 0.78081772658641689706, 0.67940956829902440623,
    0.56275713466860468334, 0.43339539412924719080, 0.29439286270146019813,
    0.14887433898163121088, 0.0,
])
_WGK = np.array([
    0.011694638867371874278, 0.032558162307964727479, 0.054755896574351996031,
    0.075039674810919952767, 0.093125454583697605535, 0.10938715880229764190,
    0.12349197626206585108, 0.13470921731147332593, 0.14277593857706008080,
    0.14773910490133849137, 0.14944555400291690566,
])
_WG = np.array([
    0.066671344308688137594, 0.14945134915058059315, 0.21908636251598204400,
    0.26926671930999635509, 0.29552422471475287017,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG_FULL = np.zeros(21)
_WG_FULL[1:10:2] = _WG
_WG_FULL[11:20:2] = _WG[::-1]

_MACHEP = np.finfo(float).eps


class NumericsError(ArithmeticError):
    pass


class QuadratureError(NumericsError):
    def __init__(self, message, value, error):
        super().__init__(f"{message} (estimate {value!r}, error {error!r})")
        self.value = value
        self.error = error


class NoBracketError(NumericsError):
    pass


class RootIterationError(NumericsError):
    pass


class BracketNotFound(NumericsError):
    pass


@dataclass(frozen=True)
class QuadSpec:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class RootSpec:
    abs_tol: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")


class QuadResult(NamedTuple):
    value: float
    error: float
    evaluations: int


def _kronrod(f, a, b, tail_origin):
    """Apply the 21-point rule on [a, b]; in tail mode [a, b] is in t-space."""
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = centre + half * _NODES
    if tail_origin is None:
        vals = np.asarray(f(pts), dtype=float)
    else:
        x = tail_origin + (1.0 - pts) / pts
        vals = np.asarray(f(x), dtype=float) / (pts * pts)
    if vals.shape != pts.shape:
        vals = np.broadcast_to(vals, pts.shape)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("integrand returned a non-finite value", math.nan, math.inf)
    resk = half * float(_WK @ vals)
    resg = half * float(_WG_FULL @ vals)
    reskh = resk / (2 * half) if half else 0.0
    resabs = abs(half) * float(_WK @ np.abs(vals))
    resasc = abs(half) * float(_WK @ np.abs(vals - reskh))
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50 * _MACHEP):
        err = max(50 * _MACHEP * resabs, err)
    return resk, err


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    spec: QuadSpec = QuadSpec(),
    points: Sequence[float] | None = None,
) -> QuadResult:
    """Integrate ``f`` over [lo, hi]; ``hi`` may be ``math.inf``.

    ``points`` are interior breakpoints (bumps, kinks, singularities) that
    seed the initial partition. Raises QuadratureError, carrying the best
    estimate, when ``max_subdivisions`` is exhausted.
    """
    if not math.isfinite(lo):
        raise ValueError("lower limit must be finite")
    if hi < lo:
        raise ValueError("hi must be >= lo")
    if hi == lo:
        return QuadResult(0.0, 0.0, 0)
    cuts = sorted(p for p in (points or ()) if lo < p < hi)
    edges = [lo, *cuts]
    segments = []
    if math.isinf(hi):
        for a, b in zip(edges[:-1], edges[1:]):
            segments.append((a, b, None))
        segments.append((0.0, 1.0, edges[-1]))
    else:
        edges.append(hi)
        for a, b in zip(edges[:-1], edges[1:]):
            segments.append((a, b, None))

    heap = []
    total = 0.0
    total_err = 0.0
    counter = 0
    for a, b, origin in segments:
        val, err = _kronrod(f, a, b, origin)
        total += val
        total_err += err
        heapq.heappush(heap, (-err, counter, a, b, origin, val))
        counter += 1
    n_eval = 21 * len(segments)
    settled_err = 0.0  # error of panels too narrow to split further

    subdivisions = len(segments)
    while total_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if not heap:
            break
        if subdivisions >= spec.max_subdivisions:
            raise QuadratureError("maximum subdivisions reached", total, total_err)
        neg_err, _, a, b, origin, val = heapq.heappop(heap)
        err = -neg_err
        mid = 0.5 * (a + b)
        if (b - a) <= 1e3 * _MACHEP * max(abs(a), abs(b), np.finfo(float).tiny) or mid in (a, b):
            settled_err += err
            if settled_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
                raise QuadratureError("roundoff prevents reaching tolerance", total, total_err)
            continue
        v1, e1 = _kronrod(f, a, mid, origin)
        v2, e2 = _kronrod(f, mid, b, origin)
        n_eval += 42
        subdivisions += 1
        total += v1 + v2 - val
        total_err += e1 + e2 - err
        heapq.heappush(heap, (-e1, counter, a, mid, origin, v1))
        heapq.heappush(heap, (-e2, counter + 1, mid, b, origin, v2))
        counter += 2
    # recompute the sums to shed accumulated cancellation in the running totals
    total = sum(item[5] for item in heap)
    total_err = sum(-item[0] for item in heap) + settled_err
    return QuadResult(float(total), float(total_err), n_eval)


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: RootSpec = RootSpec(),
) -> float:
    """Brent's method on a sign-changing bracket.

    Each step interpolates (inverse quadratic or secant) or bisects;
    bisection is forced whenever interpolation fails to shrink the bracket,
    so convergence is guaranteed for continuous ``f``.
    """
    a, b = float(lo), float(hi)
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise NoBracketError(f"f({a})={fa} and f({b})={fb} have the same sign")
    c, fc = a, fa
    d = e = b - a
    for _ in range(spec.max_iterations):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 2.0 * _MACHEP * abs(b) + 0.5 * spec.abs_tol
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0.0:
            return b
        if abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        b += d if abs(d) > tol else math.copysign(tol, m)
        fb = f(b)
    raise RootIterationError(f"no convergence in {spec.max_iterations} iterations")


def auto_bracket(
    f: Callable[[float], float],
    x0: float,
    grow: float = 2.0,
    max_expansions: int = 64,
) -> tuple[float, float]:
    """Grow [x0, x0*grow^k] upward until ``f`` changes sign.

    Raises BracketNotFound after ``max_expansions`` steps (upper end
    ``x0 * grow**max_expansions``).
    """
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    if not grow > 1:
        raise ValueError("grow must be > 1")
    lo, flo = x0, f(x0)
    if flo == 0.0:
        return lo, lo
    for _ in range(max_expansions):
        hi = lo * grow
        fhi = f(hi)
        if fhi == 0.0 or (fhi > 0) != (flo > 0):
            return lo, hi
        lo, flo = hi, fhi
    raise BracketNotFound(f"no sign change up to {lo!r}")
