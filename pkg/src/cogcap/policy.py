"""SU transmit power for the five channel-knowledge scenarios.

Every policy returns the unclamped power ``ps_unclamped`` that makes the PU
protection constraint hold with equality, and the transmitted power
``pt = min(max(ps, 0), Pm)``. A draw is blocked when ``ps <= 0``.

Scenarios 1-4 are closed form and vectorised over the gain arguments.
Scenario 5 solves

    E_Y[ Pr(X <= a Y + beta | Y) ] = alpha

for ``a`` (proportional to Ps), where X and Y are noncentral chi-squared
variables with two degrees of freedom built from the estimated gains.
``s5_constraint_residual`` evaluates the left side by adaptive quadrature and
is the reference path; ``s5_series_lhs`` is the Poisson/Whittaker series,
kept as a cross-check. ``power_s5_batch`` is a compiled solver for Monte
Carlo that agrees with ``power_s5`` to well below 1e-6 in pt.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .model import SystemParams
from .numerics import (
    BracketNotFound,
    QuadSpec,
    RootSpec,
    auto_bracket,
    find_root,
    integrate,
)
from .specfun import (
    DEFAULT_SERIES,
    SeriesControl,
    SeriesNonConvergence,
    _ncx2_cdf,
    _ncx2_pdf,
    i0e_scalar,
    kummer_m,
    ncx2_cdf,
    ncx2_pdf_scalar,
    poisson_sf_scalar,
    whittaker_m,
)


class PolicyOutput(NamedTuple):
    """Scalars for scalar inputs, arrays for array inputs."""

    ps_unclamped: float
    pt: float
    blocked: bool


def clamp(ps_unclamped, Pm):
    """min(max(ps, 0), Pm)."""
    return np.minimum(np.maximum(ps_unclamped, 0.0), Pm)


def _pack(ps, Pm):
    ps = np.asarray(ps, dtype=float)
    pt = clamp(ps, Pm)
    blocked = ~(ps > 0)
    pt = np.where(blocked, 0.0, pt)
    if ps.ndim == 0:
        return PolicyOutput(float(ps), float(pt), bool(blocked))
    return PolicyOutput(ps, pt, blocked)


def _ratio(num, den):
    # num / den with den >= 0; a zero gain with positive allowance is +inf
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out = np.where(den > 0, out, np.where(num > 0, np.inf, num))
    return out


def power_s1(params: SystemParams, g_p, g_sp) -> PolicyOutput:
    """Exact g_p and g_sp: meet gamma_p = gamma_T with equality."""
    headroom = params.Pp * np.asarray(g_p, dtype=float) / params.gamma_T - params.sigma2_p
    return _pack(_ratio(headroom, g_sp), params.Pm)


def _log_inv_alpha(params):
    return -math.log(params.alpha)


def power_s2(params: SystemParams, g_p) -> PolicyOutput:
    """Exact g_p, Rayleigh statistics of g_sp: Pr(gamma_p >= gamma_T | g_p) = 1 - alpha."""
    num = params.Pp * np.asarray(g_p, dtype=float) - params.gamma_T * params.sigma2_p
    ps = num / (_log_inv_alpha(params) * params.gamma_T * params.Omega_sp)
    return _pack(ps, params.Pm)


def s3_q(params: SystemParams) -> float:
    """Power-like constant of Scenario 3; the SU is blocked when it is <= 0."""
    return -(math.log1p(-params.alpha) * params.Pp * params.Omega_p / params.gamma_T
             + params.sigma2_p)


def power_s3(params: SystemParams, g_sp) -> PolicyOutput:
    """Exact g_sp, statistics of g_p: Pr(gamma_p >= gamma_T | g_sp) = 1 - alpha."""
    q = s3_q(params)
    if q <= 0:
        ps = np.full(np.shape(g_sp), q) if np.ndim(g_sp) else q
        return _pack(ps, params.Pm)
    return _pack(_ratio(q, g_sp), params.Pm)


def power_s4(params: SystemParams) -> PolicyOutput:
    """Statistics only: deterministic power meeting the unconditional constraint."""
    scale = params.Pp * params.Omega_p / (params.gamma_T * params.Omega_sp)
    ps = scale * (math.exp(-params.c2) / (1.0 - params.alpha) - 1.0)
    return _pack(ps, params.Pm)


def blocked_s1s2(params: SystemParams, g_p):
    """Shared S1/S2 blocking predicate: the PU SNR alone is at or below target."""
    return params.Pp * np.asarray(g_p) <= params.gamma_T * params.sigma2_p


# ---------------------------------------------------------------------------
# Scenario 5
# ---------------------------------------------------------------------------


class Scenario5Terms(NamedTuple):
    """X ~ chi'^2_2(lambda1), Y ~ chi'^2_2(lambda2); constraint X >= a_coef Y + beta."""

    lambda1: float
    lambda2: float
    a_coef: float
    beta: float


def s5_noncentrality_scale(params: SystemParams) -> float:
    return 2.0 * params.rho ** 2 / (1.0 - params.rho ** 2)


def s5_beta(params: SystemParams) -> float:
    return 2.0 * params.sigma2_p * params.gamma_T / (
        params.Omega_p * (1.0 - params.rho ** 2) * params.Pp)


def s5_a_per_watt(params: SystemParams) -> float:
    """a_coef / Ps."""
    return params.gamma_T * params.Omega_sp / (params.Omega_p * params.Pp)


def s5_terms(params: SystemParams, g_p_hat, g_sp_hat, ps=0.0) -> Scenario5Terms:
    k = s5_noncentrality_scale(params)
    return Scenario5Terms(
        lambda1=k * g_p_hat / params.Omega_p,
        lambda2=k * g_sp_hat / params.Omega_sp,
        a_coef=s5_a_per_watt(params) * ps,
        beta=s5_beta(params),
    )


S5_QUAD = QuadSpec(abs_tol=1e-13, rel_tol=1e-12, max_subdivisions=2000)


def _y_breakpoints(lam2):
    # the Y density is concentrated on sqrt(y) in sqrt(lam2) +- a few units
    root = math.sqrt(lam2)
    pts = [(root + d) ** 2 for d in (-8.0, -3.0, 0.0, 3.0, 8.0) if root + d > 0]
    return sorted(set(pts))


def s5_lhs_quadrature(terms: Scenario5Terms, spec: QuadSpec = S5_QUAD) -> float:
    """E_Y[F_X(a Y + beta)] by adaptive quadrature over the density of Y."""
    l1, l2, a, beta = terms
    if a == 0.0:
        return float(ncx2_cdf(l1, beta))
    tol = 1e-15

    def integrand(y):
        return _ncx2_pdf(l2, y) * _ncx2_cdf(l1, a * y + beta, tol, 100_000)

    return integrate(integrand, 0.0, math.inf, spec, points=_y_breakpoints(l2)).value


def s5_constraint_residual(params: SystemParams, terms: Scenario5Terms,
                           spec: QuadSpec = S5_QUAD) -> float:
    """LHS(a_coef) - alpha; increasing in a_coef, so its root is unique."""
    return s5_lhs_quadrature(terms, spec) - params.alpha


def s5_lhs_central(a_coef: float, beta: float) -> float:
    """Closed form of the LHS when both noncentralities vanish (rho = 0)."""
    return 1.0 - math.exp(-0.5 * beta) / (1.0 + a_coef)


def _whittaker_block(lam2, a, s, control):
    """C * M_{-s-1/2,0}(z) with z = lam2 / (2(1+a)) and the corrected prefactor

    C = exp(-lam2/2 + z/2) sqrt(2 / (lam2 (1+a))).  The product tends to
    exp(-lam2/2) / (1+a) * 1F1(s+1; 1; z) and that form is used at lam2 = 0.
    """
    z = lam2 / (2.0 * (1.0 + a))
    if lam2 == 0.0:
        return kummer_m(s + 1.0, 1.0, 0.0, control) / (1.0 + a)
    pref = math.exp(-0.5 * lam2 + 0.5 * z) * math.sqrt(2.0 / (lam2 * (1.0 + a)))
    return pref * whittaker_m(-s - 0.5, 0.0, z, control)


SERIES_VARIANTS = ("corrected", "printed")


def s5_series_lhs(params: SystemParams, terms: Scenario5Terms,
                  control: SeriesControl = DEFAULT_SERIES,
                  variant: str = "corrected") -> float:
    """E_Y[F_X(a Y + beta)] as a Poisson mixture of Whittaker-function sums.

    LHS = sum_j w_j(lambda1/2) [1 - e^{-beta/2} sum_{r<=j} sum_{s<=r}
          (beta/2)^{r-s}/(r-s)! (a/(1+a))^s C M_{-s-1/2,0}(z)]

    ``variant="printed"`` uses sqrt(8/...) in the Whittaker prefactor as it
    is usually typeset, which is twice the value of the integral it stands
    for; it exists only for the discrepancy report. ``params`` is accepted
    for signature symmetry with ``s5_constraint_residual``.
    """
    if variant not in SERIES_VARIANTS:
        raise ValueError(f"variant must be one of {SERIES_VARIANTS}")
    l1, l2, a, beta = (float(t) for t in terms)
    factor = 2.0 if variant == "printed" else 1.0
    q = a / (1.0 + a)
    hb = 0.5 * beta
    mu = 0.5 * l1
    eb = math.exp(-hb)

    blocks = []  # C * M_{-s-1/2,0}, filled lazily
    inv_fact = [1.0]  # (beta/2)^k / k!

    total = 0.0
    cum = 0.0  # sum_{r<=j} inner_r
    log_w = -mu
    for j in range(control.max_terms):
        if j > 0:
            log_w += math.log(mu) - math.log(j) if mu > 0 else -math.inf
        # inner_j = sum_{s<=j} (beta/2)^{j-s}/(j-s)! q^s block_s
        blocks.append(factor * _whittaker_block(l2, a, j, control))
        if j > 0:
            inv_fact.append(inv_fact[-1] * hb / j)
        inner = 0.0
        qs = 1.0
        for s in range(j + 1):
            inner += inv_fact[j - s] * qs * blocks[s]
            qs *= q
        cum += inner
        w = math.exp(log_w)
        total += w * (1.0 - eb * cum)
        # remaining Poisson weight, geometric bound once past the mode
        if j + 1 > mu:
            ratio = mu / (j + 2.0)
            tail = w * (mu / (j + 1.0)) / (1.0 - ratio) if ratio < 1 else math.inf
            if tail < control.abs_tol:
                return total
        if mu == 0.0:
            return total
    raise SeriesNonConvergence(f"Scenario-5 series did not converge in {control.max_terms} terms")


S5_ROOT = RootSpec(abs_tol=1e-13, max_iterations=300)


def power_s5(params: SystemParams, g_p_hat: float, g_sp_hat: float,
             quad: QuadSpec = S5_QUAD, root: RootSpec = S5_ROOT) -> PolicyOutput:
    """Scalar reference solver built on the quadrature residual.

    Blocked when the constraint already fails at Ps = 0 (ties count as
    blocked), reported with ps_unclamped = 0. When the residual is still
    negative at Pm the root is bracketed upward from Pm; if no sign change
    appears the power allowance is unbounded and ps_unclamped = inf.
    """
    if g_p_hat < 0 or g_sp_hat < 0:
        raise ValueError("estimated gains must be >= 0")
    base = s5_terms(params, g_p_hat, g_sp_hat, 0.0)
    kappa = s5_a_per_watt(params)

    def residual(ps):
        return s5_constraint_residual(params, base._replace(a_coef=kappa * ps), quad)

    if residual(0.0) >= 0.0:
        return PolicyOutput(0.0, 0.0, True)
    r_max = residual(params.Pm)
    if r_max < 0.0:
        try:
            lo, hi = auto_bracket(residual, params.Pm, grow=4.0, max_expansions=40)
        except BracketNotFound:
            return PolicyOutput(math.inf, params.Pm, False)
        ps = find_root(residual, lo, hi, root)
    else:
        ps = find_root(residual, 0.0, params.Pm, root)
    return PolicyOutput(ps, float(min(ps, params.Pm)), False)


# ---------------------------------------------------------------------------
# compiled batch solver for Monte Carlo
# ---------------------------------------------------------------------------

_GL_ORDER = 16
_GL_PANELS = 3
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_RICE_HALF_WIDTH = 8.5  # support of sqrt(Y) around sqrt(lambda2), in std units


@njit(cache=True)
def _rice_rule(lam2, gx, gw, panels, half_width, r2, wts):
    """Nodes Y = r^2 and normalised weights for E[g(Y)], Y ~ chi'^2_2(lam2)."""
    c = math.sqrt(lam2)
    lo = max(0.0, c - half_width)
    hi = c + half_width
    width = (hi - lo) / panels
    m = gx.shape[0]
    total = 0.0
    for p in range(panels):
        a = lo + p * width
        for i in range(m):
            r = a + 0.5 * width * (gx[i] + 1.0)
            d = r - c
            w = 0.5 * width * gw[i] * r * math.exp(-0.5 * d * d) * i0e_scalar(r * c)
            k = p * m + i
            r2[k] = r * r
            wts[k] = w
            total += w
    for k in range(r2.shape[0]):
        wts[k] /= total


@njit(cache=True)
def _poisson_lower_table(mu, tol, out):
    """Fill out[i] = Pr(N_mu < lo + i) for i = 0..n, N_mu ~ Poisson(mu).

    Returns (lo, n). Pr(N_mu < lo) and Pr(N_mu >= lo + n) are both below
    tol, so callers treat the table as 0 before its start and 1 after its end.
    """
    if mu <= 0.0:
        out[0] = 0.0
        out[1] = 1.0
        return 0, 1
    j0 = int(mu)
    log_w0 = -mu + j0 * math.log(mu) - math.lgamma(j0 + 1.0)
    # walk down to the left edge of the window
    w = math.exp(log_w0)
    j = j0
    while j > 0:
        if j < mu and w * (j / mu) / (1.0 - j / mu) < tol:
            break
        w *= j / mu
        j -= 1
    lo = j
    # walk up to the right edge
    w = math.exp(log_w0)
    j = j0
    while True:
        ratio = mu / (j + 2.0)
        if j + 1 > mu and ratio < 1.0 and w * (mu / (j + 1.0)) / (1.0 - ratio) < tol:
            break
        j += 1
        w *= mu / j
    hi = j
    n = hi + 1 - lo
    if n + 1 > out.shape[0]:
        return -1, 0
    w = math.exp(-mu + lo * math.log(mu) - math.lgamma(lo + 1.0))
    out[0] = 0.0
    for i in range(1, n + 1):
        out[i] = out[i - 1] + w
        w *= mu / (lo + i)
    return lo, n


@njit(cache=True)
def _ncx2_cdf_tabled(x, lo, n, table):
    """Pr(chi'^2_2(lam) <= x) = Pr(N_mu < N_z), z = x/2, from a lower table of N_mu."""
    if x <= 0.0:
        return 0.0
    z = 0.5 * x
    k_star = int(z)
    if k_star < lo + 1:
        k_star = lo + 1
    if k_star > lo + n:
        k_star = lo + n
    p_star = math.exp(-z + k_star * math.log(z) - math.lgamma(k_star + 1.0))
    total = 0.0
    p = p_star
    for k in range(k_star, lo + n + 1):
        total += p * table[k - lo]
        p *= z / (k + 1)
    p = p_star
    for k in range(k_star - 1, lo, -1):
        p *= (k + 1) / z
        total += p * table[k - lo]
    total += poisson_sf_scalar(lo + n + 1, z)
    if total > 1.0:
        return 1.0
    return total


@njit(cache=True)
def _lhs_and_slope(lam1, a, beta, r2, wts, lo, n, table):
    g = 0.0
    dg = 0.0
    for k in range(r2.shape[0]):
        x = a * r2[k] + beta
        g += wts[k] * _ncx2_cdf_tabled(x, lo, n, table)
        dg += wts[k] * r2[k] * ncx2_pdf_scalar(lam1, x)
    return g, dg


@njit(cache=True)
def _s5_solve_batch(lam1, lam2, beta, alpha, kappa, pm, gx, gw, panels, half_width,
                    tol, max_terms, ps_out, pt_out, blocked_out):
    n = lam1.shape[0]
    m = gx.shape[0] * panels
    r2 = np.empty(m)
    wts = np.empty(m)
    table = np.empty(max_terms)
    a_max = kappa * pm
    for i in range(n):
        l1 = lam1[i]
        t_lo, t_n = _poisson_lower_table(0.5 * l1, tol, table)
        if t_lo < 0:
            ps_out[i] = np.nan
            pt_out[i] = np.nan
            blocked_out[i] = False
            continue
        if _ncx2_cdf_tabled(beta, t_lo, t_n, table) >= alpha:
            ps_out[i] = 0.0
            pt_out[i] = 0.0
            blocked_out[i] = True
            continue
        blocked_out[i] = False
        _rice_rule(lam2[i], gx, gw, panels, half_width, r2, wts)
        g_hi, d_hi = _lhs_and_slope(l1, a_max, beta, r2, wts, t_lo, t_n, table)
        f_hi = g_hi - alpha
        if f_hi <= 0.0:
            ps_out[i] = np.inf
            pt_out[i] = pm
            continue
        g_lo, _ = _lhs_and_slope(l1, 0.0, beta, r2, wts, t_lo, t_n, table)
        lo = 0.0
        hi = a_max
        f_lo = g_lo - alpha
        # regula falsi start, then safeguarded Newton
        a = lo - f_lo * (hi - lo) / (f_hi - f_lo)
        for _ in range(100):
            g, dg = _lhs_and_slope(l1, a, beta, r2, wts, t_lo, t_n, table)
            f = g - alpha
            if f > 0.0:
                hi = a
            else:
                lo = a
            if f == 0.0:
                break
            step = f / dg if dg > 0.0 else np.inf
            a_new = a - step
            if not (lo < a_new < hi):
                a_new = 0.5 * (lo + hi)
            if abs(a_new - a) <= 1e-15 * a_max + 1e-300 or hi - lo <= 1e-15 * a_max:
                a = a_new
                break
            a = a_new
        ps = a / kappa
        ps_out[i] = ps
        pt_out[i] = min(ps, pm)


def power_s5_batch(params: SystemParams, g_p_hat, g_sp_hat) -> PolicyOutput:
    """Vectorised Scenario-5 policy for Monte Carlo.

    The expectation over Y uses a fixed Gauss-Legendre rule in sqrt(Y), and
    the root is found by safeguarded Newton on [0, a(Pm)]. Draws whose
    constraint still holds at Pm are reported with ps_unclamped = inf.
    """
    g_p_hat = np.ascontiguousarray(g_p_hat, dtype=float)
    g_sp_hat = np.ascontiguousarray(g_sp_hat, dtype=float)
    k = s5_noncentrality_scale(params)
    lam1 = k * g_p_hat / params.Omega_p
    lam2 = k * g_sp_hat / params.Omega_sp
    n = lam1.shape[0]
    ps = np.empty(n)
    pt = np.empty(n)
    blocked = np.empty(n, dtype=np.bool_)
    _s5_solve_batch(lam1, lam2, s5_beta(params), params.alpha, s5_a_per_watt(params),
                    params.Pm, _GL_X, _GL_W, _GL_PANELS, _RICE_HALF_WIDTH,
                    1e-17, 1 << 16, ps, pt, blocked)
    if np.any(np.isnan(pt)):
        raise SeriesNonConvergence("noncentrality too large for the batch solver")
    return PolicyOutput(ps, pt, blocked)


def power_batch(scenario, params: SystemParams, draw) -> PolicyOutput:
    """Dispatch a whole ChannelDraw to the scenario's policy."""
    from .model import ScenarioId

    scenario = ScenarioId.parse(scenario)
    n = len(draw)
    if scenario is ScenarioId.S1:
        return power_s1(params, draw.g_p, draw.g_sp)
    if scenario is ScenarioId.S2:
        return power_s2(params, draw.g_p)
    if scenario is ScenarioId.S3:
        return power_s3(params, draw.g_sp)
    if scenario is ScenarioId.S4:
        one = power_s4(params)
        return PolicyOutput(np.full(n, one.ps_unclamped), np.full(n, one.pt),
                            np.full(n, one.blocked))
    return power_s5_batch(params, draw.g_p_hat, draw.g_sp_hat)


AUDIT_LAMBDAS = (0.0, 2.5, 5.0, 10.0, 20.0)
AUDIT_A = (0.01, 0.1, 1.0)
AUDIT_BETA = (0.5, 2.0, 8.0)


def s5_series_audit(params: SystemParams, variant: str = "corrected",
                    lambdas=AUDIT_LAMBDAS, a_values=AUDIT_A, betas=AUDIT_BETA):
    """Series minus quadrature on a (lambda1, lambda2, a_coef, beta) grid.

    Returns a list of (lambda1, lambda2, a_coef, beta, series, quadrature).
    """
    rows = []
    for l1 in lambdas:
        for l2 in lambdas:
            for a in a_values:
                for b in betas:
                    t = Scenario5Terms(l1, l2, a, b)
                    rows.append((l1, l2, a, b, s5_series_lhs(params, t, variant=variant),
                                 s5_lhs_quadrature(t)))
    return rows
