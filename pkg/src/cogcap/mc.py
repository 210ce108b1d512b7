"""Monte Carlo oracle for all five scenarios.

Draws are generated with counter-based Philox streams: the sample index range
[0, n) is cut into ``stream_count`` contiguous blocks, block k is generated
by a Philox generator keyed on (seed, k) and the blocks are concatenated in
order. A run is therefore a pure function of (seed, stream_count, n).

Constraint audits re-draw the gains the SU does not know from a second
Philox stream per block, keyed on (seed, k, 1), and check gamma_p >= gamma_T
on draws with 0 < ps < Pm.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dist import DEFAULT_CAPACITY_GRID, DistributionCurve
from .model import ChannelDraw, ScenarioId, SystemParams, capacity, pu_sinr, su_sinr
from .policy import power_batch

# gamma_p equals gamma_T to rounding on the S1 boundary; allow for it
_SINR_REL_TOL = 1e-9


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 1_000_000
    seed: int = 20_240_601
    scenario: ScenarioId = ScenarioId.S1
    stream_count: int = 8

    def __post_init__(self):
        object.__setattr__(self, "scenario", ScenarioId.parse(self.scenario))
        problems = []
        if int(self.n_samples) < 1:
            problems.append("n_samples must be >= 1")
        if int(self.stream_count) < 1:
            problems.append("stream_count must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ValueError("; ".join(problems))

    def replace(self, **changes) -> "McConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class McSummary:
    empirical_capacity_cdf: DistributionCurve
    blocking_rate: float
    constraint_satisfaction_rate: float  # nan when no draw has 0 < ps < Pm
    constraint_count: int
    mean_capacity: float
    mean_capacity_se: float
    pt_cdf: DistributionCurve
    max_power_rate: float  # fraction of draws transmitting at Pm
    n_samples: int
    capacity_samples: Optional[np.ndarray] = None
    pt_samples: Optional[np.ndarray] = None

    def constraint_sigma(self, alpha: float) -> float:
        """Binomial standard deviation of the satisfaction rate at 1 - alpha."""
        if self.constraint_count == 0:
            return math.nan
        return math.sqrt(alpha * (1.0 - alpha) / self.constraint_count)


def stream_generator(seed: int, stream: int, purpose: int = 0) -> np.random.Generator:
    keys = (stream,) if purpose == 0 else (stream, purpose)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=keys)))


def stream_sizes(n: int, stream_count: int) -> list[int]:
    base, extra = divmod(n, stream_count)
    return [base + (1 if k < extra else 0) for k in range(stream_count)]


def _complex_gaussian(rng, n, power):
    """CN(0, power): independent real/imaginary parts of variance power/2."""
    z = rng.standard_normal((2, n))
    return math.sqrt(0.5 * power) * (z[0] + 1j * z[1])


def draw_channels(params: SystemParams, scenario, rng: np.random.Generator,
                  n: int) -> ChannelDraw:
    """Rayleigh power gains; Scenario 5 adds correlated estimates.

    For Scenario 5 the estimate h_hat ~ CN(0, Omega) is drawn first and the
    true coefficient is h = rho h_hat + e with e ~ CN(0, Omega (1 - rho^2)),
    so h | h_hat has exactly the conditional law the policy assumes.
    """
    scenario = ScenarioId.parse(scenario)
    if scenario is ScenarioId.S5:
        rho = params.rho
        h_p_hat = _complex_gaussian(rng, n, params.Omega_p)
        h_p = rho * h_p_hat + _complex_gaussian(rng, n, params.Omega_p * (1 - rho * rho))
        h_sp_hat = _complex_gaussian(rng, n, params.Omega_sp)
        h_sp = rho * h_sp_hat + _complex_gaussian(rng, n, params.Omega_sp * (1 - rho * rho))
        g_s = rng.exponential(params.Omega_s, n)
        g_ps = rng.exponential(params.Omega_ps, n)
        return ChannelDraw(
            g_p=np.abs(h_p) ** 2, g_s=g_s, g_ps=g_ps, g_sp=np.abs(h_sp) ** 2,
            g_p_hat=np.abs(h_p_hat) ** 2, g_sp_hat=np.abs(h_sp_hat) ** 2,
        )
    return ChannelDraw(
        g_p=rng.exponential(params.Omega_p, n),
        g_s=rng.exponential(params.Omega_s, n),
        g_ps=rng.exponential(params.Omega_ps, n),
        g_sp=rng.exponential(params.Omega_sp, n),
    )


def _audit_gains(params, scenario, draw, rng):
    """Gains seen by the PU in the audit: unknown ones re-drawn from their law
    given what the SU knows."""
    n = len(draw)
    g_p, g_sp = draw.g_p, draw.g_sp
    if scenario is ScenarioId.S2:
        g_sp = rng.exponential(params.Omega_sp, n)
    elif scenario is ScenarioId.S3:
        g_p = rng.exponential(params.Omega_p, n)
    elif scenario is ScenarioId.S4:
        g_p = rng.exponential(params.Omega_p, n)
        g_sp = rng.exponential(params.Omega_sp, n)
    elif scenario is ScenarioId.S5:
        # |rho h_hat + e|^2 depends on h_hat only through |h_hat|
        rho = params.rho
        g_p = np.abs(rho * np.sqrt(draw.g_p_hat)
                     + _complex_gaussian(rng, n, params.Omega_p * (1 - rho * rho))) ** 2
        g_sp = np.abs(rho * np.sqrt(draw.g_sp_hat)
                      + _complex_gaussian(rng, n, params.Omega_sp * (1 - rho * rho))) ** 2
    return dataclasses.replace(draw, g_p=g_p, g_sp=g_sp)


def _run_stream(params, scenario, seed, stream, n):
    draw = draw_channels(params, scenario, stream_generator(seed, stream), n)
    pol = power_batch(scenario, params, draw)
    pt = np.asarray(pol.pt, dtype=float)
    cap = capacity(su_sinr(params, draw, pt))
    eligible = (pol.ps_unclamped > 0) & (pol.ps_unclamped < params.Pm)
    audit = _audit_gains(params, scenario, draw, stream_generator(seed, stream, 1))
    gamma_p = pu_sinr(params, audit, np.where(eligible, pol.ps_unclamped, 0.0))
    ok = gamma_p >= params.gamma_T * (1.0 - _SINR_REL_TOL)
    return cap, pt, np.asarray(pol.blocked, dtype=bool), eligible, ok & eligible


def empirical_cdf(samples, grid, scenario=None, kind: str = "cdf_capacity",
                  presorted: bool = False) -> DistributionCurve:
    """Right-continuous empirical CDF of ``samples`` evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    if not presorted:
        x = np.sort(x)
    grid = np.asarray(grid, dtype=float)
    values = np.searchsorted(x, grid, side="right") / x.size
    return DistributionCurve(grid, values, kind, scenario)


def ks_distance(samples, cdf: Callable[[np.ndarray], np.ndarray],
                atom_at_zero: bool = True, presorted: bool = False) -> float:
    """sup_x |F_n(x) - F(x)| for a law continuous on (0, inf).

    ``cdf`` is evaluated at the distinct sample values. With ``atom_at_zero``
    the left limit of F at 0 is taken as 0, so an atom there is compared
    against the tied zero samples rather than smeared.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("ks_distance needs at least one sample")
    if not presorted:
        x = np.sort(x)
    uniq, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts) / x.size
    below = cum - counts / x.size
    f = np.asarray(cdf(uniq), dtype=float)
    f_left = f.copy()
    if atom_at_zero:
        f_left[uniq <= 0] = 0.0
    return float(max(np.max(np.abs(cum - f)), np.max(np.abs(below - f_left))))


def run(params: SystemParams, cfg: McConfig, capacity_grid=DEFAULT_CAPACITY_GRID,
        pt_grid=None, keep_samples: bool = False) -> McSummary:
    """Simulate ``cfg.n_samples`` draws of ``cfg.scenario``."""
    scenario = cfg.scenario
    parts = [
        _run_stream(params, scenario, cfg.seed, k, m)
        for k, m in enumerate(stream_sizes(int(cfg.n_samples), int(cfg.stream_count)))
        if m > 0
    ]
    cap, pt, blocked, eligible, ok = (np.concatenate(col) for col in zip(*parts))
    n = cap.size
    n_eligible = int(eligible.sum())
    rate = float(ok.sum()) / n_eligible if n_eligible else math.nan
    if pt_grid is None:
        pt_grid = np.linspace(0.0, params.Pm, 101)
    cap_sorted = np.sort(cap)
    pt_sorted = np.sort(pt)
    return McSummary(
        empirical_capacity_cdf=empirical_cdf(cap_sorted, capacity_grid, scenario, presorted=True),
        blocking_rate=float(blocked.mean()),
        constraint_satisfaction_rate=rate,
        constraint_count=n_eligible,
        mean_capacity=float(cap.mean()),
        mean_capacity_se=float(cap.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        pt_cdf=empirical_cdf(pt_sorted, pt_grid, scenario, kind="cdf_pt", presorted=True),
        max_power_rate=float(np.mean(pt >= params.Pm)),
        n_samples=n,
        capacity_samples=cap_sorted if keep_samples else None,
        pt_samples=pt_sorted if keep_samples else None,
    )
