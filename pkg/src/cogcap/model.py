"""System parameters plus the per-draw link quantities.

All quantities are linear scale. Helper ``db_to_linear`` converts once at
construction time.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


class ParamsValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid system parameters: " + "; ".join(self.violations))


class ScenarioId(str, enum.Enum):
    """Channel knowledge available at the SU transmitter.

    S1: g_p and g_sp exact. S2: g_p exact, mean of g_sp. S3: mean of g_p,
    g_sp exact. S4: both means. S5: correlated estimates of both.
    """

    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    S5 = "S5"

    @classmethod
    def parse(cls, value) -> "ScenarioId":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        if not text.startswith("S"):
            text = "S" + text
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown scenario {value!r}") from None


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Static constants of the PU/SU link pair.

    Pp, Pm: PU power and SU power cap. sigma2_p, sigma2_s: noise at PU-Rx and
    SU-Rx. Omega_*: mean gains of PU->PU (p), SU->SU (s), PU->SU (ps) and
    SU->PU (sp). gamma_T: PU SINR threshold. alpha: tolerated violation
    probability. rho: estimate correlation (Scenario 5 only).
    """

    Pp: float
    Pm: float
    sigma2_p: float
    sigma2_s: float
    Omega_p: float
    Omega_s: float
    Omega_ps: float
    Omega_sp: float
    gamma_T: float
    alpha: float = 0.1
    rho: float = 0.9

    def __post_init__(self):
        violations = []
        for name in ("Pp", "Pm", "sigma2_p", "sigma2_s", "Omega_p", "Omega_s",
                     "Omega_ps", "Omega_sp", "gamma_T"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                violations.append(f"{name} must be a finite value > 0 (got {value!r})")
        if not 0.0 < self.alpha < 1.0:
            violations.append(f"alpha must lie in (0, 1) (got {self.alpha!r})")
        if not 0.0 <= self.rho < 1.0:
            violations.append(f"rho must lie in [0, 1) (got {self.rho!r})")
        if violations:
            raise ParamsValidationError(violations)

    @property
    def c1(self) -> float:
        """Interference-to-desired mean gain ratio Omega_sp / Omega_s."""
        return self.Omega_sp / self.Omega_s

    @property
    def c2(self) -> float:
        """Target SINR over mean PU SNR, gamma_T sigma2_p / (Pp Omega_p)."""
        return self.gamma_T * self.sigma2_p / (self.Pp * self.Omega_p)

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class DerivedRatios(NamedTuple):
    c1: float
    c2: float


def derived_ratios(params: SystemParams) -> DerivedRatios:
    return DerivedRatios(params.c1, params.c2)


REFERENCE_SNR_DB = 5.0  # Omega_p / sigma2_p = Omega_s / sigma2_s


def make_params_from_ratios(c1: float, c2: float, **overrides) -> SystemParams:
    """Build parameters from (c1, c2) using the reference operating point.

    Unit noise and unit powers, Omega_p = Omega_s = 5 dB, alpha = 0.1,
    rho = 0.9 and Omega_ps = Omega_sp. ``overrides`` replace fields after the
    defaults are laid down; the result is validated as a whole.
    """
    violations = []
    if not c1 > 0:
        violations.append(f"c1 must be > 0 (got {c1!r})")
    if not c2 > 0:
        violations.append(f"c2 must be > 0 (got {c2!r})")
    if violations:
        raise ParamsValidationError(violations)
    omega = db_to_linear(REFERENCE_SNR_DB)
    fields = dict(
        Pp=1.0,
        Pm=1.0,
        sigma2_p=1.0,
        sigma2_s=1.0,
        Omega_p=omega,
        Omega_s=omega,
        Omega_sp=c1 * omega,
        Omega_ps=c1 * omega,
        gamma_T=c2 * 1.0 * omega / 1.0,
        alpha=0.1,
        rho=0.9,
    )
    unknown = set(overrides) - set(fields)
    if unknown:
        raise ParamsValidationError([f"unknown parameter {k!r}" for k in sorted(unknown)])
    fields.update(overrides)
    return SystemParams(**fields)


@dataclass
class ChannelDraw:
    """Instantaneous power gains (scalars or equal-length arrays).

    ``g_p_hat`` and ``g_sp_hat`` are the estimates seen by the SU in
    Scenario 5 and are None otherwise.
    """

    g_p: np.ndarray
    g_s: np.ndarray
    g_ps: np.ndarray
    g_sp: np.ndarray
    g_p_hat: Optional[np.ndarray] = None
    g_sp_hat: Optional[np.ndarray] = None

    def __len__(self):
        return np.size(self.g_p)


def su_sinr(params: SystemParams, draw: ChannelDraw, pt):
    """gamma_I = Pt g_s / (Pp g_ps + sigma2_s)."""
    return pt * draw.g_s / (params.Pp * draw.g_ps + params.sigma2_s)


def capacity(gamma_i):
    """Shannon capacity log2(1 + gamma_I) in bits/s/Hz."""
    return np.log2(1.0 + np.asarray(gamma_i, dtype=float))


def pu_sinr(params: SystemParams, draw: ChannelDraw, ps):
    """gamma_p = Pp g_p / (Ps g_sp + sigma2_p)."""
    return params.Pp * draw.g_p / (ps * draw.g_sp + params.sigma2_p)
