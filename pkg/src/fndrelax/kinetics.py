"""Transition-state rates and a generation/loss model for radical concentration.

Energies are in kcal/mol, temperatures in K, concentrations in mol/L (M)
and times in s.

Radicals are generated at a constant background rate ``g0`` (catalyst-free
silica) plus ``alpha * k_cat * c_cat`` from catalyst sites, and lost by a
first-order process ``k_loss``:

    dc/dt = g0 + alpha k_cat c_cat - k_loss c
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from . import constants as const
from .errors import DomainError

PATHWAYS = ("spontaneous", "silica", "gd_silica")
BARRIER_POLICIES = ("relative", "clamped")
# log-ratios above this are reported in log form only (ratio > ~1e100)
LINEAR_LOG_LIMIT = math.log(1e100)


@dataclass(frozen=True)
class EnergyTable:
    """DFT water-dissociation and adsorption energies [kcal/mol]."""

    dec_spontaneous: float = 122.2
    dec_silica: float = -44.10
    dec_gd_silica: float = -56.91
    ads_oh_silica: float = -63.8
    ads_h_silica: float = -72.7
    ads_h2o_silica: float = -22.5
    ads_gd_silica: float = -399.7
    ads_oh_gd_silica: float = -92.8
    ads_h_gd_silica: float = -124.9
    ads_h2o_gd_silica: float = -51.2

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise DomainError(f"energy {f.name} must be finite")

    def dissociation(self, pathway):
        if pathway not in PATHWAYS:
            raise ValueError(f"unknown pathway {pathway!r}; expected one of {PATHWAYS}")
        return getattr(self, "dec_" + pathway)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


class RateRatio(NamedTuple):
    log: float
    value: float | None  # None when the ratio is reported in log form only

    @property
    def overflow(self):
        return self.value is None


def log_rate_ratio(e_a, e_b, temperature_k):
    """ln(k_b / k_a) for two pathways with effective energies ``e_a`` and ``e_b``."""
    if not temperature_k > 0:
        raise DomainError("temperature must be positive")
    return (e_a - e_b) / (const.R_KCAL * temperature_k)


def rate_ratio(e_a, e_b, temperature_k) -> RateRatio:
    log = log_rate_ratio(e_a, e_b, temperature_k)
    if abs(log) > LINEAR_LOG_LIMIT:
        return RateRatio(log, None)
    return RateRatio(log, math.exp(log))


def eyring_prefactor(temperature_k):
    return const.K_B * temperature_k / const.H_PLANCK


def eyring_rate(barrier, temperature_k):
    """Eyring rate [s^-1]; negative barriers are treated as barrierless."""
    if not temperature_k > 0:
        raise DomainError("temperature must be positive")
    return eyring_prefactor(temperature_k) * math.exp(-max(barrier, 0.0) / (const.R_KCAL * temperature_k))


def effective_barrier(energies: EnergyTable, pathway, policy="relative"):
    """Barrier fed to :func:`eyring_rate` for a dissociation pathway.

    ``relative`` measures each pathway from the most favourable one, so
    rate ratios equal exp(difference in dissociation energy / RT).
    ``clamped`` uses the dissociation energy itself.
    """
    e = energies.dissociation(pathway)
    if policy == "relative":
        return e - min(energies.dissociation(p) for p in PATHWAYS)
    if policy == "clamped":
        return e
    raise ValueError(f"unknown barrier policy {policy!r}")


def calibrate_two_point(c1, css1, c2, css2, k_loss, k_cat):
    """Solve (alpha, g0) so that the steady state passes through two points."""
    if c2 == c1:
        raise DomainError("calibration points need distinct catalyst concentrations")
    slope = (css2 - css1) / (c2 - c1) * k_loss
    alpha = slope / k_cat
    g0 = css1 * k_loss - slope * c1
    return alpha, g0


DEFAULT_TEMPERATURE = 300.0
DEFAULT_K_LOSS = 1.0
# 10 aM catalyst -> 100 nM radicals, 100 fM catalyst -> 10 uM radicals
CALIBRATION_POINTS = ((1e-17, 1e-7), (1e-13, 1e-5))
DEFAULT_ALPHA, DEFAULT_G0 = calibrate_two_point(
    *CALIBRATION_POINTS[0], *CALIBRATION_POINTS[1], DEFAULT_K_LOSS,
    eyring_rate(effective_barrier(EnergyTable(), "gd_silica"), DEFAULT_TEMPERATURE),
)


@dataclass(frozen=True)
class KineticsParams:
    temperature_k: float = DEFAULT_TEMPERATURE
    alpha: float = DEFAULT_ALPHA
    g0_m_per_s: float = DEFAULT_G0
    k_loss_per_s: float = DEFAULT_K_LOSS
    c_cat_m: float = 0.0
    energies: EnergyTable = field(default_factory=EnergyTable)
    barrier_policy: str = "relative"

    def __post_init__(self):
        if not self.temperature_k > 0:
            raise DomainError("temperature must be positive")
        if not self.k_loss_per_s > 0:
            raise DomainError("k_loss must be positive")
        if self.alpha < 0 or self.g0_m_per_s < 0 or self.c_cat_m < 0:
            raise DomainError("alpha, g0 and catalyst concentration must be >= 0")
        if self.barrier_policy not in BARRIER_POLICIES:
            raise DomainError(f"unknown barrier policy {self.barrier_policy!r}")

    def with_catalyst(self, c_cat_m):
        return replace(self, c_cat_m=c_cat_m)

    def to_dict(self):
        return {
            "temperature_k": self.temperature_k,
            "alpha": self.alpha,
            "g0_m_per_s": self.g0_m_per_s,
            "k_loss_per_s": self.k_loss_per_s,
            "c_cat_m": self.c_cat_m,
            "barrier_policy": self.barrier_policy,
            "energies": self.energies.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        energies = EnergyTable(**d.pop("energies", {}))
        return cls(energies=energies, **d)


def catalytic_rate(p: KineticsParams):
    return eyring_rate(effective_barrier(p.energies, "gd_silica", p.barrier_policy), p.temperature_k)


def steady_state_concentration(p: KineticsParams):
    return (p.g0_m_per_s + p.alpha * catalytic_rate(p) * p.c_cat_m) / p.k_loss_per_s


def background_concentration(p: KineticsParams):
    return p.g0_m_per_s / p.k_loss_per_s


def transient_concentration(t, p: KineticsParams):
    """Radical concentration a time ``t`` after generation starts from zero."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be >= 0")
    c = steady_state_concentration(p) * -np.expm1(-p.k_loss_per_s * t_arr)
    return float(c) if c.ndim == 0 else c
