"""Dipolar spin-noise model for bath-induced NV relaxation.

Each paramagnetic bath spin produces a fluctuating transverse field with
variance

    <B_perp^2> = (2/3) (mu0/4pi)^2 (hbar gamma_s)^2 S(S+1) / r^6

and a Lorentzian spectrum of correlation time tau_c.  The induced NV rate
sampled at the zero-field transition omega0 is

    Gamma = 3 gamma_NV^2 <B_perp^2> tau_c / (1 + omega0^2 tau_c^2).

For a uniform bath of number density n filling a region, the sum over
spins becomes n times the region's inverse-sixth moment (see
:mod:`fndrelax.geometry`).  Distances are in nm, concentrations in m^-3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import constants as const
from .errors import DomainError
from .geometry import REGIONS, ParticleGeometry, shell_moment_m6

M3_PER_NM3 = const.NM ** -3


@dataclass(frozen=True)
class SpinSpecies:
    name: str
    spin_S: float
    gamma_rad_s_T: float = const.GAMMA_E
    tau_c_s: float = 1e-10

    def __post_init__(self):
        twice = 2.0 * self.spin_S
        if self.spin_S < 0 or abs(twice - round(twice)) > 1e-12:
            raise DomainError(f"spin_S must be a non-negative half-integer, got {self.spin_S}")
        if not self.gamma_rad_s_T > 0:
            raise DomainError("gyromagnetic ratio must be positive")
        if not self.tau_c_s > 0:
            raise DomainError("correlation time must be positive")

    @property
    def s_factor(self):
        return self.spin_S * (self.spin_S + 1.0)

    def to_dict(self):
        return {"name": self.name, "spin_S": self.spin_S,
                "gamma_rad_s_T": self.gamma_rad_s_T, "tau_c_s": self.tau_c_s}

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["name"]), float(d["spin_S"]), float(d.get("gamma_rad_s_T", const.GAMMA_E)),
                   float(d["tau_c_s"]))


# Correlation times are not measured in the source experiment; they are
# configurable placeholders (Gd chelate 1 ns, radicals 0.1 ns).
DEFAULT_SPECIES = {
    "gd3+": SpinSpecies("gd3+", 3.5, const.GAMMA_E, 1e-9),
    "oh_radical": SpinSpecies("oh_radical", 0.5, const.GAMMA_E, 1e-10),
    "h_radical": SpinSpecies("h_radical", 0.5, const.GAMMA_E, 1e-10),
}


@dataclass(frozen=True)
class NvParams:
    omega0_rad_s: float = const.OMEGA0
    gamma_rad_s_T: float = const.GAMMA_E
    gamma0_per_s: float = 1.0e6 / 238.5

    def __post_init__(self):
        if not self.omega0_rad_s > 0:
            raise DomainError("omega0 must be positive")
        if not self.gamma0_per_s >= 0:
            raise DomainError("intrinsic rate must be >= 0")

    @classmethod
    def from_t1_us(cls, t1_us, **kw):
        if not t1_us > 0:
            raise DomainError("intrinsic T1 must be positive")
        return cls(gamma0_per_s=1.0e6 / t1_us, **kw)

    @property
    def t1_us(self):
        return math.inf if self.gamma0_per_s == 0 else 1.0e6 / self.gamma0_per_s


@dataclass(frozen=True)
class BathEntry:
    species: SpinSpecies
    region: str
    concentration: float  # m^-3

    def __post_init__(self):
        if self.region not in REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if not self.concentration >= 0:
            raise DomainError("bath concentration must be >= 0")

    @classmethod
    def molar(cls, species, region, c_molar):
        return cls(species, region, const.molar_to_number_density(c_molar))

    @property
    def concentration_molar(self):
        return const.number_density_to_molar(self.concentration)


@dataclass(frozen=True)
class BathSpec:
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def scaled(self, factor):
        return BathSpec(tuple(replace(e, concentration=e.concentration * factor) for e in self.entries))

    def __add__(self, other):
        return BathSpec(self.entries + other.entries)

    def select(self, names):
        names = set(names)
        return BathSpec(tuple(e for e in self.entries if e.species.name in names))

    @property
    def is_empty(self):
        return all(e.concentration == 0 for e in self.entries)


EMPTY_BATH = BathSpec()


def transverse_field_variance(sp: SpinSpecies, r_nm):
    """Angle-averaged transverse field variance [T^2] from one spin at ``r_nm``."""
    r_nm = np.asarray(r_nm, dtype=float)
    if np.any(~(r_nm > 0)):
        raise DomainError("distance must be positive")
    r = r_nm * const.NM
    amp = const.MU0_OVER_4PI * const.HBAR * sp.gamma_rad_s_T
    var = const.ANGULAR_FACTOR * amp * amp * sp.s_factor / r ** 6
    return float(var) if var.ndim == 0 else var


def lorentzian(tau_c, omega0):
    return tau_c / (1.0 + (omega0 * tau_c) ** 2)


def rate_prefactor(sp: SpinSpecies, nvp: NvParams):
    """r-independent part of :func:`induced_rate_point`, in s^-1 m^6."""
    amp = const.MU0_OVER_4PI * const.HBAR * sp.gamma_rad_s_T
    var_m6 = const.ANGULAR_FACTOR * amp * amp * sp.s_factor
    return 3.0 * nvp.gamma_rad_s_T ** 2 * var_m6 * lorentzian(sp.tau_c_s, nvp.omega0_rad_s)


def induced_rate_point(sp: SpinSpecies, nvp: NvParams, r_nm):
    """Relaxation rate [s^-1] induced by a single bath spin at distance ``r_nm``."""
    var = transverse_field_variance(sp, r_nm)
    return 3.0 * nvp.gamma_rad_s_T ** 2 * var * lorentzian(sp.tau_c_s, nvp.omega0_rad_s)


def entry_rates(geom: ParticleGeometry, nv, nvp: NvParams, bath: BathSpec):
    """Per-entry continuum rates [s^-1], in the order of ``bath.entries``."""
    rates = []
    for e in bath.entries:
        if e.concentration == 0:
            rates.append(0.0)
            continue
        m6 = shell_moment_m6(geom, nv, e.region) * M3_PER_NM3
        rates.append(e.concentration * rate_prefactor(e.species, nvp) * m6)
    return rates


def induced_rate_continuum(geom: ParticleGeometry, nv, nvp: NvParams, bath: BathSpec):
    """Bath-induced rate [s^-1] for uniform concentrations filling each entry's region."""
    return math.fsum(entry_rates(geom, nv, nvp, bath))


def total_rate(geom, nv, nvp: NvParams, bath: BathSpec):
    """1/T1 in s^-1: intrinsic rate plus the bath contribution."""
    return nvp.gamma0_per_s + induced_rate_continuum(geom, nv, nvp, bath)
