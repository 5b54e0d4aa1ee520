"""Double-layered core-shell particle geometry.

Lengths are in nm.  The particle is a diamond core of radius
``core_radius`` wrapped in a dense silica shell and then a porous silica
shell.  Three integration regions are recognised:

``"dense"``     core_radius  <= r < core_radius + dense_shell
``"porous"``    core_radius + dense_shell <= r < outer_radius
``"exterior"``  outer_radius <= r (free solution)

The quantity that couples geometry to relaxation is the inverse sixth
moment of the distance from the NV centre, integrated over a region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import GeometryError, InvalidDistribution
from .rng import make_rng

REGIONS = ("dense", "porous", "exterior")
FOUR_PI_3 = 4.0 * math.pi / 3.0


@dataclass(frozen=True)
class ParticleGeometry:
    core_radius: float
    dense_shell: float
    porous_shell: float

    def __post_init__(self):
        if not (self.core_radius > 0 and math.isfinite(self.core_radius)):
            raise InvalidDistribution(f"core_radius must be positive, got {self.core_radius}")
        for name in ("dense_shell", "porous_shell"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidDistribution(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def from_total_diameter(cls, total_diameter, core_diameter, dense_shell):
        """Build a particle from its overall diameter; the porous shell takes up the rest."""
        porous = 0.5 * (total_diameter - core_diameter) - dense_shell
        if porous < 0:
            raise InvalidDistribution(
                f"total diameter {total_diameter} nm too small for core {core_diameter} nm "
                f"and dense shell {dense_shell} nm"
            )
        return cls(0.5 * core_diameter, dense_shell, porous)

    @property
    def dense_outer_radius(self):
        return self.core_radius + self.dense_shell

    @property
    def outer_radius(self):
        return self.core_radius + self.dense_shell + self.porous_shell

    @property
    def diameter(self):
        return 2.0 * self.outer_radius

    def region_bounds(self, region):
        """Inner and outer radius of ``region`` (outer is ``inf`` for the exterior)."""
        if region == "dense":
            return self.core_radius, self.dense_outer_radius
        if region == "porous":
            return self.dense_outer_radius, self.outer_radius
        if region == "exterior":
            return self.outer_radius, math.inf
        raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")


@dataclass(frozen=True)
class NvPosition:
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float).reshape(3))

    @property
    def distance(self):
        return float(np.linalg.norm(self.offset))


CENTER = NvPosition()


@dataclass(frozen=True)
class Dist:
    """Gaussian truncated to ``[lower, upper]``; ``sd == 0`` means a fixed value."""

    mean: float
    sd: float = 0.0
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if not self.sd >= 0:
            raise InvalidDistribution(f"standard deviation must be >= 0, got {self.sd}")
        if not self.lower <= self.mean <= self.upper:
            raise InvalidDistribution(
                f"mean {self.mean} outside truncation bounds [{self.lower}, {self.upper}]"
            )

    @classmethod
    def fixed(cls, value):
        if value > 0:
            return cls(value, 0.0, 0.5 * value, 1.5 * value)
        return cls(value, 0.0, value, value)

    def sample(self, rng, size=None):
        rng = make_rng(rng)
        if self.sd == 0:
            return self.mean if size is None else np.full(size, float(self.mean))
        n = 1 if size is None else int(size)
        out = np.empty(n)
        filled = 0
        for _ in range(10_000):
            draw = rng.normal(self.mean, self.sd, size=max(2 * (n - filled), 16))
            draw = draw[(draw >= self.lower) & (draw <= self.upper)]
            take = min(draw.size, n - filled)
            out[filled:filled + take] = draw[:take]
            filled += take
            if filled == n:
                return float(out[0]) if size is None else out
        raise InvalidDistribution("truncation window has negligible probability mass")

    def to_dict(self):
        return {"mean": self.mean, "sd": self.sd, "min": self.lower, "max": self.upper}

    @classmethod
    def from_dict(cls, d):
        upper = d.get("max")
        return cls(float(d["mean"]), float(d.get("sd", 0.0)), float(d.get("min", 0.0)),
                   math.inf if upper is None else float(upper))


@dataclass(frozen=True)
class SizeDistributions:
    core_diameter: Dist
    dense_shell: Dist
    porous_shell: Dist

    def __post_init__(self):
        core = self.core_diameter
        if not core.lower > 0:
            raise InvalidDistribution("core diameter truncation lower bound must be > 0")
        if core.sd > 0 and not core.mean > core.lower:
            raise InvalidDistribution("core diameter mean must exceed its lower truncation bound")
        for d in (self.dense_shell, self.porous_shell):
            if d.lower < 0:
                raise InvalidDistribution("shell thickness truncation must be >= 0")

    @classmethod
    def fixed(cls, core_diameter, dense_shell, porous_shell):
        return cls(Dist.fixed(core_diameter), Dist.fixed(dense_shell), Dist.fixed(porous_shell))

    @classmethod
    def from_total_diameter(cls, total_mean, total_sd, core_diameter: Dist, dense_shell: Dist):
        """Solve the porous-shell Gaussian that yields a given total-diameter Gaussian.

        Uses D = d_core + 2 t_dense + 2 t_porous with independent layers.  The
        porous shell is truncated symmetrically about its mean (at 0 and
        2 x mean) so truncation does not bias the mean.
        """
        mean = 0.5 * (total_mean - core_diameter.mean) - dense_shell.mean
        var = (total_sd ** 2 - core_diameter.sd ** 2 - 4.0 * dense_shell.sd ** 2) / 4.0
        if mean <= 0 or var < 0:
            raise InvalidDistribution("total diameter distribution is narrower than its layers")
        return cls(core_diameter, dense_shell, Dist(mean, math.sqrt(var), 0.0, 2.0 * mean))

    def to_dict(self):
        return {
            "core_diameter_nm": self.core_diameter.to_dict(),
            "dense_shell_nm": self.dense_shell.to_dict(),
            "porous_shell_nm": self.porous_shell.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(Dist.from_dict(d["core_diameter_nm"]), Dist.from_dict(d["dense_shell_nm"]),
                   Dist.from_dict(d["porous_shell_nm"]))


def sample_particle(dists: SizeDistributions, seed) -> ParticleGeometry:
    rng = make_rng(seed)
    core_d = dists.core_diameter.sample(rng)
    dense = dists.dense_shell.sample(rng)
    porous = dists.porous_shell.sample(rng)
    return ParticleGeometry(0.5 * core_d, dense, porous)


def sample_nv_position(geom: ParticleGeometry, seed) -> NvPosition:
    """Draw an NV offset uniformly over the core ball."""
    rng = make_rng(seed)
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    r = geom.core_radius * rng.random() ** (1.0 / 3.0)
    return NvPosition(r * v)


def sample_nv_offsets(core_radius, n, seed):
    """Vectorised variant of :func:`sample_nv_position`; returns an (n, 3) array."""
    rng = make_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = core_radius * rng.random(n) ** (1.0 / 3.0)
    return v * r[:, None]


def _j(radius, a):
    if math.isinf(radius):
        return 0.0
    return FOUR_PI_3 * radius ** 3 / (radius * radius - a * a) ** 3


def m6_between(r_inner, r_outer, a):
    """Inverse sixth moment of the shell ``r_inner <= |r| < r_outer`` seen from ``|offset| = a``.

    Closed form  J(r_inner) - J(r_outer)  with  J(R) = (4 pi / 3) R^3 / (R^2 - a^2)^3,
    obtained by integrating the sphere average of |r - a|^-6 radially.  It is
    checked against :func:`m6_quadrature` in the test suite.
    """
    a = abs(float(a))
    if a >= r_inner:
        raise GeometryError(f"NV distance {a} nm is not inside inner radius {r_inner} nm")
    if r_outer <= r_inner:
        return 0.0
    return _j(r_inner, a) - _j(r_outer, a)


def m6_quadrature(r_inner, r_outer, a, rtol=1e-10):
    """Adaptive-quadrature evaluation of the same shell integral (oracle and fallback)."""
    a = abs(float(a))
    if a >= r_inner:
        raise GeometryError(f"NV distance {a} nm is not inside inner radius {r_inner} nm")
    if r_outer <= r_inner:
        return 0.0

    def sphere(r):
        f = lambda u: 2.0 * math.pi * r * r / (r * r + a * a - 2.0 * r * a * u) ** 3
        return integrate.quad(f, -1.0, 1.0, epsabs=0.0, epsrel=rtol)[0]

    return integrate.quad(sphere, r_inner, r_outer, epsabs=0.0, epsrel=rtol, limit=200)[0]


def m6_monte_carlo(r_inner, r_outer, offset, n, seed, batch=1_000_000):
    """Monte Carlo volume integral over a finite shell.

    Points are uniform in the shell volume (r^3 uniform, isotropic
    direction).  Returns ``(estimate, standard_error)``.
    """
    if not math.isfinite(r_outer):
        raise ValueError("Monte Carlo integration needs a finite outer radius")
    rng = make_rng(seed)
    offset = np.asarray(offset, dtype=float)
    if offset.ndim == 0:
        offset = np.array([0.0, 0.0, float(offset)])
    volume = FOUR_PI_3 * (r_outer ** 3 - r_inner ** 3)
    lo3, hi3 = r_inner ** 3, r_outer ** 3
    s = s2 = 0.0
    done = 0
    while done < n:
        m = min(batch, n - done)
        u = rng.normal(size=(m, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = np.cbrt(lo3 + (hi3 - lo3) * rng.random(m))
        d2 = np.sum((u * r[:, None] - offset) ** 2, axis=1)
        f = volume / d2 ** 3
        s += f.sum()
        s2 += np.dot(f, f)
        done += m
    mean = s / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / (n - 1))


def shell_moment_m6(geom: ParticleGeometry, nv, region, method="closed"):
    """Integral of |r - a|^-6 over ``region`` of ``geom`` for NV offset ``a`` [nm^-3].

    ``nv`` is an :class:`NvPosition` or a distance from the centre.
    ``method="quadrature"`` bypasses the closed form.
    """
    a = nv.distance if isinstance(nv, NvPosition) else abs(float(nv))
    r_inner, r_outer = geom.region_bounds(region)
    if method == "closed":
        return m6_between(r_inner, r_outer, a)
    if method == "quadrature":
        return m6_quadrature(r_inner, r_outer, a)
    raise ValueError(f"unknown method {method!r}")
