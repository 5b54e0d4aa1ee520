"""Monte Carlo engine tying geometry, noise model, kinetics and fitting together.

Stochastic work is split into tasks with a stable integer index.  Each task
draws from its own Philox substream derived from the master seed and that
index, so results do not depend on how many worker threads are used.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kinetics as kin
from .geometry import (CENTER, Dist, NvPosition, ParticleGeometry, SizeDistributions,
                       sample_nv_position, sample_particle)
from .relaxfit import delta_gamma, fit_decay, synthesize_trace
from .rng import STREAM_PARTICLE, STREAM_SWEEP, make_rng, substream_seed
from .spinbath import (DEFAULT_SPECIES, EMPTY_BATH, BathEntry, BathSpec, NvParams,
                       induced_rate_continuum)

MODES = ("analytic", "measurement")


def default_sizes():
    core = Dist(40.0, 8.0, 10.0, 70.0)
    dense = Dist(9.4, 2.1, 0.0, 18.8)
    return SizeDistributions.from_total_diameter(127.3, 20.8, core, dense)


@dataclass(frozen=True)
class ForwardModel:
    """Everything needed to turn a catalyst concentration into a relaxation rate."""

    sizes: SizeDistributions = field(default_factory=default_sizes)
    nv: NvParams = field(default_factory=NvParams)
    intrinsic_t1_us: Dist = field(default_factory=lambda: Dist(238.5, 80.0, 20.0, 457.0))
    species: dict = field(default_factory=lambda: dict(DEFAULT_SPECIES))
    kinetics: kin.KineticsParams = field(default_factory=kin.KineticsParams)
    gd_species: str = "gd3+"
    gd_regions: tuple = ("porous", "exterior")
    radical_species: tuple = ("oh_radical", "h_radical")
    radical_region: str = "porous"

    def catalyst_bath(self, c_cat_m):
        sp = self.species[self.gd_species]
        return BathSpec(tuple(BathEntry.molar(sp, region, c_cat_m) for region in self.gd_regions))

    def radical_bath(self, c_rad_m):
        """Each radical species present at ``c_rad_m`` in the radical region."""
        return BathSpec(tuple(BathEntry.molar(self.species[name], self.radical_region, c_rad_m)
                              for name in self.radical_species))

    def steady_state(self, c_cat_m):
        return kin.steady_state_concentration(self.kinetics.with_catalyst(c_cat_m))

    def bath_for_catalyst(self, c_cat_m):
        return self.catalyst_bath(c_cat_m) + self.radical_bath(self.steady_state(c_cat_m))

    def nominal_geometry(self):
        s = self.sizes
        return ParticleGeometry(0.5 * s.core_diameter.mean, s.dense_shell.mean, s.porous_shell.mean)

    def unit_rates(self, geom, nv):
        """Bath rates [s^-1] per mol/L of catalyst and per mol/L of radicals."""
        gd = induced_rate_continuum(geom, nv, self.nv, self.catalyst_bath(1.0))
        rad = induced_rate_continuum(geom, nv, self.nv, self.radical_bath(1.0))
        return gd, rad


def particle_t1(geom, nv, nvp: NvParams, bath: BathSpec):
    """T1 in microseconds of one NV centre in one particle."""
    return 1e6 / (nvp.gamma0_per_s + induced_rate_continuum(geom, nv, nvp, bath))


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- populations

@dataclass(frozen=True)
class PopulationSpec:
    n_particles: int
    seed: int
    model: ForwardModel = field(default_factory=ForwardModel)
    bath_before: BathSpec = EMPTY_BATH
    bath_after: BathSpec = EMPTY_BATH
    mode: str = "analytic"
    photons_per_point: float = 1e4
    n_tau: int = 50
    tau_span_t1: float = 5.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        t1 = self.model.intrinsic_t1_us
        if not (t1.mean > 0 and t1.lower > 0):
            raise ValueError("intrinsic T1 mean and lower truncation bound must be positive")

    @classmethod
    def for_catalyst(cls, n_particles, seed, model=None, c_cat_m=1e-16, **kw):
        """Population switched from pure water to a catalyst solution."""
        model = model or ForwardModel()
        return cls(n_particles, seed, model, EMPTY_BATH, model.bath_for_catalyst(c_cat_m), **kw)


@dataclass
class ParticleRecord:
    particle_id: int
    sub_seed: int
    geometry: ParticleGeometry
    nv: NvPosition
    t1_intrinsic_us: float
    t1_before_us: float
    t1_after_us: float
    dgamma_per_s: float
    dgamma_sigma_per_s: float = 0.0
    fits: tuple = ()


def simulate_particle(spec: PopulationSpec, index, sub_seed=None) -> ParticleRecord:
    """One particle of a population; reproducible from ``sub_seed`` alone."""
    if sub_seed is None:
        sub_seed = substream_seed(spec.seed, STREAM_PARTICLE, index)
    rng = make_rng(sub_seed)
    model = spec.model
    geom = sample_particle(model.sizes, rng)
    nv = sample_nv_position(geom, rng)
    t1_int = model.intrinsic_t1_us.sample(rng)
    nvp = replace(model.nv, gamma0_per_s=1e6 / t1_int)
    g_before = induced_rate_continuum(geom, nv, nvp, spec.bath_before)
    g_after = induced_rate_continuum(geom, nv, nvp, spec.bath_after)
    t1_before = 1e6 / (nvp.gamma0_per_s + g_before)
    t1_after = 1e6 / (nvp.gamma0_per_s + g_after)
    rec = ParticleRecord(index, sub_seed, geom, nv, t1_int, t1_before, t1_after, g_after - g_before)
    if spec.mode == "measurement":
        tau = np.linspace(0.0, spec.tau_span_t1 * t1_before, spec.n_tau)
        fits = []
        for t1 in (t1_before, t1_after):
            trace = synthesize_trace(1.0, 0.1, t1, tau, spec.photons_per_point, rng)
            fits.append(fit_decay(trace))
        dg = delta_gamma(*fits)
        rec.dgamma_per_s, rec.dgamma_sigma_per_s, rec.fits = dg.value, dg.uncertainty, tuple(fits)
        rec.t1_before_us, rec.t1_after_us = fits[0].t1_us, fits[1].t1_us
    return rec


def simulate_population(spec: PopulationSpec, threads=1):
    return _map(lambda i: simulate_particle(spec, i), range(spec.n_particles), threads)


def histogram(values, bins=20):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return counts, edges


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepSpec:
    grid_m: tuple
    n_mc: int
    seed: int
    model: ForwardModel = field(default_factory=ForwardModel)

    def __post_init__(self):
        grid = np.asarray(self.grid_m, dtype=float)
        object.__setattr__(self, "grid_m", tuple(float(c) for c in grid))
        if grid.ndim != 1 or grid.size < 1:
            raise ValueError("grid must be a non-empty 1-D sequence")
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("concentration grid must be non-negative and strictly increasing")
        if self.n_mc < 2:
            raise ValueError("n_mc must be >= 2")


def draw_sample(model: ForwardModel, seed, index):
    """The ``index``-th (geometry, NV position) pair of a sweep ensemble."""
    rng = make_rng(substream_seed(seed, STREAM_SWEEP, index))
    geom = sample_particle(model.sizes, rng)
    return geom, sample_nv_position(geom, rng)


def ensemble_unit_rates(model, n_mc, seed, threads=1):
    """Per-sample catalyst and radical unit rates, shape (n_mc, 2)."""
    rates = _map(lambda j: model.unit_rates(*draw_sample(model, seed, j)), range(n_mc), threads)
    return np.array(rates, dtype=float).reshape(n_mc, 2)


def sweep_concentration(spec: SweepSpec, axis="catalyst", threads=1):
    """Mean and spread of the steady-state rate change over NV positions.

    Every grid point uses the same ensemble of sampled (geometry, NV)
    pairs, so differences between grid points carry no sampling noise.
    ``axis="radical"`` treats the grid as radical concentrations with no
    catalyst present.
    """
    units = ensemble_unit_rates(spec.model, spec.n_mc, spec.seed, threads)
    rows = []
    for c in spec.grid_m:
        if axis == "catalyst":
            c_rad = spec.model.steady_state(c)
            dg = units[:, 0] * c + units[:, 1] * c_rad
        elif axis == "radical":
            c_rad = c
            dg = units[:, 1] * c
        else:
            raise ValueError(f"unknown axis {axis!r}")
        rows.append({
            "c_m": c,
            "c_radical_m": c_rad,
            "dgamma_mean_per_s": float(np.mean(dg)),
            "dgamma_sd_per_s": float(np.std(dg, ddof=1)),
        })
    return rows


# ---------------------------------------------------------------- time profiles

def time_profile(model: ForwardModel, c_cat_m, t_grid_s, samples=None, baseline="immersed"):
    """Rate change versus time after radical generation starts.

    ``samples`` is a list of (geometry, NV) pairs to average over; the
    default is the nominal particle with a centred NV.  With
    ``baseline="immersed"`` the reference is the particle already sitting
    in the catalyst solution, so only radicals contribute and the profile
    starts at zero.  ``baseline="milliq"`` references pure water and adds
    the catalyst ions' own contribution.
    """
    t = np.asarray(t_grid_s, dtype=float)
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be non-negative and strictly increasing")
    if baseline not in ("immersed", "milliq"):
        raise ValueError("baseline must be 'immersed' or 'milliq'")
    if samples is None:
        samples = [(model.nominal_geometry(), CENTER)]
    units = np.array([model.unit_rates(g, nv) for g, nv in samples], dtype=float)
    c_rad = kin.transient_concentration(t, model.kinetics.with_catalyst(c_cat_m))
    c_rad = np.atleast_1d(c_rad)
    dg = np.outer(c_rad, units[:, 1])
    if baseline == "milliq":
        dg = dg + c_cat_m * units[:, 0]
    return [{"t_s": float(ti), "c_radical_m": float(ci), "dgamma_per_s": float(np.mean(row))}
            for ti, ci, row in zip(t, c_rad, dg)]


def shell_scenarios(model: ForwardModel, c_gd_m=1e-6, n_mc=200, seed=0, min_dense_nm=9.4):
    """Steady-state rate change for a dense-shell-only particle and the double-shell particle.

    The dense-shell-only particle (no porous shell, no radical generation)
    sees the Gd ions only through the exterior solution, behind a dense
    shell of at least ``min_dense_nm``.  The double-shell
    particle holds the same Gd solution in its pores and generates radicals.
    Both are averaged over the same NV positions.  Returns a dict of means.
    """
    s = model.sizes
    silica = replace(model, gd_regions=("exterior",))
    out = {"silica_fnd": [], "ms_silica_fnd": []}
    for j in range(n_mc):
        rng = make_rng(substream_seed(seed, STREAM_SWEEP, j))
        ms_geom = sample_particle(s, rng)
        nv = sample_nv_position(ms_geom, rng)
        si_geom = ParticleGeometry(ms_geom.core_radius, max(ms_geom.dense_shell, min_dense_nm), 0.0)
        out["silica_fnd"].append(induced_rate_continuum(si_geom, nv, model.nv, silica.catalyst_bath(c_gd_m)))
        out["ms_silica_fnd"].append(induced_rate_continuum(ms_geom, nv, model.nv, model.bath_for_catalyst(c_gd_m)))
    return {k: float(np.mean(v)) for k, v in out.items()}
