"""Calibration curves and inversion of rate changes into concentrations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, NonMonotoneCalibration, OutOfRange
from .geometry import CENTER
from .relaxfit import DeltaGamma
from .simulate import ForwardModel, SweepSpec, sweep_concentration
from .spinbath import induced_rate_continuum

AXES = ("catalyst_concentration", "radical_concentration")
INTERPOLATION = "pchip"


@dataclass
class CalibrationCurve:
    """Monotone piecewise-cubic map from concentration [M] to rate change [s^-1]."""

    axis: str
    c_m: np.ndarray
    dgamma_mean: np.ndarray
    dgamma_sd: np.ndarray
    manifest: dict | None = None
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        self.c_m = np.asarray(self.c_m, dtype=float)
        self.dgamma_mean = np.asarray(self.dgamma_mean, dtype=float)
        self.dgamma_sd = np.asarray(self.dgamma_sd, dtype=float)
        if not (self.c_m.shape == self.dgamma_mean.shape == self.dgamma_sd.shape) or self.c_m.size < 2:
            raise ValueError("knot arrays must share one length >= 2")
        if np.any(np.diff(self.c_m) <= 0):
            raise ValueError("knot concentrations must be strictly increasing")
        if np.any(np.diff(self.dgamma_mean) <= 0):
            raise NonMonotoneCalibration("mean rate change is not strictly increasing across knots")
        self._interp = PchipInterpolator(self.c_m, self.dgamma_mean, extrapolate=False)
        self._slope = self._interp.derivative()

    def __call__(self, c):
        return self._interp(c)

    def slope(self, c):
        return float(self._slope(c))

    def sd(self, c):
        return float(np.interp(c, self.c_m, self.dgamma_sd))

    @property
    def background(self):
        """Rate change at zero concentration, if the curve has a c = 0 knot."""
        return float(self.dgamma_mean[0]) if self.c_m[0] == 0 else 0.0

    @property
    def range(self):
        return float(self.dgamma_mean[0]), float(self.dgamma_mean[-1])

    def to_dict(self):
        return {
            "axis": self.axis,
            "interpolation": INTERPOLATION,
            "knots": [
                {"c_m": float(c), "dgamma_mean_per_s": float(m), "dgamma_sd_per_s": float(s)}
                for c, m, s in zip(self.c_m, self.dgamma_mean, self.dgamma_sd)
            ],
            "manifest": self.manifest,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("interpolation", INTERPOLATION) != INTERPOLATION:
            raise ValueError(f"unsupported interpolation {d['interpolation']!r}")
        knots = d["knots"]
        return cls(
            d["axis"],
            [k["c_m"] for k in knots],
            [k["dgamma_mean_per_s"] for k in knots],
            [k["dgamma_sd_per_s"] for k in knots],
            d.get("manifest"),
        )


@dataclass(frozen=True)
class InversionResult:
    estimate_m: float
    lower_m: float
    upper_m: float
    note: str = "pchip root"

    @property
    def extrapolated(self):
        return "extrapolated" in self.note

    def to_dict(self):
        return {"estimate_m": self.estimate_m, "lower_m": self.lower_m,
                "upper_m": self.upper_m, "note": self.note}


def build_calibration(model: ForwardModel, grid_m, n_mc, seed, axis="catalyst_concentration",
                      threads=1, manifest=None) -> CalibrationCurve:
    grid = np.asarray(grid_m, dtype=float)
    if grid.size < 3:
        raise ValueError("calibration grid needs at least 3 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("calibration grid must be strictly increasing")
    sweep_axis = "catalyst" if axis == "catalyst_concentration" else "radical"
    rows = sweep_concentration(SweepSpec(tuple(grid), n_mc, seed, model), sweep_axis, threads)
    return CalibrationCurve(
        axis,
        [r["c_m"] for r in rows],
        [r["dgamma_mean_per_s"] for r in rows],
        [r["dgamma_sd_per_s"] for r in rows],
        manifest,
    )


def invert_concentration(dg: DeltaGamma, curve: CalibrationCurve, extrapolate=False,
                         subtract_background=False, background=None,
                         include_knot_sd=True) -> InversionResult:
    """Concentration whose calibrated rate change equals ``dg.value``.

    With ``subtract_background`` the measurement is taken to be net of the
    zero-concentration response (``background``, by default the c = 0
    knot).  The interval is +/- one combined standard deviation (measurement
    and knot spread) mapped through the local inverse slope.
    """
    target = dg.value
    if subtract_background:
        target += curve.background if background is None else background
    lo, hi = curve.range
    c0, c1 = float(curve.c_m[0]), float(curve.c_m[-1])
    tol = 1e-12 * max(abs(lo), abs(hi))
    note = "pchip root"
    if lo - tol <= target <= hi + tol:
        target = min(max(target, lo), hi)
        if target == lo:
            c = c0
        elif target == hi:
            c = c1
        else:
            c = brentq(lambda x: float(curve(x)) - target, c0, c1,
                       xtol=1e-15 * c1, rtol=1e-13, maxiter=500)
        slope = curve.slope(c)
    elif extrapolate:
        at_low = target < lo
        c_edge, m_edge = (c0, lo) if at_low else (c1, hi)
        slope = curve.slope(c_edge)
        c = max(c_edge + (target - m_edge) / slope, 0.0)
        note = "linear edge extrapolation (extrapolated, outside calibrated range)"
    else:
        raise OutOfRange(f"rate change {dg.value:.6g} s^-1 outside calibrated range [{lo:.6g}, {hi:.6g}]")
    if not slope > 0:
        raise DomainError("calibration slope is not positive at the solution")
    spread = math.hypot(dg.uncertainty, curve.sd(c) if include_knot_sd else 0.0)
    half = spread / slope
    return InversionResult(c, max(c - half, 0.0), c + half, note)


def decompose_contributions(c_cat_m, model: ForwardModel, geom=None, nv=CENTER):
    """Bath rate split into the catalyst-ion part and the radical part [s^-1]."""
    geom = model.nominal_geometry() if geom is None else geom
    gd = induced_rate_continuum(geom, nv, model.nv, model.catalyst_bath(c_cat_m))
    rad = induced_rate_continuum(geom, nv, model.nv, model.radical_bath(model.steady_state(c_cat_m)))
    total = induced_rate_continuum(geom, nv, model.nv, model.bath_for_catalyst(c_cat_m))
    return {"gd_per_s": gd, "radical_per_s": rad, "total_per_s": total}
