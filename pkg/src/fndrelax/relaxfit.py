"""Photoluminescence decay traces and mono-exponential T1 fitting.

The relaxation model is ``I(tau) = I0 * (1 + C * exp(-tau / T1))`` with tau
and T1 in microseconds.  Fitting is weighted least squares solved by a
Levenberg-Marquardt (damped Gauss-Newton) iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FlatTrace, NoConvergence
from .rng import make_rng

MIN_POINTS = 5
GRAD_TOL = 1e-10
MAX_ITER = 200


@dataclass
class DecayTrace:
    tau_us: np.ndarray
    intensity: np.ndarray
    sigma: np.ndarray | None = None
    is_counts: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_us = np.asarray(self.tau_us, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.tau_us.shape or np.any(self.sigma <= 0):
                raise DomainError("sigma must be positive and match tau in length")
        if self.tau_us.ndim != 1 or self.tau_us.shape != self.intensity.shape:
            raise DomainError("tau and intensity must be 1-D arrays of equal length")
        if np.any(self.tau_us < 0) or np.any(np.diff(self.tau_us) <= 0):
            raise DomainError("tau must be non-negative and strictly increasing")
        if self.is_counts and np.any(self.intensity < 0):
            raise DomainError("count data must be non-negative")

    def __len__(self):
        return self.tau_us.size

    def weights_sigma(self):
        """Per-point standard deviations used for weighting."""
        if self.sigma is not None:
            return self.sigma
        if self.is_counts:
            return np.sqrt(np.maximum(self.intensity, 1.0))
        return np.ones_like(self.intensity)

    def scaled(self, factor):
        sigma = None if self.sigma is None else self.sigma * factor
        return DecayTrace(self.tau_us, self.intensity * factor, sigma, False, dict(self.metadata))


@dataclass
class FitResult:
    i0: float
    c: float
    t1_us: float
    cov: np.ndarray
    residual_norm: float = 0.0
    converged: bool = True
    n_iter: int = 0
    grad_norm: float = 0.0

    def __post_init__(self):
        self.cov = np.asarray(self.cov, dtype=float).reshape(3, 3)

    @property
    def params(self):
        return np.array([self.i0, self.c, self.t1_us])

    @property
    def t1_sigma_us(self):
        return math.sqrt(max(self.cov[2, 2], 0.0))

    def to_dict(self):
        return {
            "i0": self.i0,
            "c": self.c,
            "t1_us": self.t1_us,
            "cov": self.cov.tolist(),
            "residual_norm": self.residual_norm,
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["i0"]), float(d["c"]), float(d["t1_us"]), np.array(d["cov"], dtype=float),
                   float(d.get("residual_norm", 0.0)), bool(d.get("converged", True)))


@dataclass(frozen=True)
class DeltaGamma:
    value: float  # s^-1
    uncertainty: float = 0.0

    def __post_init__(self):
        if not self.uncertainty >= 0:
            raise DomainError("uncertainty must be >= 0")

    def to_dict(self):
        return {"dgamma_per_s": self.value, "uncertainty_per_s": self.uncertainty}


def decay_model(tau, i0, c, t1):
    if not t1 > 0:
        raise DomainError(f"T1 must be positive, got {t1}")
    return i0 * (1.0 + c * np.exp(-np.asarray(tau, dtype=float) / t1))


def synthesize_trace(i0, c, t1, tau_grid, photons_per_point, seed) -> DecayTrace:
    """Shot-noise-limited trace whose expectation is ``decay_model``.

    Counts are Poisson with mean ``photons_per_point * model / i0`` and are
    rescaled back to model units; sigma carries the Poisson error.
    """
    if not photons_per_point > 0:
        raise DomainError("photons_per_point must be positive")
    if not i0 > 0:
        raise DomainError("I0 must be positive")
    tau = np.asarray(tau_grid, dtype=float)
    model = decay_model(tau, i0, c, t1)
    if np.any(model < 0):
        raise DomainError("model intensity is negative for these parameters")
    rng = make_rng(seed)
    counts = rng.poisson(photons_per_point * model / i0).astype(float)
    scale = i0 / photons_per_point
    meta = {"photons_per_point": photons_per_point, "source": "synthetic",
            "i0": i0, "c": c, "t1_us": t1}
    if isinstance(seed, (int, np.integer)):
        meta["seed"] = int(seed)
    return DecayTrace(tau, counts * scale, np.sqrt(np.maximum(counts, 1.0)) * scale, False, meta)


def _jacobian(tau, p):
    i0, c, t1 = p
    e = np.exp(-tau / t1)
    return np.column_stack([1.0 + c * e, i0 * e, i0 * c * e * tau / (t1 * t1)])


def initial_guess(trace: DecayTrace):
    """Derivative-free start: tail level, first-point contrast, log-linear T1."""
    tau, y = trace.tau_us, trace.intensity
    n = y.size
    i0 = float(np.mean(y[-max(1, n // 10):]))
    if i0 <= 0:
        i0 = float(np.max(np.abs(y))) or 1.0
    c = float(y[0] / i0 - 1.0)
    if c == 0.0:
        c = 1e-3
    half = slice(0, max(n // 2, 2))
    z = (y[half] - i0) / (i0 * c)
    ok = z > 0
    t1 = 0.2 * (tau[-1] - tau[0])
    if ok.sum() >= 2:
        slope = np.polyfit(tau[half][ok], np.log(z[ok]), 1)[0]
        if slope < 0 and math.isfinite(slope):
            t1 = -1.0 / slope
    return np.array([i0, c, max(t1, 1e-12)])


def _relative_gradient(g, p, scale):
    return float(np.max(np.abs(g * p)) / scale)


def fit_decay(trace: DecayTrace, init=None, strict=False) -> FitResult:
    """Weighted least-squares fit of the mono-exponential decay.

    ``init`` may be a FitResult or an (I0, C, T1) sequence.  With
    ``strict=True`` a fit that hits the iteration cap unconverged raises
    :class:`NoConvergence`; otherwise it is returned with
    ``converged=False``.
    """
    if len(trace) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} points to fit, got {len(trace)}")
    if np.var(trace.intensity) == 0:
        raise FlatTrace("trace intensity is constant")
    tau = trace.tau_us
    sig = trace.weights_sigma()
    y = trace.intensity / sig
    absolute = trace.sigma is not None or trace.is_counts
    # normalising scale for the relative gradient: total weighted signal
    scale = max(float(np.dot(y, y)), np.finfo(float).tiny)

    if init is None:
        p = initial_guess(trace)
    elif isinstance(init, FitResult):
        p = init.params.copy()
    else:
        p = np.asarray(init, dtype=float).copy()

    def resid(q):
        return y - decay_model(tau, *q) / sig

    r = resid(p)
    chi2 = float(np.dot(r, r))
    lam = 1e-3
    it = 0
    for it in range(1, MAX_ITER + 1):
        jw = _jacobian(tau, p) / sig[:, None]
        a = jw.T @ jw
        g = jw.T @ r
        improved = False
        while lam < 1e16:
            damped = a + lam * np.diag(np.maximum(np.diag(a), 1e-300))
            try:
                step = np.linalg.solve(damped, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            if trial[2] > 0 and np.all(np.isfinite(trial)):
                r_new = resid(trial)
                chi2_new = float(np.dot(r_new, r_new))
                if chi2_new <= chi2:
                    small = np.all(np.abs(step) <= 1e-15 * np.maximum(np.abs(p), 1e-300))
                    p, r, chi2 = trial, r_new, chi2_new
                    lam = max(lam / 10.0, 1e-12)
                    improved = not small
                    break
            lam *= 10.0
        if not improved:
            break

    jw = _jacobian(tau, p) / sig[:, None]
    a = jw.T @ jw
    g = jw.T @ r
    rel_grad = _relative_gradient(g, p, scale)
    converged = rel_grad <= GRAD_TOL
    try:
        cov = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(a)
    cov = 0.5 * (cov + cov.T)
    if not absolute:
        dof = max(y.size - 3, 1)
        cov = cov * (chi2 / dof)
    result = FitResult(float(p[0]), float(p[1]), float(p[2]), cov, math.sqrt(chi2), converged, it, rel_grad)
    if not (result.t1_us > 0 and result.i0 > 0 and np.all(np.isfinite(p))):
        raise NoConvergence("fit left the physical parameter domain", result)
    if strict and not converged:
        raise NoConvergence(f"no convergence after {it} iterations (relative gradient {rel_grad:.3g})", result)
    return result


def delta_gamma(before: FitResult, after: FitResult) -> DeltaGamma:
    """Change in relaxation rate 1/T1_after - 1/T1_before, in s^-1."""
    t0, t1 = before.t1_us, after.t1_us
    if not (t0 > 0 and t1 > 0):
        raise DomainError("T1 values must be positive")
    value = 1e6 / t1 - 1e6 / t0
    var = (1e6 * after.t1_sigma_us / t1 ** 2) ** 2 + (1e6 * before.t1_sigma_us / t0 ** 2) ** 2
    return DeltaGamma(value, math.sqrt(var))
