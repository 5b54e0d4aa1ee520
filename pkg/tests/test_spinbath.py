import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from fndrelax import constants as const
from fndrelax.errors import DomainError
from fndrelax.geometry import NvPosition, ParticleGeometry
from fndrelax.spinbath import (DEFAULT_SPECIES, EMPTY_BATH, BathEntry, BathSpec, NvParams, SpinSpecies,
                               induced_rate_continuum, induced_rate_point, total_rate,
                               transverse_field_variance)

OH = DEFAULT_SPECIES["oh_radical"]
GD = DEFAULT_SPECIES["gd3+"]
NVP = NvParams.from_t1_us(238.5)
GEOM = ParticleGeometry(20.0, 9.4, 34.25)
# zero or physically meaningful molar concentrations (avoids subnormal underflow)
CONC = st.just(0.0) | st.floats(1e-20, 1.0)


def radical_bath(c_molar, region="porous"):
    return BathSpec([BathEntry.molar(OH, region, c_molar)])


class TestPointModel:
    @pytest.mark.parametrize("sp", list(DEFAULT_SPECIES.values()))
    def test_inverse_sixth_power(self, sp):
        assert transverse_field_variance(sp, 6.0) == pytest.approx(transverse_field_variance(sp, 3.0) / 64, rel=1e-14)

    def test_spin_zero(self):
        assert transverse_field_variance(SpinSpecies("x", 0.0), 1.0) == 0.0

    def test_gd_over_radical_ratio(self):
        gd = SpinSpecies("gd", 3.5, const.GAMMA_E, 1e-9)
        assert transverse_field_variance(gd, 5.0) / transverse_field_variance(OH, 5.0) == pytest.approx(21.0, rel=1e-14)

    def test_explicit_value(self):
        # (2/3) (1e-7)^2 (hbar gamma)^2 (3/4) / (1 nm)^6, evaluated independently
        expected = 2 / 3 * 1e-14 * (1.054571817e-34 * 1.76086e11) ** 2 * 0.75 / 1e-54
        assert transverse_field_variance(OH, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_nonpositive_distance(self):
        with pytest.raises(DomainError):
            transverse_field_variance(OH, 0.0)
        with pytest.raises(DomainError):
            induced_rate_point(OH, NVP, -1.0)

    def test_vanishes_for_short_correlation_time(self):
        rates = [induced_rate_point(SpinSpecies("x", 0.5, const.GAMMA_E, tau), NVP, 5.0) for tau in (1e-15, 1e-18, 1e-21)]
        assert rates[0] > rates[1] > rates[2]
        assert rates[2] < 1e-6 * induced_rate_point(OH, NVP, 5.0)

    def test_maximum_at_inverse_omega0(self):
        def neg(log_tau):
            return -induced_rate_point(SpinSpecies("x", 0.5, const.GAMMA_E, 10 ** log_tau), NVP, 5.0)
        res = minimize_scalar(neg, bounds=(-13, -8), method="bounded", options={"xatol": 1e-10})
        assert 10 ** res.x == pytest.approx(1 / NVP.omega0_rad_s, rel=1e-4)

    def test_linear_in_field_variance(self):
        s2 = SpinSpecies("a", 2.0, const.GAMMA_E, 1e-10)  # S(S+1) = 6
        s3 = SpinSpecies("b", 3.0, const.GAMMA_E, 1e-10)  # S(S+1) = 12
        assert induced_rate_point(s3, NVP, 4.0) == pytest.approx(2 * induced_rate_point(s2, NVP, 4.0), rel=1e-14)

    def test_species_validation(self):
        with pytest.raises(DomainError):
            SpinSpecies("bad", 0.3)
        with pytest.raises(DomainError):
            SpinSpecies("bad", 0.5, tau_c_s=0.0)


class TestContinuum:
    def test_empty_bath(self):
        assert induced_rate_continuum(GEOM, NvPosition(), NVP, radical_bath(0.0)) == 0.0
        assert induced_rate_continuum(GEOM, NvPosition(), NVP, EMPTY_BATH) == 0.0

    def test_doubling_concentration(self):
        nv = NvPosition([5.0, 2.0, -3.0])
        bath = radical_bath(1e-6) + BathSpec([BathEntry.molar(GD, "exterior", 1e-6)])
        single = induced_rate_continuum(GEOM, nv, NVP, bath)
        assert induced_rate_continuum(GEOM, nv, NVP, bath.scaled(2.0)) == 2 * single

    def test_discrete_spin_oracle(self):
        """Explicit spins dropped uniformly in the porous shell versus the continuum."""
        c_molar = 1e-3
        n_density = const.molar_to_number_density(c_molar)
        offset = np.array([0.0, 0.0, 12.0])
        r1, r2 = GEOM.region_bounds("porous")
        volume_m3 = 4 * math.pi / 3 * (r2 ** 3 - r1 ** 3) * 1e-27
        n_spins = n_density * volume_m3  # expected spins in the shell
        rng = np.random.default_rng(11)
        total = 10_000_000
        s = s2 = 0.0
        for _ in range(10):
            m = total // 10
            u = rng.normal(size=(m, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = np.cbrt(r1 ** 3 + (r2 ** 3 - r1 ** 3) * rng.random(m))
            d = np.linalg.norm(u * r[:, None] - offset, axis=1)
            rate = induced_rate_point(OH, NVP, d)
            s += rate.sum()
            s2 += np.dot(rate, rate)
        mean = s / total
        se = math.sqrt((s2 / total - mean ** 2) / (total - 1))
        discrete, discrete_se = n_spins * mean, n_spins * se
        continuum = induced_rate_continuum(GEOM, NvPosition(offset), NVP, radical_bath(c_molar))
        assert abs(discrete - continuum) < 3 * discrete_se

    @settings(max_examples=100, deadline=None)
    @given(c1=CONC, c2=CONC, k=st.floats(0.01, 100), a=st.floats(0, 19.9))
    def test_linearity(self, c1, c2, k, a):
        nv = NvPosition([a, 0, 0])
        b1, b2 = radical_bath(c1), BathSpec([BathEntry.molar(GD, "exterior", c2)])
        r1 = induced_rate_continuum(GEOM, nv, NVP, b1)
        r2 = induced_rate_continuum(GEOM, nv, NVP, b2)
        assert induced_rate_continuum(GEOM, nv, NVP, b1 + b2) == pytest.approx(r1 + r2, rel=1e-12, abs=0)
        assert induced_rate_continuum(GEOM, nv, NVP, b1.scaled(k)) == pytest.approx(k * r1, rel=1e-12, abs=0)

    def test_splitting_entry_is_invariant(self):
        nv = NvPosition([7.0, 0, 0])
        whole = radical_bath(3e-6)
        split = radical_bath(1e-6) + radical_bath(2e-6)
        assert induced_rate_continuum(GEOM, nv, NVP, split) == pytest.approx(
            induced_rate_continuum(GEOM, nv, NVP, whole), rel=1e-12)

    def test_non_increasing_in_dense_shell(self):
        bath = radical_bath(1e-3) + BathSpec([BathEntry.molar(GD, "exterior", 1e-3)])
        rates = [induced_rate_continuum(ParticleGeometry(20.0, t, 34.25), NvPosition([10, 0, 0]), NVP, bath)
                 for t in np.linspace(0.0, 20.0, 41)]
        assert np.all(np.diff(rates) <= 0)

    @settings(max_examples=100, deadline=None)
    @given(c=CONC, a=st.floats(0, 19.9))
    def test_total_rate_at_least_intrinsic(self, c, a):
        nv = NvPosition([0, a, 0])
        assert total_rate(GEOM, nv, NVP, radical_bath(c)) >= NVP.gamma0_per_s
        assert (induced_rate_continuum(GEOM, nv, NVP, radical_bath(c)) > 0) == (c > 0)

    def test_molar_accessor(self):
        e = BathEntry.molar(OH, "porous", 2e-6)
        assert e.concentration == pytest.approx(2e-6 * 6.02214076e26)
        assert e.concentration_molar == pytest.approx(2e-6)
        with pytest.raises(DomainError):
            BathEntry(OH, "porous", -1.0)
