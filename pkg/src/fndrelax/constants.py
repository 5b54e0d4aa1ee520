"""Physical constants and model defaults, kept in one table.

SI units unless the name says otherwise.
"""
import math

from scipy import constants as _c

MU0_OVER_4PI = 1.0e-7  # T m / A
HBAR = 1.054571817e-34  # J s
GAMMA_E = 1.76086e11  # rad s^-1 T^-1, electron-like species and the NV spin
NV_ZFS_HZ = 2.87e9
OMEGA0 = 2.0 * math.pi * NV_ZFS_HZ  # rad s^-1
ANGULAR_FACTOR = 2.0 / 3.0  # isotropic average of the transverse dipolar field

K_B = _c.k  # J / K
H_PLANCK = _c.h  # J s
R_KCAL = 1.98720425e-3  # kcal mol^-1 K^-1
AVOGADRO = _c.N_A

NM = 1.0e-9
US = 1.0e-6
# number density (m^-3) of a 1 mol/L solution
PER_M3_PER_MOLAR = AVOGADRO * 1.0e3


def molar_to_number_density(c_molar):
    return c_molar * PER_M3_PER_MOLAR


def number_density_to_molar(n_per_m3):
    return n_per_m3 / PER_M3_PER_MOLAR
