"""Physical constants and default atomic parameters.

All frequencies are angular (rad/s) unless a name says otherwise.
"""

import math
from dataclasses import dataclass

from scipy.constants import physical_constants

_K_B = physical_constants["Boltzmann constant"][0]
_C = physical_constants["speed of light in vacuum"][0]
_HBAR = physical_constants["reduced Planck constant"][0]
_U = physical_constants["atomic mass constant"][0]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalConstants:
    """Fixed CODATA values; not configurable."""

    boltzmann_k: float = _K_B   # J/K
    light_speed_c: float = _C   # m/s
    hbar: float = _HBAR         # J*s


CONST = PhysicalConstants()

# Rb-85 ground-state mass and D-line defaults.
MASS_RB85 = 84.9117897 * _U                 # kg
GAMMA_D1_DEFAULT = TWO_PI * 5.75e6          # rad/s, 795 nm excited-state decay
GAMMA_D2_DEFAULT = TWO_PI * 6.07e6          # rad/s, 780 nm excited-state decay
HFS_SPLITTING_RB85 = TWO_PI * 3.035e9       # rad/s, ground hyperfine splitting

# Prism-cell defaults: BK-7 prism just above the critical angle, warm cell.
N1_DEFAULT = 1.52
THETA_I_DEFAULT = math.radians(43.0)
PROBE_WAVELENGTH_DEFAULT = 780e-9           # m
PUMP_WAVELENGTH_DEFAULT = 795e-9            # m
TEMPERATURE_DEFAULT = 350.65                # K (77.5 C)
