"""Evanescent-field geometry and Fresnel reflectivity.

All operations are pure functions of their arguments.
"""

import cmath
import math

from .constants import CONST
from .errors import SubcriticalAngle
from .params import ComplexRefraction, PrismGeometry, VaporParams


def critical_angle(geom: PrismGeometry) -> float:
    """Total-internal-reflection threshold angle asin(1/n1), radians."""
    return math.asin(1.0 / geom.n1)


def evanescent_kappa(geom: PrismGeometry) -> float:
    """Probe field decay constant (1/m); penetration depth is its inverse.

    Raises SubcriticalAngle when the incidence angle does not exceed the
    critical angle, i.e. when there is no evanescent field.
    """
    radicand = (geom.n1 * math.sin(geom.theta_i)) ** 2 - 1.0
    if radicand < 0.0:
        raise SubcriticalAngle(
            f"theta_i = {math.degrees(geom.theta_i):.4f} deg is below the critical angle "
            f"{math.degrees(critical_angle(geom)):.4f} deg"
        )
    return geom.omega_probe / CONST.light_speed_c * math.sqrt(radicand)


def evanescent_kappa_pump(geom: PrismGeometry) -> float:
    """Decay constant of a co-propagating evanescent pump at its own wavelength."""
    radicand = (geom.n1 * math.sin(geom.theta_i)) ** 2 - 1.0
    if radicand < 0.0:
        raise SubcriticalAngle(
            f"theta_i = {math.degrees(geom.theta_i):.4f} deg is below the critical angle "
            f"{math.degrees(critical_angle(geom)):.4f} deg"
        )
    return geom.omega_pump / CONST.light_speed_c * math.sqrt(radicand)


def in_plane_wavevector_probe(geom: PrismGeometry) -> float:
    """Phase gradient of the evanescent probe along the surface, 1/m."""
    return geom.omega_probe / CONST.light_speed_c * geom.n1 * math.sin(geom.theta_i)


def in_plane_wavevector_pump(geom: PrismGeometry) -> float:
    return geom.omega_pump / CONST.light_speed_c * geom.n1 * math.sin(geom.theta_i)


def normal_wavevector_pump(geom: PrismGeometry) -> float:
    """Vacuum wavevector of the plane-wave pump arriving normal to the surface."""
    return geom.omega_pump / CONST.light_speed_c


def thermal_velocity(vapor: VaporParams) -> float:
    """1D thermal speed sqrt(k_B T / m), m/s."""
    return math.sqrt(CONST.boltzmann_k * vapor.temperature / vapor.atomic_mass)


def refractive_index_from_chi(chi: complex) -> ComplexRefraction:
    """Principal-branch sqrt(1 + chi); Im(n2) >= 0 whenever Im(chi) >= 0."""
    return ComplexRefraction(n2=cmath.sqrt(1.0 + chi))


def fresnel_reflectivity(geom: PrismGeometry, n2: ComplexRefraction) -> float:
    """TM-polarization power reflectivity at the prism-vapor interface.

    The transmitted-side square root is taken on the branch with non-negative
    imaginary part so the field decays into the vapor.
    """
    n1 = geom.n1
    s = n1 * math.sin(geom.theta_i)
    root = cmath.sqrt(n2.n2 * n2.n2 - s * s)
    if root.imag < 0.0:
        root = -root
    a = n1 * math.cos(geom.theta_i)
    b = (n1 / n2.n2) ** 2 * root
    r_p = (a - b) / (a + b)
    return abs(r_p) ** 2
