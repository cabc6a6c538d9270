"""Parameter types for one simulation run.

Internal units are SI with angular frequencies in rad/s. Conversions from
config-file units (Hz, degrees, nm) happen in :mod:`evsr.config`.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from . import constants as cst


class PumpGeometry(Enum):
    PERPENDICULAR_PLANE_WAVE = "perpendicular"
    COPROPAGATING_EVANESCENT = "copropagating"


class ArrivingBC(Enum):
    """Initial state of atoms flying toward the surface (v_z < 0)."""

    PUMPED_BULK = "pumped_bulk"
    THERMAL = "thermal"


class ChiWeighting(Enum):
    """z-weighting of the coherence integrals entering the susceptibility."""

    PLAIN = "plain"
    EVANESCENT = "evanescent"


@dataclass(frozen=True)
class PrismGeometry:
    n1: float = cst.N1_DEFAULT
    theta_i: float = cst.THETA_I_DEFAULT            # rad
    probe_wavelength: float = cst.PROBE_WAVELENGTH_DEFAULT  # m
    pump_wavelength: float = cst.PUMP_WAVELENGTH_DEFAULT    # m

    @property
    def omega_probe(self) -> float:
        return 2.0 * math.pi * cst.CONST.light_speed_c / self.probe_wavelength

    @property
    def omega_pump(self) -> float:
        return 2.0 * math.pi * cst.CONST.light_speed_c / self.pump_wavelength

    def violations(self, prefix: str = "prism") -> list[tuple[str, str]]:
        out = []
        if not self.n1 > 1.0:
            out.append((f"{prefix}.n1", f"must be > 1, got {self.n1}"))
        if not 0.0 < self.theta_i < math.pi / 2.0:
            out.append((f"{prefix}.theta_i", f"must lie in (0, pi/2), got {self.theta_i}"))
        if self.probe_wavelength <= 0.0:
            out.append((f"{prefix}.probe_wavelength", "must be positive"))
        if self.pump_wavelength <= 0.0:
            out.append((f"{prefix}.pump_wavelength", "must be positive"))
        if out:
            return out
        crit = math.asin(1.0 / self.n1)
        if self.theta_i <= crit:
            out.append((
                f"{prefix}.theta_i",
                f"SubcriticalAngle: {math.degrees(self.theta_i):.3f} deg is at or below the "
                f"critical angle {math.degrees(crit):.3f} deg; the probe would not be evanescent",
            ))
        return out


@dataclass(frozen=True)
class VaporParams:
    temperature: float = cst.TEMPERATURE_DEFAULT    # K
    atomic_mass: float = cst.MASS_RB85              # kg
    hfs_splitting: float = cst.HFS_SPLITTING_RB85   # rad/s
    gamma3: float = cst.GAMMA_D1_DEFAULT            # rad/s
    gamma4: float = cst.GAMMA_D2_DEFAULT            # rad/s
    chi_amplitude: float = 1.0                      # free susceptibility scale

    def violations(self, prefix: str = "vapor") -> list[tuple[str, str]]:
        out = []
        if self.temperature <= 0.0:
            out.append((f"{prefix}.temperature", f"must be > 0 K, got {self.temperature}"))
        if self.atomic_mass <= 0.0:
            out.append((f"{prefix}.atomic_mass", "must be positive"))
        if self.hfs_splitting <= 0.0:
            out.append((f"{prefix}.hfs_splitting", "must be positive"))
        if self.gamma3 <= 0.0:
            out.append((f"{prefix}.gamma3", "must be positive"))
        if self.gamma4 <= 0.0:
            out.append((f"{prefix}.gamma4", "must be positive"))
        if self.chi_amplitude < 0.0:
            out.append((f"{prefix}.chi_amplitude", "must be >= 0"))
        return out


@dataclass(frozen=True)
class DriveParams:
    rabi_pump: float = 0.0            # rad/s, coupling |2>-|3>
    rabi_probe_surface: float = 0.0   # rad/s, coupling |1>-|4> and |2>-|4> at z=0
    detuning_pump: float = 0.0        # rad/s
    detuning_probe: float = 0.0       # rad/s
    pump_geometry: PumpGeometry = PumpGeometry.PERPENDICULAR_PLANE_WAVE

    def violations(self, prefix: str = "drive") -> list[tuple[str, str]]:
        out = []
        if self.rabi_pump < 0.0:
            out.append((f"{prefix}.rabi_pump", "must be >= 0"))
        if self.rabi_probe_surface < 0.0:
            out.append((f"{prefix}.rabi_probe_surface", "must be >= 0"))
        return out

    def pump_off(self) -> "DriveParams":
        return replace(self, rabi_pump=0.0)


@dataclass(frozen=True)
class ComplexRefraction:
    n2: complex

    def violations(self, prefix: str = "n2") -> list[tuple[str, str]]:
        if self.n2.imag < 0.0:
            return [(prefix, f"Im(n2) must be >= 0 for an absorbing medium, got {self.n2.imag}")]
        return []


@dataclass(frozen=True)
class NumericsParams:
    order_x: int = 32                 # velocity quadrature order along the probe
    order_z: int = 32                 # velocity quadrature order normal to the surface
    z_max_over_delta: float = 10.0    # integration depth in penetration depths
    ode_rel_tol: float = 1e-8
    ode_abs_tol: float = 1e-10
    small_vz_epsilon: float = 1e-2    # |v_z| <= eps*v_T uses the quasi-static branch
    arriving_bc: ArrivingBC = ArrivingBC.PUMPED_BULK
    chi_weighting: ChiWeighting = ChiWeighting.PLAIN
    quasistatic_panels: int = 24      # composite Gauss-Legendre panels for the quasi-static branch
    quasistatic_order: int = 8
    quadrature_check: bool = False    # recompute chi at doubled orders as a guard
    quadrature_check_tol: float = 1e-3

    def violations(self, prefix: str = "numerics") -> list[tuple[str, str]]:
        out = []
        for name in ("order_x", "order_z"):
            order = getattr(self, name)
            if order < 2 or order % 2 != 0:
                out.append((
                    f"{prefix}.{name}",
                    f"quadrature order must be even and >= 2 so no node sits at v_z = 0 "
                    f"(the convective equation is singular there), got {order}",
                ))
        if self.z_max_over_delta <= 0.0:
            out.append((f"{prefix}.z_max_over_delta", "must be positive"))
        if self.ode_rel_tol <= 0.0 or self.ode_abs_tol <= 0.0:
            out.append((f"{prefix}.ode_rel_tol/ode_abs_tol", "tolerances must be positive"))
        if not 0.0 < self.small_vz_epsilon < 1.0:
            out.append((f"{prefix}.small_vz_epsilon", "must lie in (0, 1)"))
        if self.quasistatic_panels < 1 or self.quasistatic_order < 2:
            out.append((f"{prefix}.quasistatic_panels/order", "need >= 1 panel of order >= 2"))
        return out


@dataclass(frozen=True)
class SweepParams:
    detuning_min: float = -2.0 * math.pi * 5.5175e9   # rad/s
    detuning_max: float = 2.0 * math.pi * 2.4825e9    # rad/s
    points: int = 241
    # Pump Rabi ladder in units of gamma3, strongest first.
    pump_power_series: tuple[float, ...] = (20.0, 10.0, 5.0, 2.5, 1.25, 0.0)

    def violations(self, prefix: str = "sweep") -> list[tuple[str, str]]:
        out = []
        if self.points < 2:
            out.append((f"{prefix}.points", f"need at least 2 points, got {self.points}"))
        if not self.detuning_min < self.detuning_max:
            out.append((f"{prefix}.detuning_min", "must be strictly below detuning_max"))
        if any(v < 0.0 for v in self.pump_power_series):
            out.append((f"{prefix}.pump_power_series", "entries must be >= 0"))
        if list(self.pump_power_series) != sorted(self.pump_power_series, reverse=True):
            out.append((f"{prefix}.pump_power_series", "must be sorted descending"))
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    prism: PrismGeometry = field(default_factory=PrismGeometry)
    vapor: VaporParams = field(default_factory=VaporParams)
    drive: DriveParams = field(default_factory=DriveParams)
    numerics: NumericsParams = field(default_factory=NumericsParams)
    sweep: SweepParams = field(default_factory=SweepParams)

    def violations(self) -> list[tuple[str, str]]:
        out = []
        out += self.prism.violations()
        out += self.vapor.violations()
        out += self.drive.violations()
        out += self.numerics.violations()
        out += self.sweep.violations()
        return out
