"""Four-level density-matrix model and its convective trajectory integration.

Basis ordering: |1>, |2> are the ground hyperfine states (|1> the one the
pump does not address), |3> the 795 nm excited state, |4> the 780 nm excited
state. The rotating frame is chosen so both probe couplings are static; the
free part is diag(-hfs, 0, detuning_pump, detuning_probe) and drive couplings
enter the total Hamiltonian with a negative sign.

All Hamiltonian entries are angular frequencies, so the coherent evolution is
-i[H, rho] with no explicit hbar.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import optics
from .errors import SingularSystem
from .params import (
    ArrivingBC,
    ChiWeighting,
    DriveParams,
    NumericsParams,
    PrismGeometry,
    PumpGeometry,
    VaporParams,
)

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
DIAG_NEG_TOL = 1e-8


@dataclass(frozen=True)
class DensityMatrix:
    """4x4 density matrix with its physicality tolerances."""

    rho: np.ndarray

    @classmethod
    def thermal_ground(cls) -> "DensityMatrix":
        return cls(rho=np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex))

    @classmethod
    def pumped_ground(cls) -> "DensityMatrix":
        return cls(rho=np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex))

    def trace_error(self) -> float:
        return abs(np.trace(self.rho).real - 1.0) + abs(np.trace(self.rho).imag)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def validate(self) -> None:
        if self.rho.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {self.rho.shape}")
        if self.hermiticity_error() > HERMITICITY_TOL:
            raise ValueError(f"not Hermitian: error {self.hermiticity_error():.3e}")
        if self.trace_error() > TRACE_TOL:
            raise ValueError(f"trace != 1: error {self.trace_error():.3e}")
        diag = np.diag(self.rho).real
        if diag.min() < -DIAG_NEG_TOL or diag.max() > 1.0 + DIAG_NEG_TOL:
            raise ValueError(f"populations out of range: {diag}")


@dataclass(frozen=True)
class TrajectoryResult:
    """z-integrated probe coherences for one velocity class."""

    integrated_rho14: complex  # m
    integrated_rho24: complex  # m
    trace_error: float
    steps: int


def build_interaction(drive: DriveParams, kappa: float, z: float,
                      kappa_pump: float = 0.0) -> np.ndarray:
    """Drive-coupling magnitude matrix at height z (rad/s).

    The pump couples |2>-|3>; the evanescent probe couples |1>-|4> and
    |2>-|4> with equal strength decaying as exp(-kappa z). A nonzero
    kappa_pump makes the pump evanescent as well (co-propagating geometry).
    """
    om_pr = drive.rabi_probe_surface * math.exp(-kappa * z)
    om_pu = drive.rabi_pump * (math.exp(-kappa_pump * z) if kappa_pump > 0.0 else 1.0)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 3] = m[3, 0] = om_pr
    m[1, 3] = m[3, 1] = om_pr
    m[1, 2] = m[2, 1] = om_pu
    return m


def free_hamiltonian(vapor: VaporParams, detuning_pump: float, detuning_probe: float) -> np.ndarray:
    return np.diag([-vapor.hfs_splitting, 0.0, detuning_pump, detuning_probe]).astype(complex)


def assemble_hamiltonian(drive: DriveParams, vapor: VaporParams, kappa: float, z: float,
                         kappa_pump: float = 0.0,
                         detuning_pump: float | None = None,
                         detuning_probe: float | None = None) -> np.ndarray:
    """Total rotating-frame Hamiltonian (rad/s): free part minus couplings."""
    dpu = drive.detuning_pump if detuning_pump is None else detuning_pump
    dpr = drive.detuning_probe if detuning_probe is None else detuning_probe
    return free_hamiltonian(vapor, dpu, dpr) - build_interaction(drive, kappa, z, kappa_pump)


def _damping_matrix(vapor: VaporParams) -> np.ndarray:
    g3, g4 = vapor.gamma3, vapor.gamma4
    return np.array([
        [0.0, 0.0, 0.5 * g3, 0.5 * g4],
        [0.0, 0.0, 0.5 * g3, 0.5 * g4],
        [0.5 * g3, 0.5 * g3, g3, 0.5 * (g3 + g4)],
        [0.5 * g4, 0.5 * g4, 0.5 * (g3 + g4), g4],
    ])


def lindblad_relaxation(rho: np.ndarray, vapor: VaporParams) -> np.ndarray:
    """Population-conserving relaxation: each excited level branches equally
    into both ground levels; the ground coherence does not decay."""
    g3, g4 = vapor.gamma3, vapor.gamma4
    out = -_damping_matrix(vapor) * rho
    feed = 0.5 * g3 * rho[2, 2] + 0.5 * g4 * rho[3, 3]
    out[0, 0] += feed
    out[1, 1] += feed
    return out


def obe_rhs(rho: np.ndarray, z: float, drive: DriveParams, vapor: VaporParams,
            geom: PrismGeometry, kappa_pump: float = 0.0,
            detuning_pump: float | None = None,
            detuning_probe: float | None = None) -> np.ndarray:
    """Time derivative of rho at fixed height z (1/s)."""
    kappa = optics.evanescent_kappa(geom)
    h = assemble_hamiltonian(drive, vapor, kappa, z, kappa_pump, detuning_pump, detuning_probe)
    comm = h @ rho - rho @ h
    return -1j * comm + lindblad_relaxation(rho, vapor)


# --- packed trajectory problem shared by both kernels ---------------------

GEOM_PERPENDICULAR = 0.0
GEOM_COPROPAGATING = 1.0
BC_PUMPED_BULK = 0.0
BC_THERMAL = 1.0
WEIGHT_PLAIN = 0.0
WEIGHT_EVANESCENT = 1.0

# slots in the packed parameter vector
(P_DPR0, P_DPU0, P_OMPR, P_OMPU, P_G3, P_G4, P_HFS, P_KAPPA_PR, P_KAPPA_PU,
 P_KPR_PAR, P_KPU_DOPPLER, P_GEOMETRY, P_ZETA_MAX, P_RTOL, P_ATOL, P_VZ_EPS,
 P_BC, P_WEIGHTING, P_QS_PANELS, P_QS_ORDER) = range(20)
PACK_SIZE = 20


def pack_problem(drive: DriveParams, vapor: VaporParams, geom: PrismGeometry,
                 numerics: NumericsParams) -> np.ndarray:
    """Flatten one trajectory problem into a double vector for the kernels."""
    kappa_pr = optics.evanescent_kappa(geom)
    coprop = drive.pump_geometry is PumpGeometry.COPROPAGATING_EVANESCENT
    p = np.zeros(PACK_SIZE)
    p[P_DPR0] = drive.detuning_probe
    p[P_DPU0] = drive.detuning_pump
    p[P_OMPR] = drive.rabi_probe_surface
    p[P_OMPU] = drive.rabi_pump
    p[P_G3] = vapor.gamma3
    p[P_G4] = vapor.gamma4
    p[P_HFS] = vapor.hfs_splitting
    p[P_KAPPA_PR] = kappa_pr
    p[P_KAPPA_PU] = optics.evanescent_kappa_pump(geom) if coprop else 0.0
    p[P_KPR_PAR] = optics.in_plane_wavevector_probe(geom)
    p[P_KPU_DOPPLER] = (optics.in_plane_wavevector_pump(geom) if coprop
                        else optics.normal_wavevector_pump(geom))
    p[P_GEOMETRY] = GEOM_COPROPAGATING if coprop else GEOM_PERPENDICULAR
    p[P_ZETA_MAX] = numerics.z_max_over_delta
    p[P_RTOL] = numerics.ode_rel_tol
    p[P_ATOL] = numerics.ode_abs_tol
    p[P_VZ_EPS] = numerics.small_vz_epsilon * optics.thermal_velocity(vapor)
    p[P_BC] = BC_THERMAL if numerics.arriving_bc is ArrivingBC.THERMAL else BC_PUMPED_BULK
    p[P_WEIGHTING] = (WEIGHT_EVANESCENT if numerics.chi_weighting is ChiWeighting.EVANESCENT
                      else WEIGHT_PLAIN)
    p[P_QS_PANELS] = numerics.quasistatic_panels
    p[P_QS_ORDER] = numerics.quasistatic_order
    return p


def doppler_detunings(pack: np.ndarray, vx: float, vz: float) -> tuple[float, float]:
    """Frame detunings seen by one velocity class."""
    dpr = pack[P_DPR0] - pack[P_KPR_PAR] * vx
    if pack[P_GEOMETRY] == GEOM_COPROPAGATING:
        dpu = pack[P_DPU0] - pack[P_KPU_DOPPLER] * vx
    else:
        dpu = pack[P_DPU0] + pack[P_KPU_DOPPLER] * vz
    return dpr, dpu


def bulk_boundary_state(pack: np.ndarray) -> np.ndarray:
    """State of atoms arriving from the far bulk (z >> penetration depth).

    With a plane-wave pump the bulk is driven forever, so any nonzero pump
    empties |2> completely; with an evanescent pump (or none) the bulk field
    vanishes and arriving atoms are thermal. The thermal flag forces the
    second case.
    """
    if pack[P_BC] == BC_THERMAL:
        return np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    if pack[P_GEOMETRY] == GEOM_PERPENDICULAR and pack[P_OMPU] > 0.0:
        return np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    return np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)


# --- steady state ----------------------------------------------------------

def hamiltonian_scalars(hfs: float, dpu: float, dpr: float,
                        om_pr: float, om_pu: float) -> np.ndarray:
    """Total Hamiltonian from already-evaluated local couplings (rad/s)."""
    h = np.diag([-hfs, 0.0, dpu, dpr]).astype(complex)
    h[0, 3] = h[3, 0] = -om_pr
    h[1, 3] = h[3, 1] = -om_pr
    h[1, 2] = h[2, 1] = -om_pu
    return h


def _liouvillian_scalars(hfs, dpu, dpr, om_pr, om_pu, g3, g4) -> np.ndarray:
    """16x16 complex matrix L with d vec(rho)/dt = L vec(rho) (row-major vec)."""
    h = hamiltonian_scalars(hfs, dpu, dpr, om_pr, om_pu)
    eye = np.eye(4, dtype=complex)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    damp = np.array([
        [0.0, 0.0, 0.5 * g3, 0.5 * g4],
        [0.0, 0.0, 0.5 * g3, 0.5 * g4],
        [0.5 * g3, 0.5 * g3, g3, 0.5 * (g3 + g4)],
        [0.5 * g4, 0.5 * g4, 0.5 * (g3 + g4), g4],
    ])
    lv -= np.diag(damp.reshape(16))
    # population feed: rho11 and rho22 gain half of each excited decay
    for target in (0, 5):  # vec indices of rho11, rho22
        lv[target, 10] += 0.5 * g3   # rho33
        lv[target, 15] += 0.5 * g4   # rho44
    return lv


def steady_state_matrix(hfs, dpu, dpr, om_pr, om_pu, g3, g4) -> np.ndarray:
    """Stationary rho of the local generator with the given couplings.

    Solves the vectorized generator with the trace constraint replacing one
    population row. With every drive exactly zero any ground mixture is
    stationary; that degeneracy is resolved by returning the thermal ground
    state, matching the surface boundary condition. Any other rank deficiency
    raises SingularSystem.
    """
    if om_pr == 0.0 and om_pu == 0.0:
        return np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    lv = _liouvillian_scalars(hfs, dpu, dpr, om_pr, om_pu, g3, g4)
    a = lv.copy()
    a[0, :] = 0.0
    a[0, [0, 5, 10, 15]] = 1.0  # trace row
    b = np.zeros(16, dtype=complex)
    b[0] = 1.0
    try:
        vec = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("steady-state system exactly singular") from exc
    residual = np.max(np.abs(lv @ vec))
    scale = max(float(np.max(np.abs(lv))), 1.0)
    if not np.isfinite(residual) or residual > 1e-6 * scale:
        raise SingularSystem(
            f"steady-state residual {residual:.3e} too large "
            f"(dark-state degeneracy beyond the trace constraint)"
        )
    rho = vec.reshape(4, 4)
    return 0.5 * (rho + rho.conj().T)  # strip solver round-off


def local_steady_state(z: float, drive: DriveParams, vapor: VaporParams,
                       geom: PrismGeometry, kappa_pump: float = 0.0,
                       detuning_pump: float | None = None,
                       detuning_probe: float | None = None) -> DensityMatrix:
    """Stationary state of the local evolution at height z."""
    kappa = optics.evanescent_kappa(geom)
    om_pr = drive.rabi_probe_surface * math.exp(-kappa * z)
    om_pu = drive.rabi_pump * (math.exp(-kappa_pump * z) if kappa_pump > 0.0 else 1.0)
    dpu = drive.detuning_pump if detuning_pump is None else detuning_pump
    dpr = drive.detuning_probe if detuning_probe is None else detuning_probe
    rho = steady_state_matrix(vapor.hfs_splitting, dpu, dpr, om_pr, om_pu,
                              vapor.gamma3, vapor.gamma4)
    return DensityMatrix(rho=rho)


# --- time propagation and trajectories (backend dispatch) ------------------

def propagate_time(rho0: DensityMatrix, duration: float, z: float,
                   drive: DriveParams, vapor: VaporParams, geom: PrismGeometry,
                   kappa_pump: float = 0.0, rtol: float = 1e-8, atol: float = 1e-10,
                   detuning_pump: float | None = None,
                   detuning_probe: float | None = None) -> DensityMatrix:
    """Adaptive integration of the local equation at fixed z.

    Physicality (trace, Hermiticity, weak positivity) is checked on every
    accepted step; used as the brute-force oracle for the steady-state solve.
    """
    from . import _pykernel

    if duration < 0.0:
        raise ValueError("duration must be >= 0")
    if duration == 0.0:
        return rho0
    rho = _pykernel.propagate_fixed_z(
        rho0.rho, duration, z, drive, vapor, geom, kappa_pump, rtol, atol,
        detuning_pump, detuning_probe,
    )
    return DensityMatrix(rho=rho)


def integrate_trajectory(vx: float, vz: float, drive: DriveParams, vapor: VaporParams,
                         geom: PrismGeometry, numerics: NumericsParams,
                         backend: str = "auto") -> TrajectoryResult:
    """z-integrated probe coherences for the velocity class (vx, vz).

    Departing atoms (v_z > eps v_T) start thermal at the surface; arriving
    atoms start in the bulk state at the outer edge; nearly-tangential atoms
    use the quasi-static local steady state on a z quadrature grid.
    """
    from .kernel import get_backend

    kern = get_backend(backend)
    pack = pack_problem(drive, vapor, geom, numerics)
    i14, i24, trace_err, steps = kern.trajectory(vx, vz, pack)
    kappa = pack[P_KAPPA_PR]
    return TrajectoryResult(
        integrated_rho14=i14 / kappa,
        integrated_rho24=i24 / kappa,
        trace_error=trace_err,
        steps=int(steps),
    )
