"""Pure-numpy backend: adaptive Runge-Kutta trajectory integration.

Readable reference implementation; the compiled extension in ``_core``
mirrors it. Trajectories run over the dimensionless coordinate
sigma = kappa_pr * |v_z| * t so spans, steps and accumulated integrals are
all O(1)-O(10) regardless of the physical scales.
"""

import math

import numpy as np

from . import bloch
from .errors import StepSizeUnderflow

name = "python"

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return math.sqrt(float(np.mean((np.abs(err) / scale) ** 2)))


def _initial_step(f, s0, y0, f0, s_end, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((np.abs(y0) / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((np.abs(f0) / scale) ** 2)))
    h0 = 1e-6 * s_end if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    # keep the trial evaluation inside the domain: the couplings grow
    # exponentially outside it
    h0 = min(h0, 0.5 * s_end)
    y1 = y0 + h0 * f0
    f1 = f(s0 + h0, y1)
    d2 = math.sqrt(float(np.mean((np.abs(f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6 * s_end, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, s_end)


def rk45(f, y0, s_end, rtol, atol, on_accept=None):
    """Integrate y' = f(s, y) over [0, s_end] (complex state).

    Returns (y, steps). ``on_accept(s, y)`` runs after each accepted step.
    """
    s = 0.0
    y = np.array(y0, dtype=complex)
    k = [None] * 7
    k[0] = f(s, y)
    h = _initial_step(f, s, y, k[0], s_end, rtol, atol)
    h_min = 1e-14 * s_end
    steps = 0
    while s < s_end:
        h = min(h, s_end - s)
        for i in range(1, 7):
            yi = y + h * sum(_A[i][j] * k[j] for j in range(i))
            k[i] = f(s + _C[i] * h, yi)
        y_new = y + h * sum(_B[j] * k[j] for j in range(6))
        err_vec = h * sum(_E[j] * k[j] for j in range(7))
        err = _error_norm(err_vec, y, y_new, rtol, atol)
        if err <= 1.0:
            s += h
            y = y_new
            k[0] = k[6]  # FSAL
            steps += 1
            if on_accept is not None:
                on_accept(s, y)
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            h *= max(_MIN_FACTOR, factor)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            if h < h_min:
                raise StepSizeUnderflow(
                    f"step {h:.3e} below floor {h_min:.3e} at s = {s:.6g}")
    return y, steps


# --- trajectory integration -------------------------------------------------

class _TrajectoryODE:
    """RHS of the convective equation in sigma units for one velocity class."""

    def __init__(self, pack, vx, vz, zeta0, zdir):
        self.pack = pack
        self.zeta0 = zeta0
        self.zdir = zdir
        dpr, dpu = bloch.doppler_detunings(pack, vx, vz)
        self.h0 = np.diag([-pack[bloch.P_HFS], 0.0, dpu, dpr]).astype(complex)
        self.om_pr0 = pack[bloch.P_OMPR]
        self.om_pu0 = pack[bloch.P_OMPU]
        self.kappa_ratio = pack[bloch.P_KAPPA_PU] / pack[bloch.P_KAPPA_PR]
        self.pump_evanescent = pack[bloch.P_GEOMETRY] == bloch.GEOM_COPROPAGATING
        self.weighted = pack[bloch.P_WEIGHTING] == bloch.WEIGHT_EVANESCENT
        g3, g4 = pack[bloch.P_G3], pack[bloch.P_G4]
        self.damp = np.array([
            [0.0, 0.0, 0.5 * g3, 0.5 * g4],
            [0.0, 0.0, 0.5 * g3, 0.5 * g4],
            [0.5 * g3, 0.5 * g3, g3, 0.5 * (g3 + g4)],
            [0.5 * g4, 0.5 * g4, 0.5 * (g3 + g4), g4],
        ])
        self.g3, self.g4 = g3, g4
        self.time_scale = 1.0 / (pack[bloch.P_KAPPA_PR] * abs(vz))

    def __call__(self, sigma, y):
        zeta = self.zeta0 + self.zdir * sigma
        om_pr = self.om_pr0 * math.exp(-zeta)
        om_pu = self.om_pu0 * (math.exp(-self.kappa_ratio * zeta) if self.pump_evanescent else 1.0)
        rho = y[:16].reshape(4, 4)
        h = self.h0.copy()
        h[0, 3] = h[3, 0] = -om_pr
        h[1, 3] = h[3, 1] = -om_pr
        h[1, 2] = h[2, 1] = -om_pu
        comm = h @ rho - rho @ h
        relax = -self.damp * rho
        feed = 0.5 * self.g3 * rho[2, 2] + 0.5 * self.g4 * rho[3, 3]
        relax[0, 0] += feed
        relax[1, 1] += feed
        out = np.empty(18, dtype=complex)
        out[:16] = ((-1j * comm + relax) * self.time_scale).reshape(16)
        w = math.exp(-zeta) if self.weighted else 1.0
        out[16] = rho[0, 3] * w
        out[17] = rho[1, 3] * w
        return out


def _quasistatic_integrals(pack, vx, vz):
    """Integrals from the local steady state on a Gauss-Legendre z grid."""
    zeta_max = pack[bloch.P_ZETA_MAX]
    dpr, dpu = bloch.doppler_detunings(pack, vx, vz)
    panels = int(pack[bloch.P_QS_PANELS])
    order = int(pack[bloch.P_QS_ORDER])
    nodes, weights = np.polynomial.legendre.leggauss(order)
    weighted = pack[bloch.P_WEIGHTING] == bloch.WEIGHT_EVANESCENT
    kappa_ratio = pack[bloch.P_KAPPA_PU] / pack[bloch.P_KAPPA_PR]
    pump_evanescent = pack[bloch.P_GEOMETRY] == bloch.GEOM_COPROPAGATING
    i14 = 0.0 + 0.0j
    i24 = 0.0 + 0.0j
    width = zeta_max / panels
    for panel in range(panels):
        lo = panel * width
        for x, w in zip(nodes, weights):
            zeta = lo + 0.5 * width * (x + 1.0)
            om_pr = pack[bloch.P_OMPR] * math.exp(-zeta)
            om_pu = pack[bloch.P_OMPU] * (math.exp(-kappa_ratio * zeta)
                                          if pump_evanescent else 1.0)
            rho = bloch.steady_state_matrix(pack[bloch.P_HFS], dpu, dpr, om_pr, om_pu,
                                            pack[bloch.P_G3], pack[bloch.P_G4])
            factor = 0.5 * width * w * (math.exp(-zeta) if weighted else 1.0)
            i14 += factor * rho[0, 3]
            i24 += factor * rho[1, 3]
    return i14, i24


def trajectory(vx, vz, pack):
    """Integrated (kappa-scaled) rho14/rho24 for one velocity class.

    Returns (i14, i24, max trace error, accepted steps); the integrals are
    kappa_pr * integral(rho dz), i.e. dimensionless.
    """
    zeta_max = pack[bloch.P_ZETA_MAX]
    eps = pack[bloch.P_VZ_EPS]
    if abs(vz) <= eps:
        i14, i24 = _quasistatic_integrals(pack, vx, vz)
        return i14, i24, 0.0, 0
    if vz > 0.0:
        rho0 = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
        ode = _TrajectoryODE(pack, vx, vz, zeta0=0.0, zdir=1.0)
    else:
        rho0 = bloch.bulk_boundary_state(pack)
        ode = _TrajectoryODE(pack, vx, vz, zeta0=zeta_max, zdir=-1.0)
    y0 = np.zeros(18, dtype=complex)
    y0[:16] = rho0.reshape(16)
    tracker = {"trace": 0.0}

    def on_accept(_s, y):
        err = abs(float(np.real(y[0] + y[5] + y[10] + y[15])) - 1.0)
        if err > tracker["trace"]:
            tracker["trace"] = err

    y, steps = rk45(ode, y0, zeta_max, pack[bloch.P_RTOL], pack[bloch.P_ATOL], on_accept)
    return complex(y[16]), complex(y[17]), tracker["trace"], steps


def grid_integrals(vxs, vzs, pack, threads=1):
    """Trajectory integrals for every velocity node, in node order.

    The threads argument is accepted for interface parity; this backend
    runs serially.
    """
    n = len(vxs)
    out = np.zeros((n, 2), dtype=complex)
    max_trace = 0.0
    total_steps = 0
    for i in range(n):
        i14, i24, trace_err, steps = trajectory(float(vxs[i]), float(vzs[i]), pack)
        out[i, 0] = i14
        out[i, 1] = i24
        max_trace = max(max_trace, trace_err)
        total_steps += steps
    return out, max_trace, total_steps


# --- fixed-z propagation (oracle support) -----------------------------------

def propagate_fixed_z(rho0, duration, z, drive, vapor, geom, kappa_pump=0.0,
                      rtol=1e-8, atol=1e-10,
                      detuning_pump=None, detuning_probe=None):
    """Propagate the local equation at fixed z for ``duration`` seconds.

    Integrates in units of the faster decay rate to keep step sizes O(1).
    Returns (rho, stats) with per-accepted-step physicality maxima.
    """
    from . import optics

    kappa = optics.evanescent_kappa(geom)
    rate = max(vapor.gamma3, vapor.gamma4)
    span = duration * rate
    h = bloch.assemble_hamiltonian(drive, vapor, kappa, z, kappa_pump,
                                   detuning_pump, detuning_probe)
    damp = bloch._damping_matrix(vapor)
    g3, g4 = vapor.gamma3, vapor.gamma4

    def f(_s, y):
        rho = y.reshape(4, 4)
        comm = h @ rho - rho @ h
        relax = -damp * rho
        feed = 0.5 * g3 * rho[2, 2] + 0.5 * g4 * rho[3, 3]
        relax[0, 0] += feed
        relax[1, 1] += feed
        return ((-1j * comm + relax) / rate).reshape(16)

    stats = {"max_trace_error": 0.0, "max_hermiticity_error": 0.0, "min_diag": 1.0,
             "steps": 0}

    def on_accept(_s, y):
        rho = y.reshape(4, 4)
        stats["max_trace_error"] = max(stats["max_trace_error"],
                                       abs(float(np.trace(rho).real) - 1.0))
        stats["max_hermiticity_error"] = max(stats["max_hermiticity_error"],
                                             float(np.max(np.abs(rho - rho.conj().T))))
        stats["min_diag"] = min(stats["min_diag"], float(np.min(np.diag(rho).real)))
        stats["steps"] += 1

    y, _ = rk45(f, np.asarray(rho0, dtype=complex).reshape(16), span, rtol, atol, on_accept)
    return y.reshape(4, 4), stats
