# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernel.

Mirrors ``_pykernel``: Dormand-Prince 5(4) over the dimensionless
trajectory coordinate, with the density matrix stored as 16 reals
(4 populations + 6 complex coherences) so Hermiticity holds by
construction, plus 4 accumulator slots for the probe-coherence integrals.
Releases the GIL; the velocity-grid loop is OpenMP-parallel with one
output slot per node, so results are independent of the thread count.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange
from libc.math cimport exp, fabs, fmax, fmin, sqrt
from scipy.linalg.cython_lapack cimport dgesv

name = "cython"

DEF NSTATE = 20
DEF NRHO = 16

# pack slots; must match bloch.pack_problem
DEF P_DPR0 = 0
DEF P_DPU0 = 1
DEF P_OMPR = 2
DEF P_OMPU = 3
DEF P_G3 = 4
DEF P_G4 = 5
DEF P_HFS = 6
DEF P_KAPPA_PR = 7
DEF P_KAPPA_PU = 8
DEF P_KPR_PAR = 9
DEF P_KPU_DOPPLER = 10
DEF P_GEOMETRY = 11
DEF P_ZETA_MAX = 12
DEF P_RTOL = 13
DEF P_ATOL = 14
DEF P_VZ_EPS = 15
DEF P_BC = 16
DEF P_WEIGHTING = 17
DEF P_QS_PANELS = 18
DEF P_QS_ORDER = 19

DEF STATUS_OK = 0
DEF STATUS_STEP_UNDERFLOW = 1
DEF STATUS_SINGULAR = 2


cdef struct TrajParams:
    double dpr, dpu            # Doppler-shifted detunings for this node
    double om_pr0, om_pu0
    double g3, g4, hfs
    double kappa_ratio         # kappa_pu / kappa_pr (0 for plane-wave pump)
    bint pump_evanescent
    bint weighted
    double time_scale          # 1 / (kappa_pr * |v_z|)
    double zeta0, zdir
    double zeta_max, rtol, atol


cdef inline void _rhs_scalars(double dpr, double dpu, double om_pr, double om_pu,
                              double g3, double g4, double hfs,
                              const double *y, double *dy) noexcept nogil:
    """Time derivative of the 16 density-matrix reals (rad/s units)."""
    cdef double p = -om_pr
    cdef double q = -om_pu
    cdef double e1 = -hfs
    cdef double w, s_re, s_im, feed
    cdef double r11 = y[0], r22 = y[1], r33 = y[2], r44 = y[3]
    cdef double re12 = y[4], im12 = y[5]
    cdef double re13 = y[6], im13 = y[7]
    cdef double re14 = y[8], im14 = y[9]
    cdef double re23 = y[10], im23 = y[11]
    cdef double re24 = y[12], im24 = y[13]
    cdef double re34 = y[14], im34 = y[15]

    feed = 0.5 * g3 * r33 + 0.5 * g4 * r44
    dy[0] = -2.0 * p * im14 + feed
    dy[1] = -2.0 * q * im23 - 2.0 * p * im24 + feed
    dy[2] = 2.0 * q * im23 - g3 * r33
    dy[3] = 2.0 * p * (im14 + im24) - g4 * r44

    # rho12 (no decay)
    w = e1
    s_re = p * (re24 - re14) - q * re13
    s_im = -p * (im24 + im14) - q * im13
    dy[4] = w * im12 + s_im
    dy[5] = -w * re12 - s_re

    # rho13
    w = e1 - dpu
    s_re = p * re34 - q * re12
    s_im = -p * im34 - q * im12
    dy[6] = w * im13 + s_im - 0.5 * g3 * re13
    dy[7] = -w * re13 - s_re - 0.5 * g3 * im13

    # rho14
    w = e1 - dpr
    s_re = p * (r44 - r11 - re12)
    s_im = -p * im12
    dy[8] = w * im14 + s_im - 0.5 * g4 * re14
    dy[9] = -w * re14 - s_re - 0.5 * g4 * im14

    # rho23
    w = -dpu
    s_re = q * (r33 - r22) + p * re34
    s_im = -p * im34
    dy[10] = w * im23 + s_im - 0.5 * g3 * re23
    dy[11] = -w * re23 - s_re - 0.5 * g3 * im23

    # rho24
    w = -dpr
    s_re = q * re34 + p * (r44 - r22 - re12)
    s_im = q * im34 + p * im12
    dy[12] = w * im24 + s_im - 0.5 * g4 * re24
    dy[13] = -w * re24 - s_re - 0.5 * g4 * im24

    # rho34
    w = dpu - dpr
    s_re = q * re24 - p * (re13 + re23)
    s_im = q * im24 + p * (im13 + im23)
    dy[14] = w * im34 + s_im - 0.5 * (g3 + g4) * re34
    dy[15] = -w * re34 - s_re - 0.5 * (g3 + g4) * im34


cdef inline void _traj_rhs(const TrajParams *tp, double sigma,
                           const double *y, double *dy) noexcept nogil:
    cdef double zeta = tp.zeta0 + tp.zdir * sigma
    cdef double om_pr = tp.om_pr0 * exp(-zeta)
    cdef double om_pu = tp.om_pu0
    cdef double w
    cdef int i
    if tp.pump_evanescent:
        om_pu *= exp(-tp.kappa_ratio * zeta)
    _rhs_scalars(tp.dpr, tp.dpu, om_pr, om_pu, tp.g3, tp.g4, tp.hfs, y, dy)
    for i in range(NRHO):
        dy[i] *= tp.time_scale
    w = exp(-zeta) if tp.weighted else 1.0
    dy[16] = w * y[8]
    dy[17] = w * y[9]
    dy[18] = w * y[12]
    dy[19] = w * y[13]


cdef inline double _scaled_rms(const double *v, const double *y0, const double *y1,
                               double rtol, double atol) noexcept nogil:
    cdef double acc = 0.0, sc, r
    cdef int i
    for i in range(NSTATE):
        sc = atol + rtol * fmax(fabs(y0[i]), fabs(y1[i]))
        r = v[i] / sc
        acc += r * r
    return sqrt(acc / NSTATE)


cdef int _integrate(const TrajParams *tp, double *y, double *max_trace_err,
                    long *steps) noexcept nogil:
    """Dormand-Prince 5(4) with FSAL over sigma in [0, zeta_max]."""
    cdef double k[7][20]
    cdef double ytmp[20]
    cdef double ynew[20]
    cdef double errv[20]
    cdef double s = 0.0, s_end = tp.zeta_max
    cdef double h, h_min, err, factor, acc, sc, r, d0, d1, d2, h0, h1, tr
    cdef int i, j
    cdef long nsteps = 0

    # tableau
    cdef double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0
    cdef double a21 = 1.0 / 5.0
    cdef double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0
    cdef double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0
    cdef double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0
    cdef double a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0
    cdef double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0
    cdef double a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0
    cdef double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0
    cdef double b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0
    cdef double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0
    cdef double e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0

    _traj_rhs(tp, s, y, k[0])

    # startup step size (Hairer-style two-sample estimate)
    d0 = 0.0
    d1 = 0.0
    for i in range(NSTATE):
        sc = tp.atol + tp.rtol * fabs(y[i])
        r = y[i] / sc
        d0 += r * r
        r = k[0][i] / sc
        d1 += r * r
    d0 = sqrt(d0 / NSTATE)
    d1 = sqrt(d1 / NSTATE)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6 * s_end
    else:
        h0 = 0.01 * d0 / d1
    # keep the trial evaluation inside the domain: the couplings grow
    # exponentially outside it
    h0 = fmin(h0, 0.5 * s_end)
    for i in range(NSTATE):
        ytmp[i] = y[i] + h0 * k[0][i]
    _traj_rhs(tp, s + h0, ytmp, k[1])
    d2 = 0.0
    for i in range(NSTATE):
        sc = tp.atol + tp.rtol * fabs(y[i])
        r = (k[1][i] - k[0][i]) / sc
        d2 += r * r
    d2 = sqrt(d2 / NSTATE) / h0
    if fmax(d1, d2) <= 1e-15:
        h1 = fmax(1e-6 * s_end, h0 * 1e-3)
    else:
        h1 = (0.01 / fmax(d1, d2)) ** 0.2
    h = fmin(fmin(100.0 * h0, h1), s_end)
    h_min = 1e-14 * s_end

    while s < s_end:
        h = fmin(h, s_end - s)

        for i in range(NSTATE):
            ytmp[i] = y[i] + h * a21 * k[0][i]
        _traj_rhs(tp, s + c2 * h, ytmp, k[1])
        for i in range(NSTATE):
            ytmp[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i])
        _traj_rhs(tp, s + c3 * h, ytmp, k[2])
        for i in range(NSTATE):
            ytmp[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i])
        _traj_rhs(tp, s + c4 * h, ytmp, k[3])
        for i in range(NSTATE):
            ytmp[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i]
                                  + a54 * k[3][i])
        _traj_rhs(tp, s + c5 * h, ytmp, k[4])
        for i in range(NSTATE):
            ytmp[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i]
                                  + a64 * k[3][i] + a65 * k[4][i])
        _traj_rhs(tp, s + h, ytmp, k[5])
        for i in range(NSTATE):
            ynew[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i]
                                  + b5 * k[4][i] + b6 * k[5][i])
        _traj_rhs(tp, s + h, ynew, k[6])
        for i in range(NSTATE):
            errv[i] = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i]
                           + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i])
        err = _scaled_rms(errv, y, ynew, tp.rtol, tp.atol)

        if err <= 1.0:
            s += h
            for i in range(NSTATE):
                y[i] = ynew[i]
                k[0][i] = k[6][i]  # FSAL
            nsteps += 1
            tr = fabs(y[0] + y[1] + y[2] + y[3] - 1.0)
            if tr > max_trace_err[0]:
                max_trace_err[0] = tr
            if err == 0.0:
                factor = 5.0
            else:
                factor = fmin(5.0, 0.9 * err ** -0.2)
            h *= fmax(0.2, factor)
        else:
            h *= fmax(0.2, 0.9 * err ** -0.2)
            if h < h_min:
                return STATUS_STEP_UNDERFLOW

    steps[0] = nsteps
    return STATUS_OK


cdef int _steady_state16(double hfs, double dpu, double dpr, double om_pr,
                         double om_pu, double g3, double g4,
                         double *rho16) noexcept nogil:
    """Stationary state via a dense solve of the real-vectorized generator."""
    cdef double m[16][16]
    cdef double af[256]
    cdef double b[16]
    cdef double unit[16]
    cdef double col[16]
    cdef int ipiv[16]
    cdef int i, j, n = 16, nrhs = 1, info = 0
    cdef double resid, row_acc, scale

    if om_pr == 0.0 and om_pu == 0.0:
        for i in range(16):
            rho16[i] = 0.0
        rho16[0] = 0.5
        rho16[1] = 0.5
        return STATUS_OK

    for j in range(16):
        for i in range(16):
            unit[i] = 0.0
        unit[j] = 1.0
        _rhs_scalars(dpr, dpu, om_pr, om_pu, g3, g4, hfs, unit, col)
        for i in range(16):
            m[i][j] = col[i]

    # trace row replaces the rho11 equation; column-major for LAPACK
    scale = 0.0
    for j in range(16):
        for i in range(16):
            if fabs(m[i][j]) > scale:
                scale = fabs(m[i][j])
            if i == 0:
                af[i + 16 * j] = 1.0 if j < 4 else 0.0
            else:
                af[i + 16 * j] = m[i][j]
        b[j] = 0.0
    b[0] = 1.0

    dgesv(&n, &nrhs, af, &n, ipiv, b, &n, &info)
    if info != 0:
        return STATUS_SINGULAR

    resid = 0.0
    for i in range(16):
        row_acc = 0.0
        for j in range(16):
            row_acc += m[i][j] * b[j]
        if fabs(row_acc) > resid:
            resid = fabs(row_acc)
    if resid > 1e-6 * fmax(scale, 1.0):
        return STATUS_SINGULAR

    for i in range(16):
        rho16[i] = b[i]
    return STATUS_OK


cdef int _quasistatic(const double *pack, double vx, double vz,
                      const double *gl_nodes, const double *gl_weights, int gl_n,
                      double *out) noexcept nogil:
    cdef double zeta_max = pack[P_ZETA_MAX]
    cdef int panels = <int> pack[P_QS_PANELS]
    cdef bint weighted = pack[P_WEIGHTING] != 0.0
    cdef bint pump_evanescent = pack[P_GEOMETRY] != 0.0
    cdef double kappa_ratio = pack[P_KAPPA_PU] / pack[P_KAPPA_PR]
    cdef double dpr, dpu, width, lo, zeta, om_pr, om_pu, factor
    cdef double rho16[16]
    cdef int panel, g, status

    dpr = pack[P_DPR0] - pack[P_KPR_PAR] * vx
    if pump_evanescent:
        dpu = pack[P_DPU0] - pack[P_KPU_DOPPLER] * vx
    else:
        dpu = pack[P_DPU0] + pack[P_KPU_DOPPLER] * vz

    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    out[3] = 0.0
    width = zeta_max / panels
    for panel in range(panels):
        lo = panel * width
        for g in range(gl_n):
            zeta = lo + 0.5 * width * (gl_nodes[g] + 1.0)
            om_pr = pack[P_OMPR] * exp(-zeta)
            om_pu = pack[P_OMPU] * (exp(-kappa_ratio * zeta) if pump_evanescent else 1.0)
            status = _steady_state16(pack[P_HFS], dpu, dpr, om_pr, om_pu,
                                     pack[P_G3], pack[P_G4], rho16)
            if status != STATUS_OK:
                return status
            factor = 0.5 * width * gl_weights[g] * (exp(-zeta) if weighted else 1.0)
            out[0] += factor * rho16[8]
            out[1] += factor * rho16[9]
            out[2] += factor * rho16[12]
            out[3] += factor * rho16[13]
    return STATUS_OK


cdef int _trajectory_node(const double *pack, double vx, double vz,
                          const double *gl_nodes, const double *gl_weights, int gl_n,
                          double *out, double *trace_err, long *steps) noexcept nogil:
    cdef TrajParams tp
    cdef double y[20]
    cdef int i, status

    trace_err[0] = 0.0
    steps[0] = 0
    if fabs(vz) <= pack[P_VZ_EPS]:
        return _quasistatic(pack, vx, vz, gl_nodes, gl_weights, gl_n, out)

    tp.om_pr0 = pack[P_OMPR]
    tp.om_pu0 = pack[P_OMPU]
    tp.g3 = pack[P_G3]
    tp.g4 = pack[P_G4]
    tp.hfs = pack[P_HFS]
    tp.kappa_ratio = pack[P_KAPPA_PU] / pack[P_KAPPA_PR]
    tp.pump_evanescent = pack[P_GEOMETRY] != 0.0
    tp.weighted = pack[P_WEIGHTING] != 0.0
    tp.time_scale = 1.0 / (pack[P_KAPPA_PR] * fabs(vz))
    tp.zeta_max = pack[P_ZETA_MAX]
    tp.rtol = pack[P_RTOL]
    tp.atol = pack[P_ATOL]
    tp.dpr = pack[P_DPR0] - pack[P_KPR_PAR] * vx
    if tp.pump_evanescent:
        tp.dpu = pack[P_DPU0] - pack[P_KPU_DOPPLER] * vx
    else:
        tp.dpu = pack[P_DPU0] + pack[P_KPU_DOPPLER] * vz

    for i in range(NSTATE):
        y[i] = 0.0
    if vz > 0.0:
        tp.zeta0 = 0.0
        tp.zdir = 1.0
        y[0] = 0.5
        y[1] = 0.5
    else:
        tp.zeta0 = tp.zeta_max
        tp.zdir = -1.0
        # bulk state: plane-wave pump keeps the far field on forever and
        # empties |2>; an evanescent (or absent, or thermal-flagged) pump
        # leaves arriving atoms thermal.
        if pack[P_BC] == 0.0 and not tp.pump_evanescent and tp.om_pu0 > 0.0:
            y[0] = 1.0
        else:
            y[0] = 0.5
            y[1] = 0.5

    status = _integrate(&tp, y, trace_err, steps)
    if status != STATUS_OK:
        return status
    out[0] = y[16]
    out[1] = y[17]
    out[2] = y[18]
    out[3] = y[19]
    return STATUS_OK


def _gl_rule(pack):
    order = int(pack[P_QS_ORDER])
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return np.ascontiguousarray(nodes), np.ascontiguousarray(weights)


def trajectory(double vx, double vz, pack):
    """Integrated (kappa-scaled) rho14/rho24 for one velocity class."""
    from .errors import SingularSystem, StepSizeUnderflow

    cdef double[::1] pk = np.ascontiguousarray(pack, dtype=np.float64)
    gl_nodes, gl_weights = _gl_rule(pack)
    cdef double[::1] gn = gl_nodes
    cdef double[::1] gw = gl_weights
    cdef double out[4]
    cdef double trace_err = 0.0
    cdef long steps = 0
    cdef int status
    with nogil:
        status = _trajectory_node(&pk[0], vx, vz, &gn[0], &gw[0], gn.shape[0],
                                  out, &trace_err, &steps)
    if status == STATUS_STEP_UNDERFLOW:
        raise StepSizeUnderflow(f"trajectory at vx={vx:.4g}, vz={vz:.4g}")
    if status == STATUS_SINGULAR:
        raise SingularSystem(f"steady-state solve failed at vx={vx:.4g}, vz={vz:.4g}")
    return complex(out[0], out[1]), complex(out[2], out[3]), trace_err, int(steps)


def grid_integrals(vxs, vzs, pack, int threads=1):
    """Trajectory integrals for every velocity node, in node order.

    One output slot per node and a static schedule keep the result
    independent of the thread count.
    """
    from .errors import SingularSystem, StepSizeUnderflow

    cdef double[::1] vx = np.ascontiguousarray(vxs, dtype=np.float64)
    cdef double[::1] vz = np.ascontiguousarray(vzs, dtype=np.float64)
    cdef double[::1] pk = np.ascontiguousarray(pack, dtype=np.float64)
    gl_nodes, gl_weights = _gl_rule(pack)
    cdef double[::1] gn = gl_nodes
    cdef double[::1] gw = gl_weights
    cdef Py_ssize_t n = vx.shape[0]
    cdef Py_ssize_t i
    out_arr = np.zeros((n, 4), dtype=np.float64)
    status_arr = np.zeros(n, dtype=np.intc)
    trace_arr = np.zeros(n, dtype=np.float64)
    steps_arr = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef int[::1] status = status_arr
    cdef double[::1] trace = trace_arr
    cdef long[::1] steps = steps_arr
    cdef int nthreads = threads if threads > 0 else 1
    cdef int gl_n = <int> gn.shape[0]

    if nthreads == 1:
        with nogil:
            for i in range(n):
                status[i] = _trajectory_node(&pk[0], vx[i], vz[i], &gn[0], &gw[0],
                                             gl_n, &out[i, 0], &trace[i], &steps[i])
    else:
        for i in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
            status[i] = _trajectory_node(&pk[0], vx[i], vz[i], &gn[0], &gw[0],
                                         gl_n, &out[i, 0], &trace[i], &steps[i])

    bad = np.flatnonzero(status_arr)
    if bad.size:
        i = bad[0]
        if status_arr[i] == STATUS_STEP_UNDERFLOW:
            raise StepSizeUnderflow(
                f"trajectory at vx={vx[i]:.4g}, vz={vz[i]:.4g} (node {i})")
        raise SingularSystem(
            f"steady-state solve failed at vx={vx[i]:.4g}, vz={vz[i]:.4g} (node {i})")

    integrals = out_arr[:, 0] + 1j * out_arr[:, 1], out_arr[:, 2] + 1j * out_arr[:, 3]
    result = np.stack(integrals, axis=1)
    return result, float(trace_arr.max(initial=0.0)), int(steps_arr.sum())
