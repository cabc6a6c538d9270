"""Thermal averaging of trajectory coherences into a susceptibility.

The response versus velocity is far from Gaussian-smooth, so plain
node-based Gaussian quadrature cannot average it:

* versus v_x, departing atoms carry probe coherence out of the evanescent
  zone where it decays only at the natural rate, leaving a spike of HWHM
  ~ gamma4 / (2 k) on top of the transit-broadened pedestal;
* versus v_z, the per-atom response keeps growing as transit slows, peaking
  near gamma4 / (2 kappa) before probe-induced redistribution caps it.

Both axes therefore use the explicit Gaussian measure on refined grids:

* v_z: composite Gauss-Legendre panels, geometric toward v_z = 0, with a
  dedicated slow band and the |v_z| <= eps panel handled by the kernel's
  quasi-static branch;
* v_x, perpendicular pump (and pump off): v_x enters the trajectory only
  через the shifted probe detuning, so the per-row response is tabulated
  once on an adaptive detuning grid (natural-width refinement at the lines)
  and integrated against the Gaussian exactly - piecewise-linear response
  times Gaussian has a closed form. One table serves a whole sweep.
* v_x, co-propagating pump: the pump shift breaks that reuse, so the
  pump-on curve is assembled as the exact pump-off curve plus a pump
  difference integrated on panels restricted to the velocity classes the
  pump actually addresses; evaluating on and off on identical nodes cancels
  most of the quadrature error in the difference.

``order_x``/``order_z`` stay the resolution knobs: order_z scales the row
rule, order_x the v_x grids, so doubling the orders refines everything.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from . import bloch, optics
from .errors import NonConvergedQuadrature
from .kernel import get_backend
from .params import DriveParams, NumericsParams, PrismGeometry, PumpGeometry, VaporParams
from .velocity import VelocityGrid


@dataclass(frozen=True)
class SusceptibilityPoint:
    detuning_pump: float   # rad/s
    detuning_probe: float  # rad/s
    chi: complex


@dataclass
class GridDiagnostics:
    max_trace_error: float = 0.0
    total_steps: int = 0
    trajectories: int = 0

    def absorb(self, trace_error: float, steps: int, count: int) -> None:
        self.max_trace_error = max(self.max_trace_error, trace_error)
        self.total_steps += steps
        self.trajectories += count


def _uses_shift_structure(drive: DriveParams) -> bool:
    """v_x enters only via the probe detuning shift?"""
    return (drive.rabi_pump == 0.0
            or drive.pump_geometry is PumpGeometry.PERPENDICULAR_PLANE_WAVE)


# v_z rule structure (units of v_T): below SLOW_CUT the response varies on the
# transit-saturation scale gamma4 / (2 kappa v_T) ~ 0.05 and trajectories get
# expensive, so that band has its own panels.
_SLOW_CUT = 0.1
_VZ_SPAN = 6.0
_VZ_RATIO = 1.8


def _gl_panel(a: float, b: float, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def _vz_rule(vapor: VaporParams, numerics: NumericsParams, fast_only: bool = False):
    """Rows over v_z with Gaussian-measure weights, mirrored about zero.

    Panels per half-axis: [0, eps] (quasi-static regime), [eps, slow cut],
    then geometric panels out to 6 v_T. ``fast_only`` drops |v_z| below the
    slow cut (used for pump differences, where dwelling atoms are already
    redistributed by the probe and the pump adds almost nothing).
    """
    v_t = optics.thermal_velocity(vapor)
    eps = numerics.small_vz_epsilon
    order_z = numerics.order_z

    edges = [_VZ_SPAN]
    while edges[-1] / _VZ_RATIO > _SLOW_CUT:
        edges.append(edges[-1] / _VZ_RATIO)
    edges.append(_SLOW_CUT)
    panels = [(edges[i + 1], edges[i], max(2, order_z // (16 if fast_only else 8)))
              for i in range(len(edges) - 1)]
    if not fast_only:
        panels = [(0.0, eps, max(1, order_z // 16)),
                  (eps, _SLOW_CUT, max(2, order_z // 10))] + panels

    nodes, weights = [], []
    for a, b, order in panels:
        x, w = _gl_panel(a * v_t, b * v_t, order)
        nodes.append(x)
        weights.append(w)
    half_nodes = np.concatenate(nodes)
    gauss = np.exp(-0.5 * (half_nodes / v_t) ** 2) / (math.sqrt(2.0 * math.pi) * v_t)
    half_weights = np.concatenate(weights) * gauss
    vz = np.concatenate([-half_nodes[::-1], half_nodes])
    wz = np.concatenate([half_weights[::-1], half_weights])
    return v_t, vz, wz


def _cluster_offsets(core_step: float, span: float) -> np.ndarray:
    """Symmetric refinement offsets: linear core, then geometric growth."""
    core = core_step * np.arange(5)
    tail = []
    radius = 4.0 * core_step
    while radius < span:
        radius *= math.sqrt(2.0)
        tail.append(radius)
    offsets = np.concatenate([core, np.array(tail)]) if tail else core
    return np.unique(np.concatenate([-offsets[::-1], offsets]))


def _detuning_table_grid(lo: float, hi: float, sigma: float, centers, gamma4: float,
                         order_x: int) -> np.ndarray:
    """Adaptive shifted-detuning grid: uniform base plus line refinements."""
    span_lo = lo - 6.0 * sigma
    span_hi = hi + 6.0 * sigma
    base_step = 5.0 * sigma / order_x
    base = np.arange(span_lo, span_hi + base_step, base_step)
    parts = [base]
    core = 2.0 * gamma4 / order_x  # gamma4/16 at order 32
    for center in centers:
        cluster = center + _cluster_offsets(core, 3.0 * base_step)
        parts.append(cluster[(cluster > span_lo) & (cluster < span_hi)])
    grid = np.unique(np.concatenate(parts))
    # drop nearly-coincident points so interpolation cells stay well formed
    keep = np.concatenate([[True], np.diff(grid) > 0.25 * core])
    return grid[keep]


def _gaussian_segments(chi_grid: np.ndarray, table: np.ndarray, mu: float,
                       sigma: float) -> complex:
    """Integral of a piecewise-linear table against N(mu, sigma), exactly."""
    t = (chi_grid - mu) / sigma
    cdf = ndtr(t)
    pdf = np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    x0, x1 = chi_grid[:-1], chi_grid[1:]
    h0, h1 = table[:-1], table[1:]
    slope = (h1 - h0) / (x1 - x0)
    dcdf = cdf[1:] - cdf[:-1]
    x_mean = mu * dcdf - sigma * (pdf[1:] - pdf[:-1])
    return complex(np.sum((h0 - slope * x0) * dcdf) + np.sum(slope * x_mean))


def _tabulated_chi_sums(drive, vapor, geom, numerics, detunings, kern, threads,
                        diagnostics):
    """Shift-structure path: one response table per v_z row, then exact
    Gaussian convolution for every requested probe detuning."""
    v_t, vz_nodes, vz_weights = _vz_rule(vapor, numerics)
    k_par = optics.in_plane_wavevector_probe(geom)
    sigma = k_par * v_t
    lo = float(np.min(detunings))
    hi = float(np.max(detunings))
    centers = [0.0, -vapor.hfs_splitting]
    if drive.rabi_pump > 0.0:
        # Raman features sit near the pump detuning seen by each row; one
        # cluster at the unshifted value covers the row spread
        centers.append(drive.detuning_pump)
    grid = _detuning_table_grid(lo, hi, sigma, centers, vapor.gamma4, numerics.order_x)

    # node (row, j) runs the trajectory at shifted probe detuning grid[j]
    ref = replace(drive, detuning_probe=0.0)
    pack = bloch.pack_problem(ref, vapor, geom, numerics)
    n_pts = grid.size
    vx_flat = np.tile(-grid / k_par, vz_nodes.size)
    vz_flat = np.repeat(vz_nodes, n_pts)
    integrals, max_trace, steps = kern.grid_integrals(vx_flat, vz_flat, pack, threads)
    if diagnostics is not None:
        diagnostics.absorb(max_trace, steps, vx_flat.size)
    tables = (integrals[:, 0] + integrals[:, 1]).reshape(vz_nodes.size, n_pts)

    out = np.empty(len(detunings), dtype=complex)
    for i, det in enumerate(detunings):
        acc = 0.0 + 0.0j
        for row in range(vz_nodes.size):
            acc += vz_weights[row] * _gaussian_segments(grid, tables[row], det, sigma)
        out[i] = acc
    return out


def _vx_panel_rule(vapor, geom, numerics, centers_vx, lo, hi, base_step, gl_order):
    """Gauss-Legendre panels over [lo, hi] in v_x with cluster refinement,
    weighted by the explicit Gaussian measure."""
    v_t = optics.thermal_velocity(vapor)
    k_pr = optics.in_plane_wavevector_probe(geom)
    core = (2.0 * vapor.gamma4 / numerics.order_x) / k_pr
    edges = [np.arange(lo, hi + base_step, base_step)]
    for center in centers_vx:
        if lo < center < hi:
            cluster = center + _cluster_offsets(core, 2.0 * base_step)
            edges.append(cluster[(cluster > lo) & (cluster < hi)])
    breaks = np.unique(np.concatenate(edges))
    keep = np.concatenate([[True], np.diff(breaks) > 0.25 * core])
    breaks = breaks[keep]
    gl_x, gl_w = np.polynomial.legendre.leggauss(gl_order)
    a, b = breaks[:-1], breaks[1:]
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    nodes = (mid + half * gl_x[None, :]).ravel()
    gauss = np.exp(-0.5 * (nodes / v_t) ** 2) / (math.sqrt(2.0 * math.pi) * v_t)
    weights = (half * gl_w[None, :]).ravel() * gauss
    return nodes, weights


def _batched_rows_sum(pack, vz_nodes, vz_weights, vx_nodes, vx_weights, kern,
                      threads, diagnostics):
    n_pts = vx_nodes.size
    vx_flat = np.tile(vx_nodes, vz_nodes.size)
    vz_flat = np.repeat(vz_nodes, n_pts)
    integrals, max_trace, steps = kern.grid_integrals(vx_flat, vz_flat, pack, threads)
    if diagnostics is not None:
        diagnostics.absorb(max_trace, steps, vx_flat.size)
    response = (integrals[:, 0] + integrals[:, 1]).reshape(vz_nodes.size, n_pts)
    return complex(np.sum(vz_weights * (response @ vx_weights)))


def _composite_chi_sum(drive, vapor, geom, numerics, kern, threads, diagnostics):
    """Generic single-point path: full-span refined panels over v_x."""
    v_t, vz_nodes, vz_weights = _vz_rule(vapor, numerics)
    k_pr = optics.in_plane_wavevector_probe(geom)
    centers = [drive.detuning_probe / k_pr,
               (drive.detuning_probe + vapor.hfs_splitting) / k_pr]
    if (drive.rabi_pump > 0.0
            and drive.pump_geometry is PumpGeometry.COPROPAGATING_EVANESCENT):
        centers.append(drive.detuning_pump / optics.in_plane_wavevector_pump(geom))
    base_step = 16.0 * v_t / numerics.order_x
    gl_order = max(2, numerics.order_x // 8)
    vx_nodes, vx_weights = _vx_panel_rule(vapor, geom, numerics, centers,
                                          -_VZ_SPAN * v_t, _VZ_SPAN * v_t,
                                          base_step, gl_order)
    pack = bloch.pack_problem(drive, vapor, geom, numerics)
    return _batched_rows_sum(pack, vz_nodes, vz_weights, vx_nodes, vx_weights,
                             kern, threads, diagnostics)


def _pump_difference_sum(drive, vapor, geom, numerics, kern, threads, diagnostics):
    """Pump-on minus pump-off response for one probe detuning.

    Restricted to the velocity classes the pump addresses: |v_z| above the
    slow cut (dwelling atoms are already probe-redistributed) and v_x within
    a window around the pump-resonant class. On and off runs share the same
    nodes, so quadrature errors largely cancel in the difference.
    """
    v_t, vz_nodes, vz_weights = _vz_rule(vapor, numerics, fast_only=True)
    k_pr = optics.in_plane_wavevector_probe(geom)
    k_pu = optics.in_plane_wavevector_pump(geom)
    vx_star = drive.detuning_pump / k_pu
    # transit selectivity spans ~ (kappa_pu/k_pu) |v_z| ~ 0.26 |v_z|
    half_width = (0.35 * _VZ_SPAN + 0.5) * v_t
    centers = [vx_star,
               drive.detuning_probe / k_pr,
               (drive.detuning_probe + vapor.hfs_splitting) / k_pr]
    base_step = 8.0 * v_t / numerics.order_x
    gl_order = max(2, numerics.order_x // 16)
    vx_nodes, vx_weights = _vx_panel_rule(vapor, geom, numerics, centers,
                                          vx_star - half_width, vx_star + half_width,
                                          base_step, gl_order)
    pack_on = bloch.pack_problem(drive, vapor, geom, numerics)
    pack_off = bloch.pack_problem(drive.pump_off(), vapor, geom, numerics)
    on = _batched_rows_sum(pack_on, vz_nodes, vz_weights, vx_nodes, vx_weights,
                           kern, threads, diagnostics)
    off = _batched_rows_sum(pack_off, vz_nodes, vz_weights, vx_nodes, vx_weights,
                            kern, threads, diagnostics)
    return on - off


def chi_curve(drive: DriveParams, vapor: VaporParams, geom: PrismGeometry,
              numerics: NumericsParams, detunings, backend: str = "auto",
              threads: int = 1,
              diagnostics: GridDiagnostics | None = None) -> np.ndarray:
    """Susceptibility at each probe detuning (other drive settings fixed)."""
    kern = get_backend(backend)
    detunings = np.asarray(detunings, dtype=float)
    if _uses_shift_structure(drive):
        sums = _tabulated_chi_sums(drive, vapor, geom, numerics, detunings, kern,
                                   threads, diagnostics)
    else:
        sums = _tabulated_chi_sums(drive.pump_off(), vapor, geom, numerics,
                                   detunings, kern, threads, diagnostics)
        for i, det in enumerate(detunings):
            sums[i] += _pump_difference_sum(
                replace(drive, detuning_probe=float(det)), vapor, geom, numerics,
                kern, threads, diagnostics)
    # conjugation maps the internal rotating frame onto the exp(-i w t)
    # optics convention where absorption means Im(chi) >= 0
    return vapor.chi_amplitude * np.conj(sums)


def susceptibility(drive: DriveParams, vapor: VaporParams, geom: PrismGeometry,
                   grid: VelocityGrid, numerics: NumericsParams,
                   backend: str = "auto", threads: int = 1,
                   diagnostics: GridDiagnostics | None = None) -> SusceptibilityPoint:
    """Complex susceptibility at one (pump, probe) detuning pair.

    The grid fixes the averaging resolution (its orders override the ones in
    ``numerics``). With ``numerics.quadrature_check`` enabled the value is
    recomputed at doubled orders and NonConvergedQuadrature is raised if the
    relative change exceeds ``numerics.quadrature_check_tol``.
    """
    kern = get_backend(backend)
    num = replace(numerics, order_x=grid.order_x, order_z=grid.order_z)

    def evaluate(n):
        if _uses_shift_structure(drive):
            sum_ = _composite_chi_sum(drive, vapor, geom, n, kern, threads,
                                      diagnostics)
        else:
            sum_ = (_composite_chi_sum(drive.pump_off(), vapor, geom, n, kern,
                                       threads, diagnostics)
                    + _pump_difference_sum(drive, vapor, geom, n, kern, threads,
                                           diagnostics))
        return vapor.chi_amplitude * complex(np.conj(sum_))

    chi = evaluate(num)
    if numerics.quadrature_check:
        fine = replace(num, order_x=2 * num.order_x, order_z=2 * num.order_z)
        chi_fine = evaluate(fine)
        scale = max(abs(chi_fine), 1e-300)
        rel = abs(chi - chi_fine) / scale
        if rel > numerics.quadrature_check_tol:
            raise NonConvergedQuadrature(
                f"chi changed by {rel:.3e} (> {numerics.quadrature_check_tol:.1e}) "
                f"when doubling orders {num.order_x}x{num.order_z}")
    return SusceptibilityPoint(
        detuning_pump=drive.detuning_pump,
        detuning_probe=drive.detuning_probe,
        chi=chi,
    )


def doppler_fwhm_estimate(vapor: VaporParams, geom: PrismGeometry) -> float:
    """Gaussian FWHM of the Doppler kernel along the probe, rad/s."""
    k_par = optics.in_plane_wavevector_probe(geom)
    return math.sqrt(8.0 * math.log(2.0)) * k_par * optics.thermal_velocity(vapor)
