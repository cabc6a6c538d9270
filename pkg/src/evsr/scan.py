"""Sweep engine: reflectivity spectra and dip metrics."""

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import optics
from .errors import NoDipFound, SweepAborted
from .params import ExperimentConfig, PumpGeometry
from .suscept import GridDiagnostics, _uses_shift_structure, chi_curve


@dataclass(frozen=True)
class SpectrumRecord:
    detuning_probe: float  # rad/s
    r_pump_off: float
    r_pump_on: float
    chi_off: complex
    chi_on: complex


@dataclass(frozen=True)
class DipMetrics:
    line_center: float        # rad/s
    depth_off: float
    depth_on: float
    suppression_ratio: float
    fwhm_off: float           # rad/s


def probe_detuning_grid(config: ExperimentConfig) -> np.ndarray:
    return np.linspace(config.sweep.detuning_min, config.sweep.detuning_max,
                       config.sweep.points)


def pumped_line_window(config: ExperimentConfig) -> tuple[float, float]:
    """Detuning window around the line probed from the pumped ground state.

    In this frame the pumped line sits at zero detuning and the other line
    at minus the hyperfine splitting; the midpoint separates them.
    """
    mid = -0.5 * config.vapor.hfs_splitting
    return (mid, config.sweep.detuning_max)


def unpumped_line_window(config: ExperimentConfig) -> tuple[float, float]:
    mid = -0.5 * config.vapor.hfs_splitting
    return (config.sweep.detuning_min, mid)


def _reflectivity(config: ExperimentConfig, chi: complex) -> float:
    n2 = optics.refractive_index_from_chi(chi)
    return optics.fresnel_reflectivity(config.prism, n2)


def sweep_spectrum(config: ExperimentConfig, probe_detunings: Sequence[float] | None = None,
                   pump: str = "both", threads: int = 1, backend: str = "auto",
                   diagnostics: GridDiagnostics | None = None) -> list[SpectrumRecord]:
    """Pump-off and pump-on reflectivity across the probe detuning grid.

    ``pump`` restricts the computation ("off", "on" or "both"); skipped
    columns are NaN. A failure at any detuning aborts the whole sweep with
    the offending detuning identified.
    """
    if probe_detunings is None:
        probe_detunings = probe_detuning_grid(config)
    detunings = np.asarray(probe_detunings, dtype=float)
    if detunings.size < 2:
        raise ValueError("need at least 2 probe detunings")
    if not np.all(np.diff(detunings) > 0.0):
        raise ValueError("probe detunings must be strictly increasing")
    if pump not in ("off", "on", "both"):
        raise ValueError(f"pump must be off, on or both, got {pump!r}")

    def curve(drive):
        if _uses_shift_structure(drive):
            # batch path: a kernel failure aborts the whole curve; the
            # message carries the offending velocity node
            try:
                return chi_curve(drive, config.vapor, config.prism, config.numerics,
                                 detunings, backend, threads, diagnostics)
            except Exception as exc:
                raise SweepAborted(float(detunings[0]), str(exc)) from exc
        out = np.empty(detunings.size, dtype=complex)
        for i, det in enumerate(detunings):
            try:
                out[i] = chi_curve(drive, config.vapor, config.prism, config.numerics,
                                   [float(det)], backend, threads, diagnostics)[0]
            except Exception as exc:
                raise SweepAborted(float(det), str(exc)) from exc
        return out

    nan_curve = np.full(detunings.size, complex(math.nan, math.nan))
    chi_off = chi_on = nan_curve
    if pump in ("off", "both"):
        chi_off = curve(config.drive.pump_off())
    if pump in ("on", "both"):
        chi_on = curve(config.drive)

    records = []
    for i, det in enumerate(detunings):
        r_off = _reflectivity(config, chi_off[i]) if pump in ("off", "both") else math.nan
        r_on = _reflectivity(config, chi_on[i]) if pump in ("on", "both") else math.nan
        records.append(SpectrumRecord(
            detuning_probe=float(det),
            r_pump_off=r_off, r_pump_on=r_on,
            chi_off=complex(chi_off[i]), chi_on=complex(chi_on[i]),
        ))
    return records


def pump_power_series(config: ExperimentConfig,
                      rabi_pump_values: Sequence[float] | None = None,
                      threads: int = 1, backend: str = "auto",
                      diagnostics: GridDiagnostics | None = None
                      ) -> list[tuple[float, list[SpectrumRecord]]]:
    """One sweep per pump Rabi frequency; the probe drive is held fixed.

    ``rabi_pump_values`` are absolute (rad/s), sorted descending; the default
    ladder comes from ``config.sweep.pump_power_series`` in gamma3 units.
    The shared pump-off curve is computed once.
    """
    if rabi_pump_values is None:
        rabi_pump_values = [x * config.vapor.gamma3 for x in config.sweep.pump_power_series]
    values = [float(v) for v in rabi_pump_values]
    if any(v < 0.0 for v in values):
        raise ValueError("pump Rabi values must be >= 0")
    if values != sorted(values, reverse=True):
        raise ValueError("pump Rabi values must be sorted descending")

    off_records = sweep_spectrum(config, pump="off", threads=threads, backend=backend,
                                 diagnostics=diagnostics)
    out = []
    for value in values:
        cfg = replace(config, drive=replace(config.drive, rabi_pump=value))
        on_records = sweep_spectrum(cfg, pump="on", threads=threads, backend=backend,
                                    diagnostics=diagnostics)
        merged = [
            replace(on, r_pump_off=off.r_pump_off, chi_off=off.chi_off)
            for off, on in zip(off_records, on_records)
        ]
        out.append((value, merged))
    return out


def copropagating_control(config: ExperimentConfig, threads: int = 1,
                          backend: str = "auto",
                          diagnostics: GridDiagnostics | None = None
                          ) -> list[SpectrumRecord]:
    """Pump-on/off spectra with the evanescent co-propagating pump."""
    if config.drive.pump_geometry is not PumpGeometry.COPROPAGATING_EVANESCENT:
        raise ValueError("copropagating_control requires pump_geometry=copropagating")
    return sweep_spectrum(config, pump="both", threads=threads, backend=backend,
                          diagnostics=diagnostics)


# --- dip metrics ------------------------------------------------------------

def _outer_indices(n: int) -> np.ndarray:
    """Indices of the outer 10% of sweep points (5% per edge, at least 1)."""
    edge = max(1, n // 20)
    return np.concatenate([np.arange(edge), np.arange(n - edge, n)])


def _baseline_and_noise(values: np.ndarray) -> tuple[float, float]:
    outer = values[_outer_indices(values.size)]
    baseline = float(np.median(outer))
    noise = 1.4826 * float(np.median(np.abs(outer - baseline)))
    return baseline, max(noise, 1e-12)


def _fwhm(detunings: np.ndarray, values: np.ndarray, i_min: int, half_level: float) -> float:
    """Full width by linear interpolation of the half-depth crossings."""
    left = None
    for i in range(i_min, 0, -1):
        if values[i - 1] >= half_level:
            frac = (half_level - values[i]) / (values[i - 1] - values[i])
            left = detunings[i] + frac * (detunings[i - 1] - detunings[i])
            break
    right = None
    for i in range(i_min, values.size - 1):
        if values[i + 1] >= half_level:
            frac = (half_level - values[i]) / (values[i + 1] - values[i])
            right = detunings[i] + frac * (detunings[i + 1] - detunings[i])
            break
    if left is None or right is None:
        raise NoDipFound("dip flanks do not reach half depth inside the window")
    return float(right - left)


def dip_metrics(spectrum: Sequence[SpectrumRecord],
                window: tuple[float, float]) -> DipMetrics:
    """Depth, width and pump suppression of the single dip inside ``window``.

    Depths are measured against per-curve baselines taken as the median
    reflectivity over the outer 10% of the full sweep.
    """
    detunings = np.array([r.detuning_probe for r in spectrum])
    r_off = np.array([r.r_pump_off for r in spectrum])
    r_on = np.array([r.r_pump_on for r in spectrum])

    base_off, noise = _baseline_and_noise(r_off)
    lo, hi = window
    sel = np.flatnonzero((detunings >= lo) & (detunings <= hi))
    if sel.size < 3:
        raise NoDipFound(f"window [{lo:.3e}, {hi:.3e}] rad/s contains too few points")

    i_min = int(sel[np.argmin(r_off[sel])])
    depth_off = base_off - float(r_off[i_min])
    if depth_off < 10.0 * noise:
        raise NoDipFound(
            f"no dip above noise floor: depth {depth_off:.3e} < 10 x {noise:.3e}")

    if np.all(np.isnan(r_on)):
        depth_on = math.nan
        ratio = math.nan
    else:
        base_on, _ = _baseline_and_noise(r_on)
        i_min_on = int(sel[np.argmin(r_on[sel])])
        depth_on = max(0.0, base_on - float(r_on[i_min_on]))
        ratio = depth_on / depth_off

    half_level = base_off - 0.5 * depth_off
    fwhm = _fwhm(detunings, r_off, i_min, half_level)
    return DipMetrics(
        line_center=float(detunings[i_min]),
        depth_off=depth_off,
        depth_on=depth_on,
        suppression_ratio=ratio,
        fwhm_off=fwhm,
    )
