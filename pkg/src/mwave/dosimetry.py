"""Specific absorption rate maps and differential-SAR frequency selection."""

import math
from dataclasses import dataclass

import numpy as np

from mwave.errors import InvariantViolation
from mwave.fdtd import RampedSine, run
from mwave.phantom import REGIONS, build_phantom, rasterize


@dataclass(frozen=True)
class SarMap:
    """SAR in W/kg on the simulation grid (``values[i, j]`` at node ``(i, j)``)."""

    values: np.ndarray
    grid: object
    freq: float


def sar_map(e_rms, sigma, rho, grid=None, freq=float("nan")):
    """Pointwise ``sigma * e_rms**2 / rho``."""
    e_rms = np.asarray(e_rms, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise InvariantViolation("mass density must be positive everywhere")
    return SarMap(sigma * e_rms**2 / rho, grid, freq)


def density_grid(phantom, raster):
    lut = np.array([phantom.materials[r].rho for r in REGIONS])
    return lut[raster.labels]


def steady_state_rms(raster, grid, sources, freq, ramp_periods=5.0, measure_periods=3.0):
    """RMS of Ez over ``measure_periods`` full periods following the ramp."""
    ramp_steps = int(math.ceil(ramp_periods / (freq * grid.dt)))
    measure_steps = int(round(measure_periods / (freq * grid.dt)))
    acc = np.zeros(grid.shape)

    def accumulate(step_index, ez):
        if step_index > ramp_steps:
            acc[...] += ez * ez

    run(raster, grid, sources, [sources[0][0]], ramp_steps + measure_steps,
        snapshot_every=1, snapshot=accumulate)
    return np.sqrt(acc / measure_steps)


@dataclass(frozen=True)
class FrequencyResult:
    freq: float
    diff_sar: float
    sar_with: SarMap
    sar_without: SarMap


def frequency_scan(freqs, scenario, amplitude=1.0, ramp_periods=5.0, measure_periods=3.0):
    """Narrowband SAR on the tumor and tumor-free phantoms at each frequency.

    Every array element is driven in phase with a ramped sinusoid.
    """
    freqs = [float(f) for f in freqs]
    if not freqs:
        raise InvariantViolation("need at least one frequency")
    grid = scenario.grid()
    nodes = scenario.array().snapped(grid)[1]
    scenes = []
    for spec in (scenario.phantom_spec, scenario.phantom_spec.without_tumor()):
        ph = build_phantom(spec, scenario.catalog)
        raster = rasterize(ph, grid)
        scenes.append((raster, density_grid(ph, raster)))
    max_eps = max(float(np.max(r.eps_r)) for r, _ in scenes)
    for f in freqs:
        grid.check_resolution(f, max_eps)

    out = []
    for f in freqs:
        wave = RampedSine(f, amplitude, ramp_periods)
        sources = [(n, wave) for n in nodes]
        maps = []
        for raster, rho in scenes:
            e_rms = steady_state_rms(raster, grid, sources, f, ramp_periods, measure_periods)
            maps.append(sar_map(e_rms, raster.sigma, rho, grid, f))
        d = float(np.max(np.abs(maps[0].values - maps[1].values)))
        out.append(FrequencyResult(f, d, maps[0], maps[1]))
    return out


def select_frequency(results):
    """Frequency with the largest SAR differential; ties go to the lowest."""
    best = max(results, key=lambda r: (r.diff_sar, -r.freq))
    return best.freq


def best_frequency(freqs, scenario, **kwargs):
    return select_frequency(frequency_scan(freqs, scenario, **kwargs))
