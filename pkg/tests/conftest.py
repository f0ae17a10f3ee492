import time
from contextlib import contextmanager

import numpy as np
import pytest

from mwave.constants import C0
from mwave.fdtd import PulseSpec, pulse_value
from mwave.phantom import ArrayGeometry, PhantomSpec
from mwave.radar import RadarDataset
from mwave.scenario import Scenario

_CACHE = {}
ACCEPTANCE = []


@contextmanager
def criterion(number, title):
    """Record one acceptance criterion; the body fills ``detail`` and asserts."""
    detail = {}
    start = time.perf_counter()
    try:
        yield detail
    except BaseException:
        ACCEPTANCE.append((number, title, False, detail, time.perf_counter() - start))
        raise
    ACCEPTANCE.append((number, title, True, detail, time.perf_counter() - start))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail, secs in sorted(ACCEPTANCE, key=lambda r: r[0]):
        info = ", ".join(f"{k}={v}" for k, v in detail.items())
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title} ({info}; {secs:.1f} s)")


def reference_scenario():
    return Scenario()


@pytest.fixture(scope="session")
def reference_pair():
    """(with_tumor, calibration) acquisitions of the reference scene."""
    if "pair" not in _CACHE:
        start = time.perf_counter()
        _CACHE["pair"] = reference_scenario().acquire_pair()
        _CACHE["pair_seconds"] = time.perf_counter() - start
    return _CACHE["pair"]


@pytest.fixture(scope="session")
def reference_imaging(reference_pair):
    """(response, image, detection) for the reference scene."""
    if "imaging" not in _CACHE:
        start = time.perf_counter()
        _CACHE["imaging"] = reference_scenario().image(*reference_pair)
        _CACHE["imaging_seconds"] = time.perf_counter() - start
    return _CACHE["imaging"]


def small_scenario(**kw):
    spec = PhantomSpec(breast_radius=0.02, tumor_diameter=0.006, tumor_depth=0.006)
    base = dict(phantom_spec=spec, pulse=PulseSpec(fwhm=400e-12), dx=1e-3, n_elements=4,
                arc_span=np.radians(120), pml_cells=8, margin=0.003)
    base.update(kw)
    return Scenario(**base)


def synthetic_dataset(positions, targets, v=1e8, dt=2e-12, n_t=1500, fwhm=200e-12, kind="tumor_response",
                      amplitudes=None):
    """Ideal point-scatterer echoes: a Gaussian per target at the focusing delay."""
    array = ArrayGeometry(np.asarray(positions, dtype=float))
    p = PulseSpec(fwhm=fwhm)
    t = dt * (np.arange(n_t) + 1)
    pos = array.positions
    amplitudes = np.ones(len(targets)) if amplitudes is None else amplitudes
    traces = np.zeros((len(pos), len(pos), n_t))
    for (x, y), a in zip(targets, amplitudes):
        d = np.hypot(pos[:, 0] - x, pos[:, 1] - y)
        for i in range(len(pos)):
            for j in range(len(pos)):
                traces[i, j] += a * pulse_value(p, t - (d[i] + d[j]) / v)
    return RadarDataset(traces, dt, array, pulse_value(p, t), kind, p.t0, dt, fwhm)


def ring(n, radius, center=(0.0, 0.0)):
    a = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)])


__all__ = ["C0", "criterion", "reference_scenario", "small_scenario", "synthetic_dataset", "ring"]
