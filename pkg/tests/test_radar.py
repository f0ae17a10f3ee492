import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import reference_scenario, ring, small_scenario, synthetic_dataset
from mwave.constants import C0
from mwave.errors import FlatImage, InvariantViolation, MismatchedAcquisition, OutOfRecord
from mwave.fdtd import PulseSpec
from mwave.grid import GridSpec
from mwave.materials import DEFAULT_CATALOG, MaterialProperties
from mwave.phantom import REGIONS, ArrayGeometry, PhantomSpec, build_phantom, rasterize
from mwave.radar import (
    EnergyImage,
    RadarDataset,
    ReconGrid,
    acquire,
    calibrate,
    channel_delays,
    das_image,
    default_threads,
    depth_sweep,
    detect,
    equalization_gain,
    equalize,
    response_energy_db,
)
from oracles import peak_time

V9 = C0 / 3.0


def _pair(seed=0, n=3, n_t=50):
    rng = np.random.default_rng(seed)
    arr = ArrayGeometry(ring(n, 0.05))
    wave = rng.standard_normal(n_t)
    mk = lambda tr, kind: RadarDataset(tr, 1e-12, arr, wave, kind, 1e-11, 1e-12, 2e-10)
    # dyadic values keep sums exact
    a = np.round(rng.standard_normal((n, n, n_t)) * 1024) / 1024
    b = np.round(rng.standard_normal((n, n, n_t)) * 1024) / 1024
    return mk, a, b


# calibration

def test_calibrate_self_is_zero():
    mk, a, _ = _pair()
    r = calibrate(mk(a, "with_tumor"), mk(a.copy(), "calibration"))
    assert r.kind == "tumor_response"
    assert not np.any(r.traces)


def test_calibrate_recovers_added_signal():
    mk, a, b = _pair()
    r = calibrate(mk(a + b, "with_tumor"), mk(a, "calibration"))
    assert np.array_equal(r.traces, b)


def test_calibrate_antisymmetric():
    mk, a, b = _pair(1)
    ab = calibrate(mk(a, "with_tumor"), mk(b, "calibration")).traces
    ba = calibrate(mk(b, "with_tumor"), mk(a, "calibration")).traces
    assert np.array_equal(ab, -ba)


def test_subtracting_zero_is_identity():
    mk, a, _ = _pair(2)
    r = calibrate(mk(a, "with_tumor"), mk(np.zeros_like(a), "calibration"))
    assert np.array_equal(r.traces, a)


def test_calibrate_mismatch():
    mk, a, b = _pair()
    base = mk(a, "with_tumor")
    for other in (replace(mk(b, "calibration"), dt=2e-12),
                  replace(mk(b, "calibration"), tx_waveform=np.zeros(50)),
                  replace(mk(b, "calibration"), array=ArrayGeometry(ring(3, 0.06)))):
        with pytest.raises(MismatchedAcquisition):
            calibrate(base, other)
    short = RadarDataset(b[:, :, :40], 1e-12, base.array, base.tx_waveform[:40], "calibration",
                         1e-11, 1e-12, 2e-10)
    with pytest.raises(MismatchedAcquisition):
        calibrate(base, short)


def test_dataset_invariants():
    arr = ArrayGeometry(ring(3, 0.05))
    with pytest.raises(InvariantViolation):
        RadarDataset(np.zeros((3, 2, 10)), 1e-12, arr, np.zeros(10), "calibration", 0.0, 1e-12, 1e-10)
    with pytest.raises(InvariantViolation):
        RadarDataset(np.zeros((3, 3, 10)), 1e-12, arr, np.zeros(9), "calibration", 0.0, 1e-12, 1e-10)
    with pytest.raises(InvariantViolation):
        RadarDataset(np.zeros((3, 3, 10)), 1e-12, arr, np.zeros(10), "raw", 0.0, 1e-12, 1e-10)


# equalization

def test_equalize_identity_bit_exact():
    mk, a, _ = _pair(3)
    resp = mk(a, "tumor_response")
    out = equalize(resp, DEFAULT_CATALOG["vacuum"], 0.0)
    assert np.array_equal(out.traces, a)


def test_equalize_requires_response():
    mk, a, _ = _pair()
    with pytest.raises(InvariantViolation):
        equalize(mk(a, "with_tumor"), DEFAULT_CATALOG["fat"], 1.0)


def test_equalization_gain_hand_value():
    mm = DEFAULT_CATALOG["matching_medium"]
    dt = 1e-12
    t_path = 0.06 / mm.speed
    arr = ArrayGeometry(ring(2, 0.05))
    n = int(round(t_path / dt)) + 10
    resp = RadarDataset(np.zeros((2, 2, n)), dt, arr, np.zeros(n), "tumor_response", 0.0, dt, 1e-10)
    gain = equalization_gain(resp, mm, 0.0)
    k = np.argmin(np.abs(resp.times() - t_path))
    path = mm.speed * resp.times()[k]
    assert gain[k] == pytest.approx(10 ** (0.8 * path * 100 / 20), rel=1e-12)
    assert 10 ** (0.8 * 6 / 20) == pytest.approx(1.738, abs=1e-3)
    assert gain[k] == pytest.approx(1.738, abs=2e-3)


def test_equalization_gain_before_reference_is_clamped():
    arr = ArrayGeometry(ring(2, 0.05))
    resp = RadarDataset(np.zeros((2, 2, 100)), 1e-12, arr, np.zeros(100), "tumor_response", 5e-11, 1e-12, 1e-10)
    gain = equalization_gain(resp, DEFAULT_CATALOG["fat"], 1.0)
    assert np.all(gain[resp.times() <= 5e-11] == 0.0)
    assert np.all(np.diff(gain) >= 0)


def test_two_target_equalization():
    """Two equal scatterers at d and 2d in a lossless 2D medium: equalized
    monostatic peaks agree within 15%."""
    from mwave import fdtd
    from mwave.grid import MaterialRaster

    p = PulseSpec(fwhm=200e-12)
    dx, d, eps_b = 0.5e-3, 0.02, 9.0
    g = GridSpec.from_courant(int(4 * d / dx) + 80, 81, dx)
    src = (30, 40)
    medium = MaterialProperties("m", eps_b, 0.0, 0.0)
    steps = int((p.t0 + 4 * d / medium.speed + 3 * p.fwhm) / g.dt)
    arr = ArrayGeometry(np.array([[0.0, 0.0], [1.0, 1.0]]))

    def dataset(eps, kind):
        tr = fdtd.run(MaterialRaster(eps, np.zeros(g.shape)), g, [(src, p)], [src], steps)
        return RadarDataset(np.tile(tr.traces[0], (2, 2, 1)), g.dt, arr, tr.tx_waveform, kind,
                            p.t0, g.dt, p.fwhm)

    base = np.full(g.shape, eps_b)
    calib = dataset(base, "calibration")
    X, Y = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")
    peaks = []
    for depth in (d, 2 * d):
        eps = base.copy()
        eps[np.hypot(X - src[0] - round(depth / dx), Y - 40) <= 2] = 46.0
        resp = equalize(calibrate(dataset(eps, "with_tumor"), calib), medium, 1.0)
        peaks.append(np.abs(resp.traces[0, 0]).max())
    assert peaks[1] == pytest.approx(peaks[0], rel=0.15)


# focusing

def test_monostatic_delay():
    arr = ArrayGeometry(np.array([[0.0, 0.0], [0.1, 0.0]]))
    tau = channel_delays(arr, np.array([0.025]), np.array([0.0]), V9)
    assert tau[0, 0, 0] == pytest.approx(0.5e-9, rel=1e-3)
    assert 2 * 0.025 / 1e8 == pytest.approx(0.5e-9)


def test_das_locates_synthetic_point():
    pos = ring(8, 0.05)
    target = (0.004, -0.011)
    resp = synthetic_dataset(pos, [target])
    recon = ReconGrid.over_disk((0.0, 0.0), 0.03, 0.5e-3)
    img = das_image(resp, recon, 1e8)
    assert math.dist(img.peak_location, target) <= 0.5e-3 * math.sqrt(2) / 2 + 1e-12
    det = detect(img)
    assert math.dist(det.centroid, target) < 1e-3


def test_das_coherent_sum_bound():
    pos = ring(6, 0.05)
    resp = synthetic_dataset(pos, [(0.0, 0.0)])
    recon = ReconGrid.over_disk((0.0, 0.0), 0.02, 1e-3)
    img = das_image(resp, recon, 1e8)
    assert img.peak_location == pytest.approx((0.0, 0.0), abs=1e-12)
    for tx in range(6):
        for rx in range(6):
            single = np.zeros_like(resp.traces)
            single[tx, rx] = resp.traces[tx, rx]
            one = das_image(replace(resp, traces=single), recon, 1e8)
            assert img.peak_value >= one.peak_value


def test_das_scaling_and_shift():
    pos = ring(6, 0.05)
    resp = synthetic_dataset(pos, [(0.003, 0.006)])
    recon = ReconGrid.over_disk((0.0, 0.0), 0.02, 1e-3)
    img = das_image(resp, recon, 1e8)
    k = 3.7
    img_k = das_image(resp.scaled(k), recon, 1e8)
    assert np.allclose(img_k.values, k * k * img.values, rtol=1e-9, atol=0)
    a, b = detect(img), detect(img_k)
    assert a.centroid == b.centroid and np.array_equal(a.region, b.region)


def test_das_translation_equivariance_synthetic():
    shift = np.array([0.004, -0.002])
    pos = ring(8, 0.06)
    recon = ReconGrid.over_disk((0.0, 0.0), 0.02, 1e-3)
    d0 = detect(das_image(synthetic_dataset(pos, [(0.001, 0.002)]), recon, 1e8))
    d1 = detect(das_image(synthetic_dataset(pos + shift, [tuple(np.add((0.001, 0.002), shift))]),
                          recon.translated(shift), 1e8))
    assert np.allclose(np.subtract(d1.centroid, d0.centroid), shift, atol=1e-3)


def test_das_out_of_record():
    resp = synthetic_dataset(ring(4, 0.05), [(0.0, 0.0)], n_t=400)
    with pytest.raises(OutOfRecord):
        das_image(resp, ReconGrid.over_disk((0.0, 0.0), 0.02, 1e-3), 1e8)
    with pytest.raises(InvariantViolation):
        das_image(resp, ReconGrid.over_disk((0.0, 0.0), 0.02, 1e-3), 0.0)


# detection

def _img(values, dx=1e-3):
    return EnergyImage(np.asarray(values, dtype=float), 0.0, 0.0, dx)


def test_detect_single_pixel():
    v = np.zeros((9, 9))
    v[3, 5] = 2.0
    det = detect(_img(v))
    assert det.centroid == pytest.approx((3e-3, 5e-3))
    assert det.extent == 0.0
    assert det.region.sum() == 1


def test_detect_zero_threshold_region_is_peak_pixels():
    v = np.zeros((9, 9))
    v[2, 2] = v[2, 3] = 5.0
    v[2, 4] = 4.999
    det = detect(_img(v), threshold_db=0.0)
    assert det.region.sum() == 2 and det.region[2, 2] and det.region[2, 3]
    assert det.extent == pytest.approx(1e-3)


def test_detect_threshold_region_and_margin():
    x = np.arange(41)
    X, Y = np.meshgrid(x, x, indexing="ij")
    v = np.exp(-((X - 12) ** 2 + (Y - 20) ** 2) / 8.0) + 0.5 * np.exp(-((X - 30) ** 2 + (Y - 20) ** 2) / 8.0)
    det = detect(_img(v), -1.5)
    level = v.max() * 10 ** (-0.15)
    assert np.all(v[det.region] >= level)
    assert det.centroid == pytest.approx((12e-3, 20e-3), abs=1e-9)
    assert det.peak_db_margin == pytest.approx(10 * math.log10(2.0), abs=1e-6)
    i, j = (round(c / 1e-3) for c in det.centroid)
    assert det.region[i, j]


def test_detect_tie_break():
    v = np.zeros((20, 20))
    v[15, 3] = 1.0
    v[4, 10] = 1.0
    v[5, 10] = 0.9
    det = detect(_img(v), -1.5)
    # the component with more integrated energy wins
    assert det.region[4, 10] and det.region[5, 10]
    v2 = np.zeros((20, 20))
    v2[15, 3] = v2[4, 10] = 1.0
    det2 = detect(_img(v2), -1.5)
    # equal energy: lowest (y, x) centroid
    assert det2.centroid == pytest.approx((15e-3, 3e-3))


def test_detect_errors():
    with pytest.raises(FlatImage):
        detect(_img(np.zeros((5, 5))))
    v = np.zeros((5, 5))
    v[2, 2] = 1
    with pytest.raises(InvariantViolation):
        detect(_img(v), 1.0)
    with pytest.raises(InvariantViolation):
        _img(-v)


# acquisition on small scenes

def _vacuum_scene(n_cells=201):
    p = PulseSpec(fwhm=200e-12)
    dx = C0 / p.f_max() / 20
    spec = PhantomSpec(breast_radius=0.01, tumor_diameter=None, materials=dict.fromkeys(REGIONS, "vacuum"))
    half = n_cells // 2
    g = GridSpec.from_courant(n_cells, n_cells, dx, x0=-half * dx, y0=-half * dx)
    return p, dx, spec, g


def test_reciprocity_two_elements():
    p, dx, spec, g = _vacuum_scene(121)
    arr = ArrayGeometry(np.array([[-40 * dx, -30 * dx], [35 * dx, 20 * dx]]))
    ds = acquire(build_phantom(spec), arr, p, g, 500)
    a, b = ds[0, 1], ds[1, 0]
    assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))


def test_time_of_flight_vacuum():
    p, dx, spec, g = _vacuum_scene()
    arr = ArrayGeometry(np.array([[-80 * dx, -80 * dx], [-42.7 * dx, -28.8 * dx], [60 * dx, -20 * dx]]))
    ds = acquire(build_phantom(spec), arr, p, g, 900)
    pos = ds.array.positions
    pairs = [(i, j) for i in range(3) for j in range(3) if i != j]
    d = np.array([math.dist(pos[i], pos[j]) for i, j in pairs])
    t = np.array([peak_time(ds[i, j], ds.dt) for i, j in pairs])
    # the 2D line-source response peaks a fixed time ahead of t_ref; the
    # distance-dependent part of the delay is |p_rx - p_tx| / c
    offset = np.mean(t - ds.t_ref - d / C0)
    assert abs(offset) < p.fwhm / 2
    assert np.all(np.abs(t - ds.t_ref - offset - d / C0) <= ds.dt)
    for k in range(3):
        assert abs(peak_time(ds[k, k], ds.dt) - ds.t_ref) < p.fwhm


def test_acquire_deterministic_and_snapped():
    s = small_scenario()
    g = s.grid()
    ph = build_phantom(s.phantom_spec)
    a = acquire(ph, s.array(), s.pulse, g, 300)
    b = acquire(ph, s.array(), s.pulse, g, 300, threads=2)
    assert np.array_equal(a.traces, b.traces)
    assert a.kind == "with_tumor"
    for x, y in a.array.positions:
        i, j = g.nearest_node(x, y)
        assert g.node_position(i, j) == pytest.approx((x, y), abs=1e-15)


def test_default_threads(monkeypatch):
    monkeypatch.setenv("MWAVE_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.delenv("MWAVE_THREADS")
    assert default_threads() == 1


def test_zero_contrast_tumor_energy_floor():
    s = small_scenario()
    mats = dict(s.phantom_spec.materials, tumor="fat")
    s = replace(s, phantom_spec=replace(s.phantom_spec, materials=mats))
    res = depth_sweep([0.004, 0.008], s)
    assert all(e <= -80.0 for _, e in res)


def test_sweep_energy_invariant_to_amplitude():
    s = small_scenario()
    a = depth_sweep([0.004, 0.01], s)
    b = depth_sweep([0.004, 0.01], replace(s, pulse=PulseSpec(amplitude=5.0, fwhm=400e-12)))
    for (_, ea), (_, eb) in zip(a, b):
        assert ea == pytest.approx(eb, abs=1e-9)


def test_response_energy_db_zero():
    mk, a, _ = _pair()
    assert response_energy_db(mk(np.zeros_like(a), "tumor_response")) == -math.inf


def test_sweep_requires_tumor():
    s = small_scenario(phantom_spec=PhantomSpec(breast_radius=0.02, tumor_diameter=None))
    with pytest.raises(InvariantViolation):
        depth_sweep([0.004], s)


def test_das_translation_equivariance_fdtd():
    """Moving the tumor and the reconstruction grid by one vector inside a
    homogeneous medium moves the detected centroid by that vector within a
    pixel."""
    from mwave.scenario import Scenario

    mats = dict.fromkeys(REGIONS, "matching_medium")
    mats["tumor"] = "tumor"
    spec = PhantomSpec(breast_radius=0.03, tumor_diameter=0.006, tumor_depth=0.008, materials=mats)
    s = Scenario(phantom_spec=spec, n_elements=6, focus_material="matching_medium", recon_radius=0.025)
    g, arr = s.grid(), s.array()
    n = s.imaging_steps() + 200
    calib = acquire(build_phantom(spec.without_tumor()), arr, s.pulse, g, n)
    shift = 0.003
    cents = []
    for dd in (0.0, shift):
        w = acquire(build_phantom(spec.with_depth(spec.tumor_depth + dd)), arr, s.pulse, g, n)
        resp = equalize(calibrate(w, calib), s.focus_medium(), 1.0)
        img = das_image(resp, s.recon_grid().translated((0.0, dd)), s.focus_medium().speed)
        cents.append(np.array(detect(img).centroid))
    # a deeper tumor at -90 deg sits closer to the center, i.e. higher in y
    assert np.allclose(cents[1] - cents[0], (0.0, shift), atol=s.recon_dx)


# reference scene

def _ray_times(spec, positions, targets):
    ph = build_phantom(spec.without_tumor())
    speed = np.array([ph.materials[r].speed for r in REGIONS])
    s = np.linspace(0.0, 1.0, 4001)
    out = np.empty((len(positions), len(targets)))
    for i, p in enumerate(positions):
        for k, q in enumerate(targets):
            x = p[0] + (q[0] - p[0]) * s
            y = p[1] + (q[1] - p[1]) * s
            seg = math.dist(p, q) / s.size
            out[i, k] = np.sum(seg / speed[ph.region_codes(x, y)])
    return out


def test_response_causal(reference_pair):
    """The tumor response stays at the numerical floor until the pulse's
    leading edge could have reached the tumor at the fastest speed present."""
    with_t, calib = reference_pair
    resp = calibrate(with_t, calib)
    spec = reference_scenario().phantom_spec
    v_max = max(m.speed for m in build_phantom(spec).materials.values())
    tc, r = spec.tumor_center(), spec.tumor_diameter / 2
    pos = resp.array.positions
    d = np.hypot(pos[:, 0] - tc[0], pos[:, 1] - tc[1]) - r
    peak = np.abs(resp.traces).max()
    t = resp.times()
    for i in range(len(pos)):
        for j in range(len(pos)):
            bound = resp.t_ref - 2 * resp.fwhm + (d[i] + d[j]) / v_max
            assert np.abs(resp.traces[i, j][t < bound]).max(initial=0.0) < 1e-4 * peak


@pytest.mark.xfail(strict=True, reason="scattered-pulse onset scatters by ~5 samples (std) around any "
                   "straight-ray delay: the 2 mm skin is sub-wavelength and the 2D echo is reshaped")
def test_response_onset_within_two_samples(reference_pair):
    with_t, calib = reference_pair
    resp = calibrate(with_t, calib)
    spec = reference_scenario().phantom_spec
    tc, r = spec.tumor_center(), spec.tumor_diameter / 2
    ang = np.linspace(0, 2 * np.pi, 181)
    edge = np.column_stack([tc[0] + r * np.cos(ang), tc[1] + r * np.sin(ang)])
    T = _ray_times(spec, resp.array.positions, edge)
    lead = resp.fwhm / 2.3548 * math.sqrt(2 * math.log(100.0))
    t = resp.times()
    n = resp.array.n_elements
    for i in range(n):
        for j in range(n):
            tr = np.abs(resp.traces[i, j])
            onset = t[np.argmax(tr > 0.01 * tr.max())]
            expected = resp.t_ref + np.min(T[i] + T[j]) - lead
            assert abs(onset - expected) <= 2 * resp.dt


def test_reference_scene_detection(reference_imaging):
    _, img, det = reference_imaging
    spec = reference_scenario().phantom_spec
    assert math.dist(det.centroid, spec.tumor_center()) <= 8e-3
    depth = spec.breast_radius - math.hypot(*det.centroid)
    assert 0.026 <= depth <= 0.031
    assert math.dist(img.peak_location, spec.tumor_center()) <= 8e-3
