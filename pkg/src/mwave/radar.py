"""Multistatic UWB radar chain: acquisition over a phantom, calibration
subtraction, loss and spreading equalisation, delay-and-sum focusing and
isovalue tumor detection.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import pdist

from mwave import fdtd
from mwave.errors import FlatImage, InvariantViolation, MismatchedAcquisition, OutOfRecord
from mwave.phantom import ArrayGeometry, build_phantom, rasterize

logger = logging.getLogger(__name__)

KINDS = ("with_tumor", "calibration", "tumor_response")


def default_threads():
    env = os.environ.get("MWAVE_THREADS")
    if env:
        return max(1, int(env))
    return 1


@dataclass(frozen=True)
class RadarDataset:
    """Multistatic time-domain record.

    Attributes
    ----------
    traces : ndarray, shape (n_tx, n_rx, n_t)
        ``traces[tx, rx, n]`` is the Ez sample at time ``t_first + n * dt``.
    dt : float
    array : ArrayGeometry
    tx_waveform : ndarray, shape (n_t,)
        Transmitted pulse samples, for normalisation.
    kind : str
    t_ref : float
        Transmit reference time (pulse peak); delays are counted from it.
    t_first : float
        Time of the first sample.
    fwhm : float
        Pulse full width at half maximum.
    """

    traces: np.ndarray
    dt: float
    array: ArrayGeometry
    tx_waveform: np.ndarray
    kind: str
    t_ref: float
    t_first: float
    fwhm: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvariantViolation(f"unknown dataset kind {self.kind!r}")
        n = self.array.n_elements
        if self.traces.ndim != 3 or self.traces.shape[:2] != (n, n):
            raise InvariantViolation(f"traces must have shape ({n}, {n}, n_t)")
        if self.tx_waveform.shape != (self.traces.shape[2],):
            raise InvariantViolation("tx_waveform length must match the traces")

    def __getitem__(self, pair):
        tx, rx = pair
        return self.traces[tx, rx]

    @property
    def n_samples(self):
        return self.traces.shape[2]

    def times(self):
        return self.t_first + self.dt * np.arange(self.n_samples)

    def channels(self):
        n = self.array.n_elements
        return [(tx, rx) for tx in range(n) for rx in range(n)]

    def scaled(self, k):
        return replace(self, traces=self.traces * k)


def acquire(phantom, array, pulse, grid, n_steps, threads=None, kind=None, raster=None):
    """Multistatic acquisition: one simulation per transmitting element.

    Elements are snapped to their nearest grid nodes; the returned dataset
    carries the snapped positions.
    """
    array.check_outside(phantom.spec)
    snapped, nodes = array.snapped(grid)
    if raster is None:
        raster = rasterize(phantom, grid)
    if kind is None:
        kind = "with_tumor" if phantom.spec.has_tumor else "calibration"

    def one(tx):
        return fdtd.run(raster, grid, [(nodes[tx], pulse)], nodes, n_steps)

    workers = threads or default_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(nodes))))
    else:
        results = [one(tx) for tx in range(len(nodes))]
    traces = np.stack([r.traces for r in results])
    return RadarDataset(
        traces=traces,
        dt=grid.dt,
        array=snapped,
        tx_waveform=results[0].tx_waveform.copy(),
        kind=kind,
        t_ref=pulse.t0,
        t_first=grid.dt,
        fwhm=pulse.fwhm,
    )


def check_compatible(a, b):
    if a.array != b.array:
        raise MismatchedAcquisition("datasets were recorded with different arrays")
    if a.dt != b.dt or a.t_first != b.t_first or a.t_ref != b.t_ref:
        raise MismatchedAcquisition("datasets have different time axes")
    if a.traces.shape != b.traces.shape:
        raise MismatchedAcquisition("datasets have different trace lengths")
    if not np.array_equal(a.tx_waveform, b.tx_waveform):
        raise MismatchedAcquisition("datasets were excited with different pulses")


def calibrate(with_tumor, calibration):
    """Tumor response: sample-wise ``with_tumor - calibration`` on every channel."""
    check_compatible(with_tumor, calibration)
    return replace(
        with_tumor,
        traces=with_tumor.traces - calibration.traces,
        kind="tumor_response",
    )


def equalization_gain(resp, medium, spreading_exponent):
    """Per-sample gain undoing path loss and geometric spreading.

    For elapsed time ``t`` since the transmit reference the round-trip path
    is ``v t``; loss ``alpha`` (one-way dB/m) is undone over the whole path and
    spreading as ``(v t / 2) ** spreading_exponent``.
    """
    v = medium.speed
    alpha_db_per_m = medium.attenuation_db_per_cm() * 100.0
    path = v * np.maximum(resp.times() - resp.t_ref, 0.0)
    return 10.0 ** (alpha_db_per_m * path / 20.0) * (path / 2.0) ** spreading_exponent


def equalize(resp, medium, spreading_exponent):
    """Equalise tissue losses and radial spread of a tumor response.

    ``spreading_exponent`` applies to the one-way range; 1.0 undoes
    cylindrical (2D) spreading on both legs, 2.0 spherical.
    """
    if resp.kind != "tumor_response":
        raise InvariantViolation("equalize expects a calibrated tumor response")
    gain = equalization_gain(resp, medium, spreading_exponent)
    return replace(resp, traces=resp.traces * gain)


@dataclass(frozen=True)
class ReconGrid:
    """Pixel grid for focusing; pixel ``(i, j)`` at ``(x0 + i dx, y0 + j dx)``."""

    x0: float
    y0: float
    dx: float
    nx: int
    ny: int
    mask: np.ndarray = None

    @classmethod
    def over_disk(cls, center, radius, dx):
        half = int(math.floor(radius / dx))
        n = 2 * half + 1
        x0 = center[0] - half * dx
        y0 = center[1] - half * dx
        xs = x0 + dx * np.arange(n)
        ys = y0 + dx * np.arange(n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        mask = np.hypot(X - center[0], Y - center[1]) < radius
        return cls(x0, y0, dx, n, n, mask)

    def xs(self):
        return self.x0 + self.dx * np.arange(self.nx)

    def ys(self):
        return self.y0 + self.dx * np.arange(self.ny)

    def points(self):
        X, Y = np.meshgrid(self.xs(), self.ys(), indexing="ij")
        return X, Y

    def active(self):
        if self.mask is None:
            return np.ones((self.nx, self.ny), dtype=bool)
        return self.mask

    def translated(self, dxy):
        return replace(self, x0=self.x0 + dxy[0], y0=self.y0 + dxy[1])


@dataclass(frozen=True)
class EnergyImage:
    """Focused scattered-energy map, ``values[i, j]`` at pixel ``(i, j)``."""

    values: np.ndarray
    x0: float
    y0: float
    dx: float
    peak_value: float = field(init=False)
    peak_location: tuple = field(init=False)
    peak_index: tuple = field(init=False)

    def __post_init__(self):
        if np.any(self.values < 0):
            raise InvariantViolation("energy values must be non-negative")
        idx = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        object.__setattr__(self, "peak_index", (int(idx[0]), int(idx[1])))
        object.__setattr__(self, "peak_value", float(self.values[idx]))
        object.__setattr__(self, "peak_location", self.position(*idx))

    def position(self, i, j):
        return (self.x0 + i * self.dx, self.y0 + j * self.dx)


def window_offsets(fwhm, dt):
    """Sample offsets (s) of the energy window, one FWHM wide, centered on 0."""
    half = int(round(0.5 * fwhm / dt))
    return dt * np.arange(-half, half + 1)


def channel_delays(array, X, Y, v):
    """Round-trip delays ``(|p_tx - r| + |r - p_rx|) / v`` per element pair.

    Returns an array of shape ``(n_tx, n_rx) + X.shape``.
    """
    pos = array.positions
    dist = np.hypot(X[None] - pos[:, 0, None], Y[None] - pos[:, 1, None])
    return (dist[:, None] + dist[None, :]) / v


def das_image(resp, recon, v, window=None):
    """Delay-and-sum energy image.

    Each pixel sums every channel at its focusing delay, squares the coherent
    sum and integrates it over a window of one pulse FWHM centered on the
    transmit reference, with linear interpolation between samples.

    Raises
    ------
    OutOfRecord
        If a required sample falls outside the recorded traces.
    """
    if not v > 0:
        raise InvariantViolation("focusing speed must be positive")
    active = recon.active()
    X, Y = recon.points()
    px, py = X[active], Y[active]
    offsets = window_offsets(resp.fwhm, resp.dt) if window is None else np.asarray(window)
    n_t = resp.n_samples
    pos = resp.array.positions
    dist = np.hypot(px[None] - pos[:, 0, None], py[None] - pos[:, 1, None])
    focus = np.zeros((px.size, offsets.size))
    base = (resp.t_ref - resp.t_first + offsets[None, :]) / resp.dt
    for tx in range(resp.array.n_elements):
        for rx in range(resp.array.n_elements):
            tau = (dist[tx] + dist[rx]) / v
            s = tau[:, None] / resp.dt + base
            if s.min() < 0 or s.max() > n_t - 1:
                raise OutOfRecord(
                    f"channel ({tx}, {rx}) needs t = {resp.t_first + s.max() * resp.dt:.4g} s "
                    f"but the record ends at {resp.t_first + (n_t - 1) * resp.dt:.4g} s"
                )
            i0 = np.minimum(np.floor(s).astype(np.intp), n_t - 2)
            frac = s - i0
            trace = resp.traces[tx, rx]
            focus += trace[i0] * (1.0 - frac) + trace[i0 + 1] * frac
    values = np.zeros((recon.nx, recon.ny))
    values[active] = np.sum(focus * focus, axis=1)
    return EnergyImage(values, recon.x0, recon.y0, recon.dx)


@dataclass(frozen=True)
class Detection:
    centroid: tuple
    extent: float
    peak_db_margin: float
    threshold_db: float
    region: np.ndarray = field(repr=False, compare=False)

    def report(self, truth=None, inner_radius=None, center=None):
        lines = {
            "centroid_x_m": f"{self.centroid[0]:.9e}",
            "centroid_y_m": f"{self.centroid[1]:.9e}",
            "extent_m": f"{self.extent:.9e}",
            "peak_db_margin": f"{self.peak_db_margin:.9e}",
            "threshold_db": f"{self.threshold_db:.9e}",
            "region_pixels": str(int(self.region.sum())),
        }
        if truth is not None:
            err = math.hypot(self.centroid[0] - truth[0], self.centroid[1] - truth[1])
            lines["true_tumor_x_m"] = f"{truth[0]:.9e}"
            lines["true_tumor_y_m"] = f"{truth[1]:.9e}"
            lines["localization_error_m"] = f"{err:.9e}"
        if inner_radius is not None and center is not None:
            r = math.hypot(self.centroid[0] - center[0], self.centroid[1] - center[1])
            lines["depth_below_inner_skin_m"] = f"{inner_radius - r:.9e}"
        return lines


def _max_chord(points):
    if len(points) < 2:
        return 0.0
    if len(points) > 2000:
        from scipy.spatial import ConvexHull, QhullError

        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            pass
    return float(pdist(points).max()) if len(points) > 1 else 0.0


def detect(img, threshold_db=-1.5):
    """Isovalue detection of the brightest scatterer.

    The threshold region holds pixels within ``threshold_db`` (energy, so
    ``10 ** (threshold_db / 10)``) of the peak; the connected component
    containing the peak gives the energy-weighted centroid and the extent
    (longest chord between pixel centers).
    """
    if not img.peak_value > 0:
        raise FlatImage("energy image has no positive peak")
    if threshold_db > 0:
        raise InvariantViolation("threshold_db must be <= 0")
    vals = img.values
    level = img.peak_value * 10.0 ** (threshold_db / 10.0)
    above = vals >= level
    labels, n = ndimage.label(above, structure=np.ones((3, 3)))
    peak_labels = np.unique(labels[vals == img.peak_value])
    peak_labels = peak_labels[peak_labels > 0]

    def key(lab):
        m = labels == lab
        w = vals[m]
        ii, jj = np.nonzero(m)
        cx = float(np.sum(w * ii) / w.sum())
        cy = float(np.sum(w * jj) / w.sum())
        return (-float(w.sum()), cy, cx)

    chosen = min(peak_labels, key=key)
    region = labels == chosen
    ii, jj = np.nonzero(region)
    w = vals[region]
    ci = float(np.sum(w * ii) / w.sum())
    cj = float(np.sum(w * jj) / w.sum())
    centroid = img.position(ci, cj)
    extent = _max_chord(np.column_stack([ii, jj]).astype(float)) * img.dx

    local_max = (vals == ndimage.maximum_filter(vals, size=3)) & (vals > 0) & ~region
    # other maxima still attached to the chosen component at this level do not count
    if threshold_db < 0:
        local_max &= ~ndimage.binary_dilation(region, structure=np.ones((3, 3)))
    other = vals[local_max]
    margin = 10.0 * math.log10(img.peak_value / other.max()) if other.size else math.inf
    return Detection(centroid, extent, margin, threshold_db, region)


def response_energy_db(resp):
    """``10 log10(sum resp^2 / sum tx^2)``; ``-inf`` for an all-zero response."""
    num = float(np.sum(resp.traces**2))
    den = float(np.sum(resp.tx_waveform**2))
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def depth_sweep(depths, scenario, threads=None):
    """Normalized tumor-response energy versus tumor depth.

    The calibration acquisition is shared by all depths since the rasters
    differ only inside the tumor disk.

    Returns
    -------
    list of (depth, energy_db)
    """
    depths = [float(d) for d in depths]
    specs = [scenario.phantom_spec.with_depth(d) for d in depths]
    for s in specs:
        if not s.has_tumor:
            raise InvariantViolation("depth sweep needs a tumor in the scenario")
    grid = scenario.grid()
    array = scenario.array()
    n_steps = scenario.n_steps_for_depths(depths)
    calib_phantom = build_phantom(specs[0].without_tumor(), scenario.catalog)
    calib = acquire(calib_phantom, array, scenario.pulse, grid, n_steps, threads=threads)
    out = []
    for depth, spec in zip(depths, specs):
        ph = build_phantom(spec, scenario.catalog)
        with_t = acquire(ph, array, scenario.pulse, grid, n_steps, threads=threads)
        out.append((depth, response_energy_db(calibrate(with_t, calib))))
        logger.info("depth %.4g m: %.3f dB", depth, out[-1][1])
    return out
