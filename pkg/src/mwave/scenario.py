"""Complete imaging scenario: phantom, array, pulse and grid settings, plus
the calibrated imaging pipeline that runs over them."""

import math
from dataclasses import dataclass, field

import numpy as np

from mwave.fdtd import PulseSpec
from mwave.materials import DEFAULT_CATALOG
from mwave.phantom import PhantomSpec, build_phantom, conformal_arc, scene_grid
from mwave.radar import (
    ReconGrid,
    acquire,
    calibrate,
    das_image,
    detect,
    equalize,
)


@dataclass(frozen=True)
class Scenario:
    phantom_spec: PhantomSpec = field(default_factory=PhantomSpec)
    pulse: PulseSpec = field(default_factory=PulseSpec)
    n_elements: int = 8
    standoff: float = 0.005
    arc_center: float = -math.pi / 2
    arc_span: float = math.radians(150)
    dx: float = 0.5e-3
    courant: float = 0.7
    pml_cells: int = 10
    margin: float = 0.005
    n_steps: int = 0
    f_max: float = 0.0
    catalog: object = DEFAULT_CATALOG
    focus_material: str = "fat"
    spreading_exponent_per_leg: float = 0.5
    equalize: bool = True
    threshold_db: float = -1.5
    recon_dx: float = 1e-3
    recon_radius: float = 0.0

    def array(self):
        return conformal_arc(self.phantom_spec, self.n_elements, self.standoff,
                             self.arc_center, self.arc_span)

    def grid(self):
        return scene_grid(self.phantom_spec, self.array(), self.dx, self.courant,
                          self.pml_cells, self.margin)

    def source_fmax(self):
        return self.f_max if self.f_max > 0 else self.pulse.f_max()

    def focus_medium(self):
        return self.catalog[self.focus_material]

    def recon_grid(self):
        s = self.phantom_spec
        radius = self.recon_radius if self.recon_radius > 0 else s.breast_radius
        return ReconGrid.over_disk(s.center, radius, self.recon_dx)

    def _steps_for_delay(self, delay):
        grid = self.grid()
        t_end = self.pulse.t0 + delay + self.pulse.fwhm
        return int(math.ceil(t_end / grid.dt)) + 2

    def imaging_steps(self):
        """Record length covering the focusing window at every recon pixel."""
        if self.n_steps > 0:
            return self.n_steps
        recon = self.recon_grid()
        X, Y = recon.points()
        act = recon.active()
        pos = self.array().positions
        d = np.hypot(X[act][None] - pos[:, 0, None], Y[act][None] - pos[:, 1, None])
        return self._steps_for_delay(2.0 * float(d.max()) / self.focus_medium().speed)

    def n_steps_for_depths(self, depths):
        """Record length covering the round trip to the farthest tumor edge."""
        if self.n_steps > 0:
            return self.n_steps
        pos = self.array().positions
        far = 0.0
        for depth in depths:
            spec = self.phantom_spec.with_depth(depth)
            cx, cy = spec.tumor_center()
            far = max(far, float(np.max(np.hypot(pos[:, 0] - cx, pos[:, 1] - cy))) + spec.tumor_diameter / 2)
        return self._steps_for_delay(2.0 * far / self.focus_medium().speed + self.pulse.fwhm)

    def validate(self):
        """Build every derived object once, raising on any invariant violation."""
        grid = self.grid()
        phantom = build_phantom(self.phantom_spec, self.catalog)
        from mwave.phantom import rasterize

        raster = rasterize(phantom, grid)
        grid.check_resolution(self.source_fmax(), float(np.max(raster.eps_r)))
        self.array().snapped(grid)
        return grid, phantom, raster

    def acquire_pair(self, n_steps=None, threads=None):
        """(with_tumor, calibration) datasets over the same grid and array."""
        grid, phantom, raster = self.validate()
        n = self.imaging_steps() if n_steps is None else n_steps
        array = self.array()
        with_t = acquire(phantom, array, self.pulse, grid, n, threads=threads, raster=raster)
        calib_ph = build_phantom(self.phantom_spec.without_tumor(), self.catalog)
        calib = acquire(calib_ph, array, self.pulse, grid, n, threads=threads)
        return with_t, calib

    def image(self, with_tumor, calibration):
        resp = calibrate(with_tumor, calibration)
        medium = self.focus_medium()
        if self.equalize:
            resp = equalize(resp, medium, 2.0 * self.spreading_exponent_per_leg)
        img = das_image(resp, self.recon_grid(), medium.speed)
        return resp, img, detect(img, self.threshold_db)

    def run_imaging(self, threads=None):
        with_t, calib = self.acquire_pair(threads=threads)
        resp, img, det = self.image(with_t, calib)
        return ImagingResult(with_t, calib, resp, img, det)


@dataclass(frozen=True)
class ImagingResult:
    with_tumor: object
    calibration: object
    response: object
    image: object
    detection: object
