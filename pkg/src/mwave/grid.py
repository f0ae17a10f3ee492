"""Simulation grid geometry and material rasters."""

import math
from dataclasses import dataclass, field

import numpy as np

from mwave.constants import C0
from mwave.errors import InvariantViolation

MAX_COURANT_2D = 1.0 / math.sqrt(2.0) - 1e-12
BOUNDARIES = ("cpml", "pec", "periodic")


@dataclass(frozen=True)
class GridSpec:
    """Uniform square-cell 2D grid.

    Node ``(i, j)`` sits at ``(x0 + i * dx, y0 + j * dx)``. Electric field
    and material samples live on nodes; ``pml_cells`` absorbing cells line
    each side whose boundary kind is ``"cpml"``.
    """

    nx: int
    ny: int
    dx: float
    dt: float
    pml_cells: int = 10
    boundary_x: str = "cpml"
    boundary_y: str = "cpml"
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise InvariantViolation(f"grid must be at least 3x3, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dt > 0):
            raise InvariantViolation("dx and dt must be positive")
        if self.courant > MAX_COURANT_2D:
            raise InvariantViolation(
                f"Courant number {self.courant:.6f} exceeds the 2D limit 1/sqrt(2)"
            )
        if self.boundary_x not in ("cpml", "pec"):
            raise InvariantViolation(f"boundary_x must be cpml or pec, got {self.boundary_x!r}")
        if self.boundary_y not in BOUNDARIES:
            raise InvariantViolation(f"unknown boundary_y {self.boundary_y!r}")
        if self.pml_cells < 0:
            raise InvariantViolation("pml_cells must be >= 0")
        for n, kind in ((self.nx, self.boundary_x), (self.ny, self.boundary_y)):
            if kind == "cpml" and 2 * self.pml_cells + 3 > n:
                raise InvariantViolation("grid too small for its absorbing layers")

    @classmethod
    def from_courant(cls, nx, ny, dx, courant=0.7, **kwargs):
        return cls(nx=nx, ny=ny, dx=dx, dt=courant * dx / C0, **kwargs)

    @property
    def courant(self):
        return C0 * self.dt / self.dx

    @property
    def shape(self):
        return (self.nx, self.ny)

    def xs(self):
        return self.x0 + self.dx * np.arange(self.nx)

    def ys(self):
        return self.y0 + self.dx * np.arange(self.ny)

    def node_position(self, i, j):
        return (self.x0 + i * self.dx, self.y0 + j * self.dx)

    def nearest_node(self, x, y):
        return (int(round((x - self.x0) / self.dx)), int(round((y - self.y0) / self.dx)))

    def usable_bounds(self):
        """(xmin, xmax, ymin, ymax) of the region inside the absorbing layers."""
        pad = {"cpml": self.pml_cells + 1, "pec": 1, "periodic": 0}
        px, py = pad[self.boundary_x], pad[self.boundary_y]
        return (
            self.x0 + px * self.dx,
            self.x0 + (self.nx - 1 - px) * self.dx,
            self.y0 + py * self.dx,
            self.y0 + (self.ny - 1 - py) * self.dx,
        )

    def is_interior(self, i, j):
        xmin, xmax, ymin, ymax = self.usable_bounds()
        x, y = self.node_position(i, j)
        eps = 1e-9 * self.dx
        return xmin - eps <= x <= xmax + eps and ymin - eps <= y <= ymax + eps

    def check_resolution(self, f_max, max_eps_r, cells_per_wavelength=20):
        """Raise unless ``dx <= lambda_min / cells_per_wavelength``."""
        lam_min = C0 / (f_max * math.sqrt(max_eps_r))
        if self.dx > lam_min / cells_per_wavelength * (1 + 1e-9):
            raise InvariantViolation(
                f"dx = {self.dx:.4g} m exceeds lambda_min/{cells_per_wavelength} = "
                f"{lam_min / cells_per_wavelength:.4g} m (f_max = {f_max:.4g} Hz, "
                f"eps_r = {max_eps_r:.4g})"
            )


@dataclass(frozen=True)
class MaterialRaster:
    """Per-node relative permittivity and conductivity (shape ``(nx, ny)``)."""

    eps_r: np.ndarray
    sigma: np.ndarray
    labels: np.ndarray = field(default=None, compare=False)
    names: tuple = ()

    def __post_init__(self):
        if self.eps_r.shape != self.sigma.shape or self.eps_r.ndim != 2:
            raise InvariantViolation("eps_r and sigma must be 2-D arrays of one shape")
        if not (np.all(np.isfinite(self.eps_r)) and np.all(self.eps_r >= 1.0)):
            raise InvariantViolation("eps_r must be finite and >= 1 everywhere")
        if not (np.all(np.isfinite(self.sigma)) and np.all(self.sigma >= 0.0)):
            raise InvariantViolation("sigma must be finite and >= 0 everywhere")

    @classmethod
    def uniform(cls, grid, eps_r=1.0, sigma=0.0):
        return cls(np.full(grid.shape, float(eps_r)), np.full(grid.shape, float(sigma)))

    @property
    def shape(self):
        return self.eps_r.shape
