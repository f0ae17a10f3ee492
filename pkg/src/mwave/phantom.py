"""Two-dimensional breast phantoms and their rasters.

The scene is a cross-section through the tumor center: a fat disk of radius
``breast_radius`` wrapped in a skin annulus, immersed in matching medium, with
an optional circular tumor. ``tumor_depth`` is measured from the inner skin
surface to the nearest tumor edge along ``tumor_angle``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from mwave.errors import GeometryError, InvariantViolation
from mwave.grid import GridSpec, MaterialRaster
from mwave.materials import DEFAULT_CATALOG

REGIONS = ("background", "skin", "fat", "tumor")
BACKGROUND, SKIN, FAT, TUMOR = range(4)


@dataclass(frozen=True)
class PhantomSpec:
    breast_radius: float = 0.078
    skin_thickness: float = 0.002
    tumor_diameter: float = 0.010
    tumor_depth: float = 0.026
    tumor_angle: float = -math.pi / 2
    center: tuple = (0.0, 0.0)
    materials: dict = field(
        default_factory=lambda: {
            "background": "matching_medium",
            "skin": "skin",
            "fat": "fat",
            "tumor": "tumor",
        }
    )

    def __post_init__(self):
        if not 0 < self.skin_thickness < self.breast_radius:
            raise InvariantViolation("need 0 < skin_thickness < breast_radius")
        missing = set(REGIONS) - set(self.materials)
        if missing:
            raise InvariantViolation(f"no material for regions {sorted(missing)}")
        if self.tumor_diameter is not None:
            if not self.tumor_diameter > 0:
                raise InvariantViolation("tumor_diameter must be positive or None")
            if self.tumor_depth < 0 or self.tumor_depth + self.tumor_diameter > 2 * self.breast_radius:
                raise GeometryError(
                    f"tumor (diameter {self.tumor_diameter} m at depth {self.tumor_depth} m) "
                    f"does not fit inside the fat region of radius {self.breast_radius} m"
                )

    @property
    def has_tumor(self):
        return self.tumor_diameter is not None

    @property
    def outer_radius(self):
        return self.breast_radius + self.skin_thickness

    def tumor_center(self):
        """Tumor center, ``depth + diameter / 2`` inside the inner skin surface."""
        if not self.has_tumor:
            return None
        r = self.breast_radius - self.tumor_depth - self.tumor_diameter / 2.0
        return (
            self.center[0] + r * math.cos(self.tumor_angle),
            self.center[1] + r * math.sin(self.tumor_angle),
        )

    def without_tumor(self):
        return replace(self, tumor_diameter=None)

    def with_depth(self, depth):
        return replace(self, tumor_depth=depth)


class Phantom:
    """Geometric scene built from a :class:`PhantomSpec`."""

    def __init__(self, spec, catalog=None):
        self.spec = spec
        self.catalog = DEFAULT_CATALOG if catalog is None else catalog
        self.materials = {region: self.catalog[spec.materials[region]] for region in REGIONS}

    def region_codes(self, x, y):
        """Region index (see ``REGIONS``) at points ``x, y`` (broadcast arrays)."""
        s = self.spec
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x - s.center[0], y - s.center[1])
        codes = np.full(np.broadcast(x, y).shape, BACKGROUND, dtype=np.int8)
        codes[r <= s.outer_radius] = SKIN
        codes[r < s.breast_radius] = FAT
        if s.has_tumor:
            tx, ty = s.tumor_center()
            codes[np.hypot(x - tx, y - ty) <= s.tumor_diameter / 2.0] = TUMOR
        return codes

    def label_at(self, x, y):
        return REGIONS[int(self.region_codes(x, y))]

    def tissue_at(self, x, y):
        return self.materials[self.label_at(x, y)].name


def build_phantom(spec, catalog=None):
    """Phantom scene for ``spec``; a spec without tumor is the calibration scene."""
    return Phantom(spec, catalog)


def rasterize(phantom, grid):
    """Sample the phantom at every grid node.

    Raises
    ------
    GeometryError
        If the skin shell reaches into the absorbing layers.
    """
    s = phantom.spec
    xmin, xmax, ymin, ymax = grid.usable_bounds()
    cx, cy = s.center
    R = s.outer_radius
    if cx - R < xmin or cx + R > xmax or (grid.boundary_y != "periodic" and (cy - R < ymin or cy + R > ymax)):
        raise GeometryError("phantom extends beyond the usable grid area")
    X, Y = np.meshgrid(grid.xs(), grid.ys(), indexing="ij")
    codes = phantom.region_codes(X, Y)
    eps_lut = np.array([phantom.materials[r].eps_r for r in REGIONS])
    sig_lut = np.array([phantom.materials[r].sigma for r in REGIONS])
    return MaterialRaster(eps_lut[codes], sig_lut[codes], labels=codes, names=REGIONS)


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna element positions, shape ``(n_elements, 2)`` in metres."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise InvariantViolation("an array needs at least 2 elements given as (x, y) rows")
        d = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
        if np.any(d[~np.eye(len(pos), dtype=bool)] == 0.0):
            raise InvariantViolation("array element positions must be pairwise distinct")
        object.__setattr__(self, "positions", pos)

    @property
    def n_elements(self):
        return self.positions.shape[0]

    def __eq__(self, other):
        return isinstance(other, ArrayGeometry) and np.array_equal(self.positions, other.positions)

    def __hash__(self):
        return hash(self.positions.tobytes())

    def check_outside(self, spec):
        r = np.hypot(self.positions[:, 0] - spec.center[0], self.positions[:, 1] - spec.center[1])
        if np.any(r <= spec.outer_radius):
            raise GeometryError("array elements must lie outside the skin shell")

    def snapped(self, grid):
        """Move every element onto its nearest grid node."""
        nodes = [grid.nearest_node(x, y) for x, y in self.positions]
        for node in nodes:
            if not grid.is_interior(*node):
                raise GeometryError(f"array element at node {node} is outside the usable grid")
        pos = np.array([grid.node_position(i, j) for i, j in nodes])
        return ArrayGeometry(pos), nodes


def conformal_arc(spec, n_elements=8, standoff=0.005, arc_center=-math.pi / 2, arc_span=math.radians(150)):
    """Elements evenly spaced on an arc ``standoff`` outside the skin."""
    if n_elements < 2:
        raise InvariantViolation("n_elements must be >= 2")
    if not standoff > 0:
        raise InvariantViolation("standoff must be positive")
    rad = spec.outer_radius + standoff
    angles = arc_center + arc_span * (np.arange(n_elements) / (n_elements - 1) - 0.5)
    pos = np.column_stack(
        [spec.center[0] + rad * np.cos(angles), spec.center[1] + rad * np.sin(angles)]
    )
    array = ArrayGeometry(pos)
    array.check_outside(spec)
    return array


def scene_grid(spec, array, dx, courant=0.7, pml_cells=10, margin=0.005):
    """Smallest odd-sized square grid, centered on the phantom, holding the
    skin shell and every element ``margin`` inside the absorbing layers."""
    cx, cy = spec.center
    extent = spec.outer_radius
    if array is not None:
        extent = max(extent, float(np.max(np.abs(array.positions - np.array([cx, cy])))))
    half = int(math.ceil((extent + margin) / dx - 1e-9)) + pml_cells + 1
    n = 2 * half + 1
    return GridSpec.from_courant(n, n, dx, courant=courant, pml_cells=pml_cells,
                                 x0=cx - half * dx, y0=cy - half * dx)
