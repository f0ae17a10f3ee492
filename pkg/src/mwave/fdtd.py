"""Two-dimensional TMz (Ez, Hx, Hy) finite-difference time-domain solver.

Standard Yee leapfrog with a conductive loss term in the Ez update,
convolutional PML absorbing layers and additive (soft) point sources.

Index conventions, for an ``nx`` x ``ny`` node grid with PEC or CPML walls:

* ``ez[i, j]`` at ``(i, j) dx``, time ``n dt``
* ``hx[i, j]`` at ``(i, j + 1/2) dx``, shape ``(nx, ny - 1)``
* ``hy[i, j]`` at ``(i + 1/2, j) dx``, shape ``(nx - 1, ny)``
* H lives at ``(n + 1/2) dt``

With ``boundary_y == "periodic"`` ``hx`` has shape ``(nx, ny)`` and wraps.
The outermost Ez nodes on non-periodic sides are held at zero (PEC closure
behind the absorbing layers).
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from mwave.constants import C0, EPS0, ETA0, MU0
from mwave.errors import Diverged, InvariantViolation
from mwave.grid import GridSpec, MaterialRaster

logger = logging.getLogger(__name__)

FWHM_TO_TAU = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DIVERGENCE_LIMIT = 1e30
PULSE_SHAPES = ("gaussian", "gaussian_derivative")

# CPML grading
PML_ORDER = 3
PML_REFLECTION_FACTOR = 0.8
PML_ALPHA_MAX = 0.0


@dataclass(frozen=True)
class PulseSpec:
    """Ultra-wideband excitation.

    ``fwhm`` is the full width at half maximum of the Gaussian envelope.
    ``t0`` defaults to ``3 * fwhm``.
    """

    amplitude: float = 1.0
    fwhm: float = 200e-12
    t0: float = None
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InvariantViolation(f"pulse fwhm must be positive, got {self.fwhm}")
        if self.t0 is None:
            object.__setattr__(self, "t0", 3.0 * self.fwhm)
        if self.t0 < 3.0 * self.fwhm * (1 - 1e-12):
            raise InvariantViolation("pulse delay t0 must be at least 3 * fwhm")
        if self.shape not in PULSE_SHAPES:
            raise InvariantViolation(f"unknown pulse shape {self.shape!r}")

    @property
    def tau(self):
        return self.fwhm * FWHM_TO_TAU

    def value(self, t):
        return pulse_value(self, t)

    def f_max(self, level_db=-20.0):
        """Frequency above which the amplitude spectrum stays below ``level_db``."""
        level = 10.0 ** (level_db / 20.0)
        if self.shape == "gaussian":
            return math.sqrt(-2.0 * math.log(level)) / (2.0 * math.pi * self.tau)
        # normalised |spectrum| u exp((1 - u^2) / 2) with u = omega tau
        u = brentq(lambda u: u * math.exp(0.5 * (1.0 - u * u)) - level, 1.0, 50.0)
        return u / (2.0 * math.pi * self.tau)

    def center_frequency(self):
        """Frequency of the amplitude-spectrum peak (0 for a plain Gaussian)."""
        if self.shape == "gaussian":
            return 0.0
        return 1.0 / (2.0 * math.pi * self.tau)


def pulse_value(p, t):
    """Pulse amplitude at time ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    u = (t - p.t0) / p.tau
    g = np.exp(-0.5 * u * u)
    if p.shape == "gaussian":
        out = p.amplitude * g
    else:
        out = -p.amplitude * math.exp(0.5) * u * g
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RampedSine:
    """Sinusoid with a raised-cosine turn-on over ``ramp_periods`` periods."""

    freq: float
    amplitude: float = 1.0
    ramp_periods: float = 5.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        t_ramp = self.ramp_periods / self.freq
        ramp = np.where(t < t_ramp, 0.5 * (1.0 - np.cos(np.pi * np.clip(t, 0, None) / t_ramp)), 1.0)
        out = self.amplitude * ramp * np.sin(2.0 * math.pi * self.freq * t)
        return out if out.ndim else float(out)


@dataclass
class FieldState:
    """Yee field arrays, materials and auxiliary CPML memory at one instant."""

    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    eps_r: np.ndarray
    sigma: np.ndarray
    step_index: int = 0
    psi: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, grid, raster):
        nyh = grid.ny if grid.boundary_y == "periodic" else grid.ny - 1
        return cls(
            ez=np.zeros(grid.shape),
            hx=np.zeros((grid.nx, nyh)),
            hy=np.zeros((grid.nx - 1, grid.ny)),
            eps_r=raster.eps_r,
            sigma=raster.sigma,
        )

    def copy(self):
        return replace(
            self,
            ez=self.ez.copy(),
            hx=self.hx.copy(),
            hy=self.hy.copy(),
            psi={k: v.copy() for k, v in self.psi.items()},
        )

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in (self.ez, self.hx, self.hy))

    def max_abs(self):
        return max(float(np.max(np.abs(a))) if a.size else 0.0 for a in (self.ez, self.hx, self.hy))


class _PmlSlab:
    """CPML memory for one derivative array along one axis, both faces."""

    def __init__(self, name, n_total, offset, axis, other_len, grid, eps_ref, half):
        # positions (in cells) of the derivative samples along `axis`
        pos = np.arange(n_total) + offset + (0.5 if half else 0.0)
        npml = grid.pml_cells
        n_nodes = grid.nx if axis == 0 else grid.ny
        depth_lo = npml - pos
        depth_hi = pos - (n_nodes - 1 - npml)
        depth = np.maximum(np.maximum(depth_lo, depth_hi), 0.0) / npml
        self.name = name
        self.axis = axis
        self.slices = []
        self.coeffs = []
        sigma_max = PML_REFLECTION_FACTOR * (PML_ORDER + 1) / (ETA0 * grid.dx)
        eps_eff = EPS0 * math.sqrt(eps_ref)
        for idx in (np.nonzero(depth_lo > 0)[0], np.nonzero(depth_hi > 0)[0]):
            if idx.size == 0:
                continue
            sl = slice(int(idx[0]), int(idx[-1]) + 1)
            d = depth[sl]
            sig = sigma_max * d**PML_ORDER
            alpha = PML_ALPHA_MAX * (1.0 - d)
            b = np.exp(-(sig + alpha) * grid.dt / eps_eff)
            with np.errstate(invalid="ignore", divide="ignore"):
                c = np.where(sig + alpha > 0, sig / (sig + alpha) * (b - 1.0), 0.0)
            shape = (-1, 1) if axis == 0 else (1, -1)
            self.slices.append(sl)
            self.coeffs.append((b.reshape(shape), c.reshape(shape)))
        self.other_len = other_len
        self.offset = offset

    def full_profile(self, n):
        """(b, c) over ``n`` axis positions, identity outside the layers."""
        b = np.ones(n)
        c = np.zeros(n)
        for sl, (bs, cs) in zip(self.slices, self.coeffs):
            target = slice(sl.start + self.offset, sl.stop + self.offset)
            b[target] = bs.ravel()
            c[target] = cs.ravel()
        return b, c

    def index(self, sl):
        return (sl, slice(None)) if self.axis == 0 else (slice(None), sl)

    def init_memory(self, psi):
        for k, sl in enumerate(self.slices):
            n = sl.stop - sl.start
            shape = (n, self.other_len) if self.axis == 0 else (self.other_len, n)
            psi[f"{self.name}{k}"] = np.zeros(shape)

    def apply(self, psi, deriv):
        """Add the convolution term to ``deriv`` in place."""
        for k, sl in enumerate(self.slices):
            mem = psi[f"{self.name}{k}"]
            b, c = self.coeffs[k]
            ix = self.index(sl)
            mem *= b
            mem += c * deriv[ix]
            deriv[ix] += mem


class YeeSolver:
    """Precomputed update coefficients for one (raster, grid) pair.

    The solver is stateless apart from coefficients; :meth:`advance` mutates
    a :class:`FieldState` in place.
    """

    def __init__(self, raster, grid):
        if raster.shape != grid.shape:
            raise InvariantViolation(f"raster shape {raster.shape} != grid shape {grid.shape}")
        self.grid = grid
        self.raster = raster
        self.periodic_y = grid.boundary_y == "periodic"
        self.sy = slice(None) if self.periodic_y else slice(1, -1)
        self.interior = (slice(1, -1), self.sy)

        eps = EPS0 * raster.eps_r[self.interior]
        loss = raster.sigma[self.interior] * grid.dt / (2.0 * eps)
        self.ca = (1.0 - loss) / (1.0 + loss)
        self.cb = (grid.dt / eps) / (1.0 + loss) / grid.dx
        self.ch = grid.dt / (MU0 * grid.dx)

        ring = np.concatenate(
            [raster.eps_r[0], raster.eps_r[-1], raster.eps_r[:, 0], raster.eps_r[:, -1]]
        )
        eps_ref = float(np.median(ring))
        self.pml = []
        nx, ny = grid.shape
        nyh = ny if self.periodic_y else ny - 1
        n_ez_y = ny if self.periodic_y else ny - 2
        if grid.boundary_x == "cpml" and grid.pml_cells > 0:
            # d(ez)/dx at hy nodes, d(hy)/dx at interior ez nodes
            self.pml_hy = _PmlSlab("hy", nx - 1, 0, 0, ny, grid, eps_ref, half=True)
            self.pml_ex = _PmlSlab("ex", nx - 2, 1, 0, n_ez_y, grid, eps_ref, half=False)
        else:
            self.pml_hy = self.pml_ex = None
        if grid.boundary_y == "cpml" and grid.pml_cells > 0:
            self.pml_hx = _PmlSlab("hx", ny - 1, 0, 1, nx, grid, eps_ref, half=True)
            self.pml_ey = _PmlSlab("ey", ny - 2, 1, 1, nx - 2, grid, eps_ref, half=False)
        else:
            self.pml_hx = self.pml_ey = None
        self._nyh = nyh
        self._compiled = None

    def compiled_available(self):
        return not self.periodic_y

    def _compiled_setup(self):
        if self._compiled is None:
            nx, ny = self.grid.shape
            ca = np.ones((nx, ny))
            cb = np.zeros((nx, ny))
            ca[self.interior] = self.ca
            cb[self.interior] = self.cb
            prof = {}
            for name, slab, n in (("hx", self.pml_hx, ny - 1), ("hy", self.pml_hy, nx - 1),
                                  ("ex", self.pml_ex, nx), ("ey", self.pml_ey, ny)):
                prof[name] = slab.full_profile(n) if slab is not None else (np.ones(n), np.zeros(n))
            self._compiled = (ca, cb, prof)
        return self._compiled

    def new_compiled_state(self):
        state = FieldState.zeros(self.grid, self.raster)
        nx, ny = self.grid.shape
        state.psi.update(
            full_hx=np.zeros((nx, ny - 1)),
            full_hy=np.zeros((nx - 1, ny)),
            full_ex=np.zeros((nx, ny)),
            full_ey=np.zeros((nx, ny)),
        )
        return state

    def advance_compiled(self, state, src_cells=None, src_values=None):
        """Same update as :meth:`advance` through the compiled loops."""
        from mwave import _kernels

        ca, cb, prof = self._compiled_setup()
        psi = state.psi
        _kernels.update_h(state.ez, state.hx, state.hy, self.ch,
                          psi["full_hx"], *prof["hx"], psi["full_hy"], *prof["hy"])
        _kernels.update_e(state.ez, state.hx, state.hy, ca, cb,
                          psi["full_ex"], *prof["ex"], psi["full_ey"], *prof["ey"])
        if src_cells is not None and len(src_cells[0]):
            np.add.at(state.ez, src_cells, src_values)
        state.step_index += 1

    def _slabs(self):
        return [s for s in (self.pml_hy, self.pml_ex, self.pml_hx, self.pml_ey) if s is not None]

    def new_state(self):
        state = FieldState.zeros(self.grid, self.raster)
        for slab in self._slabs():
            slab.init_memory(state.psi)
        return state

    def ensure_memory(self, state):
        for slab in self._slabs():
            if not any(k.startswith(slab.name) for k in state.psi):
                slab.init_memory(state.psi)

    def advance(self, state, src_cells=None, src_values=None):
        """One leapfrog step: H to n+1/2, Ez to n+1, then soft sources."""
        ez, hx, hy, psi = state.ez, state.hx, state.hy, state.psi

        if self.periodic_y:
            dez_dy = np.roll(ez, -1, axis=1) - ez
        else:
            dez_dy = ez[:, 1:] - ez[:, :-1]
        if self.pml_hx is not None:
            self.pml_hx.apply(psi, dez_dy)
        dez_dx = ez[1:, :] - ez[:-1, :]
        if self.pml_hy is not None:
            self.pml_hy.apply(psi, dez_dx)
        hx -= self.ch * dez_dy
        hy += self.ch * dez_dx

        dhy_dx = hy[1:, self.sy] - hy[:-1, self.sy]
        if self.pml_ex is not None:
            self.pml_ex.apply(psi, dhy_dx)
        if self.periodic_y:
            dhx_dy = hx[1:-1, :] - np.roll(hx[1:-1, :], 1, axis=1)
        else:
            dhx_dy = hx[1:-1, 1:] - hx[1:-1, :-1]
        if self.pml_ey is not None:
            self.pml_ey.apply(psi, dhx_dy)
        dhy_dx -= dhx_dy
        inner = ez[self.interior]
        inner *= self.ca
        inner += self.cb * dhy_dx

        if src_cells is not None and len(src_cells[0]):
            np.add.at(ez, src_cells, src_values)
        state.step_index += 1


def _source_arrays(sources, grid):
    cells, waves = [], []
    for cell, wave in sources:
        i, j = int(cell[0]), int(cell[1])
        if not (0 < i < grid.nx - 1 and (grid.boundary_y == "periodic" or 0 < j < grid.ny - 1)):
            raise InvariantViolation(f"source cell {(i, j)} is not inside the grid")
        cells.append((i, j))
        waves.append(wave)
    idx = (np.array([c[0] for c in cells], dtype=int), np.array([c[1] for c in cells], dtype=int))
    return idx, waves


def _wave_samples(wave, t):
    if hasattr(wave, "value"):
        return np.asarray(wave.value(t), dtype=float)
    return np.asarray(wave(t), dtype=float)


def source_time(step_index, dt):
    """Time at which sources are sampled during step ``step_index -> step_index + 1``."""
    return (step_index + 0.5) * dt


def step(state, grid, sources=()):
    """Advance ``state`` by one time step and return the new state.

    Parameters
    ----------
    state : FieldState
        Not modified.
    grid : GridSpec
    sources : sequence of ((i, j), waveform)
        ``waveform`` is a :class:`PulseSpec`, :class:`RampedSine` or any
        callable of time.

    Raises
    ------
    Diverged
        If any field magnitude exceeds 1e30 or becomes non-finite.
    """
    raster = MaterialRaster(state.eps_r, state.sigma)
    solver = YeeSolver(raster, grid)
    new = state.copy()
    solver.ensure_memory(new)
    cells, waves = _source_arrays(sources, grid)
    t = source_time(state.step_index, grid.dt)
    values = np.array([_wave_samples(w, t) for w in waves], dtype=float)
    solver.advance(new, cells, values)
    if not new.is_finite() or new.max_abs() > DIVERGENCE_LIMIT:
        raise Diverged(f"field diverged at step {new.step_index}")
    return new


@dataclass(frozen=True)
class ProbeTraces:
    """Ez time series at probe cells.

    ``traces[k, n]`` is Ez at probe ``k`` and time ``(n + 1) * dt``;
    ``source_waveforms[s, n]`` is the value injected by source ``s`` during
    step ``n``, at time ``(n + 1/2) * dt``.
    """

    traces: np.ndarray
    dt: float
    source_waveforms: np.ndarray
    probes: tuple

    @property
    def tx_waveform(self):
        return self.source_waveforms[0]

    @property
    def n_steps(self):
        return self.traces.shape[1]

    def times(self):
        return self.dt * (np.arange(self.n_steps) + 1.0)


def round_trip_steps(grid, raster):
    """Steps needed to cross the grid diagonal and back in the slowest medium."""
    diag = math.hypot(grid.nx, grid.ny) * grid.dx
    v_min = C0 / math.sqrt(float(np.max(raster.eps_r)))
    return int(math.ceil(2.0 * diag / v_min / grid.dt))


def run(raster, grid, sources, probes, n_steps, f_max=None, snapshot_every=None,
        snapshot=None, check_every=25, compiled=True):
    """Run a simulation and record Ez at ``probes``.

    Parameters
    ----------
    raster : MaterialRaster
    grid : GridSpec
    sources : sequence of ((i, j), waveform)
    probes : sequence of (i, j)
    n_steps : int
    f_max : float, optional
        When given, the grid resolution is checked against the slowest medium.
    snapshot_every : int, optional
        Call ``snapshot(step_index, ez)`` every that many steps.
    compiled : bool
        Use the compiled update loops when the boundary kinds allow it.

    Returns
    -------
    ProbeTraces
    """
    if n_steps < 1:
        raise InvariantViolation("n_steps must be >= 1")
    if f_max is not None:
        grid.check_resolution(f_max, float(np.max(raster.eps_r)))
    if n_steps < round_trip_steps(grid, raster):
        logger.debug("n_steps=%d shorter than a diagonal round trip", n_steps)

    solver = YeeSolver(raster, grid)
    if compiled and solver.compiled_available():
        state = solver.new_compiled_state()
        advance = solver.advance_compiled
    else:
        state = solver.new_state()
        advance = solver.advance
    cells, waves = _source_arrays(sources, grid)
    t_src = source_time(np.arange(n_steps), grid.dt)
    src_values = np.array([_wave_samples(w, t_src) for w in waves], dtype=float).reshape(len(waves), n_steps)
    probes = tuple((int(i), int(j)) for i, j in probes)
    pi = np.array([p[0] for p in probes], dtype=int)
    pj = np.array([p[1] for p in probes], dtype=int)
    out = np.empty((len(probes), n_steps))

    for n in range(n_steps):
        advance(state, cells, src_values[:, n])
        out[:, n] = state.ez[pi, pj]
        if (n + 1) % check_every == 0 or n == n_steps - 1:
            if not np.isfinite(out[:, n]).all() or state.max_abs() > DIVERGENCE_LIMIT or not state.is_finite():
                raise Diverged(f"field diverged at step {state.step_index}")
        if snapshot_every and snapshot is not None and (n + 1) % snapshot_every == 0:
            snapshot(state.step_index, state.ez)
    return ProbeTraces(traces=out, dt=grid.dt, source_waveforms=src_values, probes=probes)


def yee_energy(before, after, dx):
    """Discrete energy per unit length conserved by the lossless leapfrog.

    ``before`` holds Ez at step n, ``after`` the state one step later (Ez at
    n + 1, H at n + 1/2). Returns ``1/2 eps E^n.E^(n+1) + 1/2 mu |H^(n+1/2)|^2``
    summed over the grid, times the cell area.
    """
    we = 0.5 * EPS0 * np.sum(before.eps_r * before.ez * after.ez)
    wh = 0.5 * MU0 * (np.sum(after.hx**2) + np.sum(after.hy**2))
    return float((we + wh) * dx * dx)
