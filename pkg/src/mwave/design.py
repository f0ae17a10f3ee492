"""Antenna sizing equations and scalar matching metrics.

The rectangular patch follows the transmission-line model with the
Hammerstad length extension; the printed monopole uses the empirical
``L2 = 6.2e7 / (f_L sqrt(eps_r))`` sizing rule.
"""

import math
from dataclasses import dataclass

import numpy as np

from mwave.constants import C0
from mwave.errors import NonPhysical, TotalReflection


@dataclass(frozen=True)
class PatchDesign:
    """Rectangular microstrip patch dimensions, all lengths in metres."""

    f0: float
    eps_r: float
    h: float
    W: float
    eps_eff: float
    dL: float
    L_eff: float
    L: float
    gL: float
    gW: float

    def resonance(self):
        return cavity_resonance(self.L, self.dL, self.eps_eff)

    def report(self):
        mm = 1e3
        return {
            "f0": f"{self.f0 / 1e9:.4g} GHz",
            "eps_r": f"{self.eps_r:.4g}",
            "h": f"{self.h * mm:.4g} mm",
            "W": f"{self.W * mm:.4g} mm",
            "eps_eff": f"{self.eps_eff:.4g}",
            "L_eff": f"{self.L_eff * mm:.4g} mm",
            "dL": f"{self.dL * mm:.4g} mm",
            "L": f"{self.L * mm:.4g} mm",
            "gL": f"{self.gL * mm:.4g} mm",
            "gW": f"{self.gW * mm:.4g} mm",
        }


@dataclass(frozen=True)
class MonopoleDesign:
    f_L: float
    eps_r: float
    L2: float

    def report(self):
        return {
            "f_L": f"{self.f_L / 1e9:.4g} GHz",
            "eps_r": f"{self.eps_r:.4g}",
            "L2": f"{self.L2 * 1e3:.4g} mm",
        }


def design_rect_patch(f0, eps_r, h):
    """Six-step rectangular patch design.

    Parameters
    ----------
    f0 : float
        Target resonant frequency in Hz.
    eps_r : float
        Substrate relative permittivity.
    h : float
        Substrate thickness in m.

    Returns
    -------
    PatchDesign
        Width, effective permittivity, effective length, length extension,
        physical length and a ground plane extended by ``6 h`` in each
        direction.

    Raises
    ------
    NonPhysical
        When the substrate is so thick that the fringing extension consumes
        the whole effective length.
    """
    if not f0 > 0:
        raise ValueError(f"f0 must be positive, got {f0}")
    if not eps_r >= 1:
        raise ValueError(f"eps_r must be >= 1, got {eps_r}")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")

    W = C0 / (2.0 * f0) * math.sqrt(2.0 / (eps_r + 1.0))
    eps_eff = (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 * (1.0 + 12.0 * h / W) ** -0.5
    L_eff = C0 / (2.0 * f0 * math.sqrt(eps_eff))
    dL = (
        0.412
        * h
        * ((eps_eff + 0.3) * (W / h + 0.264))
        / ((eps_eff - 0.258) * (W / h + 0.8))
    )
    L = L_eff - 2.0 * dL
    if L <= 0:
        raise NonPhysical(
            f"patch length {L:.3g} m is not positive: substrate h = {h} m is too "
            f"thick for f0 = {f0} Hz"
        )
    return PatchDesign(
        f0=f0,
        eps_r=eps_r,
        h=h,
        W=W,
        eps_eff=eps_eff,
        dL=dL,
        L_eff=L_eff,
        L=L,
        gL=6.0 * h + L,
        gW=6.0 * h + W,
    )


def cavity_resonance(L, dL, eps_eff):
    """Dominant-mode resonance ``c / (2 (L + 2 dL) sqrt(eps_eff))`` in Hz."""
    if not L > 0 or dL < 0 or eps_eff < 1:
        raise ValueError("need L > 0, dL >= 0 and eps_eff >= 1")
    return C0 / (2.0 * (L + 2.0 * dL) * math.sqrt(eps_eff))


def monopole_length(f_L, eps_r):
    """Printed monopole length in metres for lowest frequency ``f_L``."""
    if not f_L > 0:
        raise ValueError(f"f_L must be positive, got {f_L}")
    if not eps_r >= 1:
        raise ValueError(f"eps_r must be >= 1, got {eps_r}")
    return 6.2e7 / (f_L * math.sqrt(eps_r))


def design_monopole(f_L, eps_r):
    return MonopoleDesign(f_L=f_L, eps_r=eps_r, L2=monopole_length(f_L, eps_r))


def s11_db_to_gamma(s11_db):
    if s11_db > 0:
        raise ValueError(f"S11 of a passive port must be <= 0 dB, got {s11_db}")
    return 10.0 ** (s11_db / 20.0)


def gamma_to_vswr(gamma):
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"|gamma| must lie in [0, 1], got {gamma}")
    if gamma == 1.0:
        raise TotalReflection("total reflection: VSWR is infinite")
    return (1.0 + gamma) / (1.0 - gamma)


def s11_db_to_vswr(s11_db):
    """Voltage standing-wave ratio for a return loss given in dB.

    Raises :class:`~mwave.errors.TotalReflection` (``.vswr`` is ``inf``) at
    0 dB.
    """
    return gamma_to_vswr(s11_db_to_gamma(s11_db))


class S11Curve:
    """Sampled reflection coefficient magnitude versus frequency."""

    def __init__(self, freqs, s11_db):
        freqs = np.asarray(freqs, dtype=float)
        s11_db = np.asarray(s11_db, dtype=float)
        if freqs.ndim != 1 or freqs.shape != s11_db.shape:
            raise ValueError("freqs and s11_db must be 1-D arrays of equal length")
        if freqs.size < 2:
            raise ValueError("an S11 curve needs at least 2 samples")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(s11_db > 0):
            raise ValueError("S11 must be <= 0 dB at every sample (passive structure)")
        self.freqs = freqs
        self.s11_db = s11_db

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (freq_hz, s11_db)")
        return cls(data[:, 0], data[:, 1])


def _crossing(f1, s1, f2, s2, level):
    return f1 + (level - s1) * (f2 - f1) / (s2 - s1)


def bandwidth_at_threshold(curve, threshold_db=-10.0):
    """Maximal frequency intervals over which ``S11 <= threshold_db``.

    Band edges between samples are placed by linear interpolation.

    Returns
    -------
    list of (float, float)
    """
    if not threshold_db < 0:
        raise ValueError("threshold must be negative")
    f, s = curve.freqs, curve.s11_db
    inside = s <= threshold_db
    bands = []
    start = f[0] if inside[0] else None
    for k in range(1, f.size):
        if inside[k] and not inside[k - 1]:
            start = _crossing(f[k - 1], s[k - 1], f[k], s[k], threshold_db)
        elif inside[k - 1] and not inside[k]:
            bands.append((float(start), float(_crossing(f[k - 1], s[k - 1], f[k], s[k], threshold_db))))
            start = None
    if start is not None:
        bands.append((float(start), float(f[-1])))
    return bands
