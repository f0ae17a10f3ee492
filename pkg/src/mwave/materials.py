"""Tissue electromagnetic properties.

Values are single-frequency constants tabulated at 6 GHz: fat and tumor
permittivity/conductivity from the normal-vs-tumor breast comparison, skin and
matching-medium permittivity/attenuation from the phantom characterisation.
Where only one of conductivity or attenuation is known the other is derived
with the low-loss plane-wave relation; those derived entries are assumptions:

* ``matching_medium.sigma`` is fitted to a 0.8 dB/cm attenuation at eps_r = 10.
* ``skin.sigma`` is fitted to 16 dB/cm at eps_r = 30.
* ``tumor`` has no tabulated attenuation; ``attenuation_from_conductivity``
  is used for it.
* ``rho`` defaults to 1000 kg/m^3 for every entry.
"""

import math
from collections.abc import Mapping
from dataclasses import dataclass, replace
from typing import Optional

from mwave.constants import EPS0, MU0, NP_TO_DB
from mwave.errors import InvariantViolation, UnknownTissue

DEFAULT_RHO = 1000.0


@dataclass(frozen=True)
class MaterialProperties:
    """Electromagnetic and mass properties of one tissue at one frequency.

    Attributes
    ----------
    name : str
    eps_r : float
        Relative permittivity.
    sigma : float
        Conductivity in S/m.
    atten_db_per_cm : float or None
        One-way amplitude attenuation, only when stated directly.
    rho : float
        Mass density in kg/m^3.
    """

    name: str
    eps_r: float
    sigma: float
    atten_db_per_cm: Optional[float] = None
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not (self.eps_r >= 1.0 and math.isfinite(self.eps_r)):
            raise InvariantViolation(f"{self.name}: eps_r must be >= 1, got {self.eps_r}")
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise InvariantViolation(f"{self.name}: sigma must be >= 0, got {self.sigma}")
        if self.atten_db_per_cm is not None and not (
            self.atten_db_per_cm >= 0.0 and math.isfinite(self.atten_db_per_cm)
        ):
            raise InvariantViolation(
                f"{self.name}: atten_db_per_cm must be finite and >= 0"
            )
        if not (self.rho > 0.0 and math.isfinite(self.rho)):
            raise InvariantViolation(f"{self.name}: rho must be > 0, got {self.rho}")

    @property
    def speed(self):
        """Phase velocity c / sqrt(eps_r) in m/s."""
        return 1.0 / math.sqrt(MU0 * EPS0 * self.eps_r)

    def attenuation_db_per_cm(self):
        """Tabulated attenuation when present, else the conductivity-derived one."""
        if self.atten_db_per_cm is not None:
            return self.atten_db_per_cm
        return attenuation_from_conductivity(self)


def attenuation_from_conductivity(props):
    """Low-loss plane-wave attenuation ``sigma * eta / 2`` in dB/cm.

    ``eta = sqrt(mu0 / (eps0 * eps_r))`` is the lossless wave impedance.
    """
    if props.sigma == 0.0:
        return 0.0
    eta = math.sqrt(MU0 / (EPS0 * props.eps_r))
    alpha_np_per_m = 0.5 * props.sigma * eta
    return NP_TO_DB * alpha_np_per_m / 100.0


def conductivity_from_attenuation(atten_db_per_cm, eps_r):
    """Inverse of :func:`attenuation_from_conductivity`."""
    eta = math.sqrt(MU0 / (EPS0 * eps_r))
    alpha_np_per_m = atten_db_per_cm * 100.0 / NP_TO_DB
    return 2.0 * alpha_np_per_m / eta


def _default_entries():
    return {
        "vacuum": MaterialProperties("vacuum", 1.0, 0.0, 0.0),
        "matching_medium": MaterialProperties(
            "matching_medium", 10.0, conductivity_from_attenuation(0.8, 10.0), 0.8
        ),
        "fat": MaterialProperties("fat", 9.5, 0.4, 0.8),
        "skin": MaterialProperties(
            "skin", 30.0, conductivity_from_attenuation(16.0, 30.0), 16.0
        ),
        "tumor": MaterialProperties("tumor", 46.0, 3.4, None),
    }


class MaterialCatalog(Mapping):
    """Immutable name -> :class:`MaterialProperties` mapping."""

    def __init__(self, entries=None):
        self._entries = dict(_default_entries() if entries is None else entries)

    def __getitem__(self, name):
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownTissue(
                f"unknown tissue '{name}' (known: {', '.join(sorted(self._entries))})"
            ) from None

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def with_overrides(self, overrides):
        """Return a new catalog with field overrides applied.

        ``overrides`` maps tissue name -> {field: value}. Setting ``sigma``
        without ``atten_db_per_cm`` on an entry that carries a tabulated
        attenuation keeps the tabulated value; set both to keep them consistent.
        """
        entries = dict(self._entries)
        for name, fields in overrides.items():
            if name not in entries:
                raise UnknownTissue(f"unknown tissue '{name}'")
            entries[name] = replace(entries[name], **fields)
        return MaterialCatalog(entries)


DEFAULT_CATALOG = MaterialCatalog()


def lookup_tissue(name, freq, catalog=None):
    """Return the catalog entry for ``name``.

    ``freq`` is validated but otherwise unused: the catalog is non-dispersive.
    """
    if not freq > 0:
        raise ValueError(f"frequency must be positive, got {freq}")
    return (DEFAULT_CATALOG if catalog is None else catalog)[name]
