"""Run configuration: a small INI-like grammar with unit suffixes.

::

    # comment
    [pulse]
    fwhm = 200 ps
    amplitude = 1

Values are SI unless suffixed. Every key must appear in :data:`SCHEMA`
(``[materials]`` takes ``<tissue>.<field>`` keys); unknown keys are errors.
"""

import math
import re
from dataclasses import dataclass, field, replace

from mwave.errors import InvariantViolation, MwaveError, ParseError, UnknownKey, UnknownTissue
from mwave.fdtd import PULSE_SHAPES, PulseSpec
from mwave.materials import DEFAULT_CATALOG
from mwave.phantom import PhantomSpec
from mwave.scenario import Scenario

UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "freq": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "float": {},
    "db": {"db": 1.0},
    "volt": {"v": 1.0, "mv": 1e-3},
}

# section -> key -> (kind, default); defaults are written as config text
SCHEMA = {
    "grid": {
        "dx": ("length", "0.5 mm"),
        "courant": ("float", "0.7"),
        "pml_cells": ("int", "10"),
        "margin": ("length", "5 mm"),
        "n_steps": ("int", "0"),
        "f_max": ("freq", "0"),
    },
    "phantom": {
        "breast_radius": ("length", "78 mm"),
        "skin_thickness": ("length", "2 mm"),
        "tumor_diameter": ("length", "10 mm"),
        "tumor_depth": ("length", "26 mm"),
        "tumor_angle": ("angle", "-90 deg"),
        "center_x": ("length", "0"),
        "center_y": ("length", "0"),
        "background": ("tissue", "matching_medium"),
        "skin": ("tissue", "skin"),
        "fat": ("tissue", "fat"),
        "tumor": ("tissue", "tumor"),
    },
    "array": {
        "n_elements": ("int", "8"),
        "standoff": ("length", "5 mm"),
        "arc_center": ("angle", "-90 deg"),
        "arc_span": ("angle", "150 deg"),
    },
    "pulse": {
        "amplitude": ("volt", "1"),
        "fwhm": ("time", "200 ps"),
        "t0": ("time", "0"),
        "shape": ("choice:" + "|".join(PULSE_SHAPES), "gaussian"),
    },
    "pipeline": {
        "focus_material": ("tissue", "fat"),
        "spreading_exponent_per_leg": ("float", "0.5"),
        "equalize": ("bool", "true"),
        "threshold_db": ("db", "-1.5"),
        "recon_dx": ("length", "1 mm"),
        "recon_radius": ("length", "0"),
    },
    "sweep": {
        "depths": ("list:length", "10 mm, 20 mm, 30 mm, 40 mm"),
        "medium": ("tissue", "matching_medium"),
        "n_elements": ("int", "2"),
        "arc_span": ("angle", "20 deg"),
        "sar_freqs": ("list:freq", "2 GHz, 3 GHz, 4 GHz"),
        "sar_amplitude": ("float", "1"),
        "sar_ramp_periods": ("float", "5"),
        "sar_measure_periods": ("float", "3"),
    },
}

MATERIAL_FIELDS = {"eps_r": "float", "sigma": "float", "atten_db_per_cm": "float", "rho": "float"}

_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-z]*)\s*$")


def parse_quantity(text, kind):
    """Parse ``"200 ps"``-style text to an SI float for ``kind``."""
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")
    value = float(m.group(1))
    unit = m.group(2).lower()
    if not unit:
        return value
    table = UNITS[kind]
    if unit not in table:
        allowed = ", ".join(sorted(table)) or "none"
        raise ValueError(f"unit '{m.group(2)}' not valid for a {kind} value (allowed: {allowed})")
    return value * table[unit]


def _convert(text, kind):
    if kind == "int":
        value = parse_quantity(text, "float")
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if kind == "bool":
        low = text.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind == "tissue":
        return text.strip()
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split("|")
        if text.strip() not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text.strip()
    if kind.startswith("list:"):
        inner = kind.split(":", 1)[1]
        return tuple(parse_quantity(part, inner) for part in text.split(",") if part.strip())
    return parse_quantity(text, kind)


@dataclass
class RunConfig:
    """Resolved configuration: ``sections[section][key]`` holds SI values."""

    sections: dict
    materials: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.sections[section]

    def catalog(self):
        return DEFAULT_CATALOG.with_overrides(self.materials)

    def phantom_spec(self):
        p = self["phantom"]
        return PhantomSpec(
            breast_radius=p["breast_radius"],
            skin_thickness=p["skin_thickness"],
            tumor_diameter=p["tumor_diameter"] if p["tumor_diameter"] > 0 else None,
            tumor_depth=p["tumor_depth"],
            tumor_angle=p["tumor_angle"],
            center=(p["center_x"], p["center_y"]),
            materials={r: p[r] for r in ("background", "skin", "fat", "tumor")},
        )

    def pulse(self):
        p = self["pulse"]
        return PulseSpec(
            amplitude=p["amplitude"],
            fwhm=p["fwhm"],
            t0=p["t0"] if p["t0"] > 0 else None,
            shape=p["shape"],
        )

    def scenario(self):
        g, a, pl = self["grid"], self["array"], self["pipeline"]
        return Scenario(
            phantom_spec=self.phantom_spec(),
            pulse=self.pulse(),
            n_elements=a["n_elements"],
            standoff=a["standoff"],
            arc_center=a["arc_center"],
            arc_span=a["arc_span"],
            dx=g["dx"],
            courant=g["courant"],
            pml_cells=g["pml_cells"],
            margin=g["margin"],
            n_steps=g["n_steps"],
            f_max=g["f_max"],
            catalog=self.catalog(),
            focus_material=pl["focus_material"],
            spreading_exponent_per_leg=pl["spreading_exponent_per_leg"],
            equalize=pl["equalize"],
            threshold_db=pl["threshold_db"],
            recon_dx=pl["recon_dx"],
            recon_radius=pl["recon_radius"],
        )

    def sweep_scenario(self):
        """Scenario for the depth sweep: the ``[sweep]`` medium fills the
        fat region and is used for focusing, with a ``[sweep]``-sized array."""
        s = self["sweep"]
        base = self.scenario()
        mats = dict(base.phantom_spec.materials, fat=s["medium"])
        return replace(
            base,
            phantom_spec=replace(base.phantom_spec, materials=mats),
            focus_material=s["medium"],
            n_elements=s["n_elements"],
            arc_span=s["arc_span"],
        )

    def validate(self):
        try:
            catalog = self.catalog()
            for section, key in (("phantom", "background"), ("phantom", "skin"), ("phantom", "fat"),
                                 ("phantom", "tumor"), ("pipeline", "focus_material"), ("sweep", "medium")):
                catalog[self[section][key]]
            for scen in (self.scenario(), self.sweep_scenario()):
                scen.validate()
            if any(d < 0 for d in self["sweep"]["depths"]):
                raise InvariantViolation("sweep depths must be non-negative")
            for d in self["sweep"]["depths"]:
                self.sweep_scenario().phantom_spec.with_depth(d)
            if any(f <= 0 for f in self["sweep"]["sar_freqs"]):
                raise InvariantViolation("SAR frequencies must be positive")
        except (InvariantViolation, UnknownTissue):
            raise
        except (MwaveError, ValueError, TypeError) as exc:
            raise InvariantViolation(str(exc)) from exc
        return self


def defaults():
    sections = {
        sec: {key: _convert(default, kind) for key, (kind, default) in keys.items()}
        for sec, keys in SCHEMA.items()
    }
    return RunConfig(sections)


def parse_config(text, validate=True):
    """Parse configuration text; missing keys take their defaults.

    Raises
    ------
    ParseError
        Malformed line or value.
    UnknownKey
        Section or key not in the schema.
    InvariantViolation
        Resolved values violate a model invariant.
    """
    cfg = defaults()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, f"malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section != "materials" and section not in SCHEMA:
                raise UnknownKey(section, "(section)")
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ParseError(lineno, "key outside of any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError(lineno, "empty key")
        if section == "materials":
            tissue, _, fname = key.partition(".")
            if fname not in MATERIAL_FIELDS or tissue not in DEFAULT_CATALOG:
                raise UnknownKey(section, key)
            kind = MATERIAL_FIELDS[fname]
        else:
            if key not in SCHEMA[section]:
                raise UnknownKey(section, key)
            kind = SCHEMA[section][key][0]
        try:
            converted = _convert(value, kind)
        except ValueError as exc:
            raise ParseError(lineno, f"{section}.{key}: {exc}") from None
        if section == "materials":
            cfg.materials.setdefault(tissue, {})[fname] = converted
        else:
            cfg.sections[section][key] = converted
    return cfg.validate() if validate else cfg


def load_config(path, validate=True):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), validate=validate)


def default_table():
    """(section, key, default) rows, for documentation."""
    return [(sec, key, default) for sec, keys in SCHEMA.items() for key, (_, default) in keys.items()]
