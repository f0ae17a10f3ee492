"""Microwave breast imaging toolkit: 2D FDTD, UWB radar imaging, antenna
design equations and SAR dosimetry."""

from mwave.errors import MwaveError

__version__ = "0.1.0"

__all__ = ["MwaveError", "__version__"]
