"""scikit-learn style wrappers around the radar imaging chain.

The stages compose with :class:`sklearn.pipeline.Pipeline`::

    pipe = make_imaging_pipeline(calibration, medium, recon)
    detection = pipe.fit(with_tumor).predict(with_tumor)

Inputs are :class:`~mwave.radar.RadarDataset` objects rather than arrays;
``check_dataset`` plays the role of ``check_array``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from mwave import radar
from mwave.errors import InvariantViolation


def check_dataset(X, kind=None):
    """Validate a radar dataset and optionally its kind.

    Raises
    ------
    InvariantViolation
        ``X`` is not a RadarDataset, has non-finite samples or the wrong kind.
    """
    if not isinstance(X, radar.RadarDataset):
        raise InvariantViolation(f"expected a RadarDataset, got {type(X).__name__}")
    if not np.all(np.isfinite(X.traces)):
        raise InvariantViolation("dataset contains non-finite samples")
    if kind is not None and X.kind != kind:
        raise InvariantViolation(f"expected a {kind} dataset, got {X.kind}")
    return X


def check_image(X):
    if not isinstance(X, radar.EnergyImage):
        raise InvariantViolation(f"expected an EnergyImage, got {type(X).__name__}")
    return X


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class TumorResponseExtractor(BaseEstimator, TransformerMixin):
    """Subtract a tumor-free calibration record.

    Parameters
    ----------
    calibration : RadarDataset
        Acquisition of the same scene without the tumor.
    """

    def __init__(self, calibration=None):
        self.calibration = calibration

    def fit(self, X=None, y=None):
        if self.calibration is None:
            raise InvariantViolation("a calibration dataset is required")
        self.calibration_ = check_dataset(self.calibration, "calibration")
        if X is not None:
            radar.check_compatible(check_dataset(X), self.calibration_)
        return self

    def transform(self, X):
        _check_fitted(self, "calibration_")
        return radar.calibrate(check_dataset(X, "with_tumor"), self.calibration_)


class LossSpreadEqualizer(BaseEstimator, TransformerMixin):
    """Time-dependent gain undoing tissue loss and geometric spreading.

    Parameters
    ----------
    medium : MaterialProperties
        Medium assumed along every path.
    spreading_exponent_per_leg : float
        0.5 for 2D cylindrical spreading.
    """

    def __init__(self, medium=None, spreading_exponent_per_leg=0.5):
        self.medium = medium
        self.spreading_exponent_per_leg = spreading_exponent_per_leg

    def fit(self, X=None, y=None):
        if self.medium is None:
            raise InvariantViolation("an equalisation medium is required")
        if self.spreading_exponent_per_leg < 0:
            raise InvariantViolation("spreading exponent must be >= 0")
        self.exponent_ = 2.0 * self.spreading_exponent_per_leg
        return self

    def transform(self, X):
        _check_fitted(self, "exponent_")
        return radar.equalize(check_dataset(X, "tumor_response"), self.medium, self.exponent_)


class DelayAndSumImager(BaseEstimator, TransformerMixin):
    """Delay-and-sum focusing onto a reconstruction grid.

    Parameters
    ----------
    recon : ReconGrid
    speed : float
        Assumed propagation speed in m/s.
    """

    def __init__(self, recon=None, speed=None):
        self.recon = recon
        self.speed = speed

    def fit(self, X=None, y=None):
        if self.recon is None or self.speed is None or not self.speed > 0:
            raise InvariantViolation("a reconstruction grid and a positive speed are required")
        self.recon_ = self.recon
        return self

    def transform(self, X):
        _check_fitted(self, "recon_")
        return radar.das_image(check_dataset(X, "tumor_response"), self.recon_, self.speed)


class IsovalueDetector(BaseEstimator):
    """Threshold the energy image and report the brightest scatterer."""

    def __init__(self, threshold_db=-1.5):
        self.threshold_db = threshold_db

    def fit(self, X=None, y=None):
        if self.threshold_db > 0:
            raise InvariantViolation("threshold_db must be <= 0")
        self.fitted_ = True
        return self

    def predict(self, X):
        _check_fitted(self, "fitted_")
        return radar.detect(check_image(X), self.threshold_db)


def make_imaging_pipeline(calibration, medium, recon, equalize=True,
                          spreading_exponent_per_leg=0.5, threshold_db=-1.5):
    steps = [("extract", TumorResponseExtractor(calibration))]
    if equalize:
        steps.append(("equalize", LossSpreadEqualizer(medium, spreading_exponent_per_leg)))
    steps.append(("image", DelayAndSumImager(recon, medium.speed)))
    steps.append(("detect", IsovalueDetector(threshold_db)))
    return Pipeline(steps)


def scenario_pipeline(scenario, calibration):
    """Pipeline equivalent to ``scenario.image``."""
    return make_imaging_pipeline(
        calibration, scenario.focus_medium(), scenario.recon_grid(), scenario.equalize,
        scenario.spreading_exponent_per_leg, scenario.threshold_db,
    )
