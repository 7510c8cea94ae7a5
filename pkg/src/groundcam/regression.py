"""Per-class affine regression from detector boxes to ground-contact pixels.

Each object class gets an independent 2x5 weight matrix W mapping the box
feature vector (xmin, ymin, xmax, ymax, 1) to the pixel where the object
touches the carpet. The u and v rows are fitted by separate ordinary least
squares; there is no regularization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PixelPoint
from .optim import linear_least_squares

KNOWN_CLASSES = ("ball", "robot", "goal")

MIN_SAMPLES_PER_CLASS = 5

BOTTOM_CENTER_WEIGHTS = np.array(
    [
        [0.5, 0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
    ]
)


class RegressionError(ValueError):
    """Base class for regressor failure modes."""


class UnknownClass(RegressionError):
    """Prediction requested for a class the regressor does not cover."""


class InsufficientSamples(RegressionError):
    """A class has fewer training samples than the minimum."""


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned pixel box, xmin < xmax and ymin < ymax."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        values = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(map(math.isfinite, values)):
            raise ValueError("box coordinates must be finite")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(
                f"box must have positive extent, got ({self.xmin}, {self.ymin}, "
                f"{self.xmax}, {self.ymax})"
            )

    @property
    def features(self) -> np.ndarray:
        return np.array([self.xmin, self.ymin, self.xmax, self.ymax, 1.0])

    @property
    def bottom_center(self) -> PixelPoint:
        return PixelPoint((self.xmin + self.xmax) / 2.0, self.ymax)


@dataclass(frozen=True, slots=True)
class RegressionSample:
    """One annotated training example for one class."""

    label: str
    bbox: BoundingBox
    ground_pixel: PixelPoint

    def __post_init__(self) -> None:
        if self.label not in KNOWN_CLASSES:
            raise ValueError(
                f"class {self.label!r} is not one of {KNOWN_CLASSES}"
            )


@dataclass(frozen=True, eq=False)
class ClassModel:
    """Weights of one class plus the training RMS over stacked u, v residuals."""

    weights: np.ndarray
    rmse_px: float

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.shape != (2, 5):
            raise ValueError(f"weights must be (2, 5), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True, eq=False)
class GroundRegressor:
    """Immutable bundle of per-class ground-point models."""

    classes: dict[str, ClassModel]

    def __post_init__(self) -> None:
        unknown = set(self.classes) - set(KNOWN_CLASSES)
        if unknown:
            raise ValueError(f"unsupported classes: {sorted(unknown)}")
        object.__setattr__(self, "classes", dict(self.classes))

    def covered(self) -> tuple[str, ...]:
        return tuple(sorted(self.classes))


def predict(regressor: GroundRegressor, label: str, bbox: BoundingBox) -> PixelPoint:
    """Ground-contact pixel for one detection box.

    The map is affine in the box coordinates, so predictions interpolate
    linearly between boxes. Raises UnknownClass for uncovered labels.
    """
    model = regressor.classes.get(label)
    if model is None:
        raise UnknownClass(
            f"no model for class {label!r}; covered: {sorted(regressor.classes)}"
        )
    u, v = model.weights @ bbox.features
    return PixelPoint(float(u), float(v))


def fit(samples: list[RegressionSample]) -> GroundRegressor:
    """Fit one independent 2x5 model per class present in the samples.

    Every class needs at least 5 samples. Adding samples of one class never
    changes another class's weights. Raises RankDeficient (from the linear
    solver) when a class's boxes do not span the feature space, for example
    when every box is identical.
    """
    by_class: dict[str, list[RegressionSample]] = {}
    for sample in samples:
        by_class.setdefault(sample.label, []).append(sample)
    if not by_class:
        raise InsufficientSamples("no training samples given")

    classes: dict[str, ClassModel] = {}
    for label in sorted(by_class):
        group = by_class[label]
        if len(group) < MIN_SAMPLES_PER_CLASS:
            raise InsufficientSamples(
                f"class {label!r} has {len(group)} samples, needs "
                f"{MIN_SAMPLES_PER_CLASS}"
            )
        design = np.vstack([s.bbox.features for s in group])
        targets_u = np.array([s.ground_pixel.u for s in group])
        targets_v = np.array([s.ground_pixel.v for s in group])
        wu = linear_least_squares(design, targets_u)
        wv = linear_least_squares(design, targets_v)
        weights = np.vstack([wu, wv])
        predicted = design @ weights.T
        observed = np.column_stack([targets_u, targets_v])
        rmse = math.sqrt(float(np.mean((predicted - observed) ** 2)))
        classes[label] = ClassModel(weights=weights, rmse_px=rmse)
    return GroundRegressor(classes=classes)


def bottom_center_regressor(
    labels: tuple[str, ...] = KNOWN_CLASSES,
) -> GroundRegressor:
    """Untrained fallback: the box's bottom-center is the ground pixel."""
    return GroundRegressor(
        classes={
            label: ClassModel(weights=BOTTOM_CENTER_WEIGHTS.copy(), rmse_px=0.0)
            for label in labels
        }
    )
