from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from detangle.exceptions import DetangleError
from rasters.models import LabelRaster


class EmptyStackError(DetangleError):
    pass


class CapacityOverflowError(DetangleError):
    pass


class Part(IntEnum):
    """Class order of the soft map stack; also the semantic label values."""
    HEAD = 0
    TORSO = 1
    ARM = 2
    LEG = 3
    BACKGROUND = 4

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def parse(cls, name):
        return cls[name.upper()]


BODY_PARTS = (Part.HEAD, Part.TORSO, Part.ARM, Part.LEG)

# part types assembled by the integer programs
REGION_PARTS = (Part.TORSO, Part.ARM, Part.LEG)


@dataclass(frozen=True, eq=False)
class SoftMapStack:
    """Per-class, per-scale probability rasters at full output resolution.

    `maps` has shape (5, scales, height, width) in `Part` order; `factors` are
    the image downsizing factors of the scale levels.
    """
    width: int
    height: int
    factors: tuple
    maps: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.float32)
        expected = (len(Part), len(self.factors), self.height, self.width)
        if maps.shape != expected:
            raise ValueError(f"stack shape {maps.shape}, expected {expected}")
        if not np.all(np.isfinite(maps)) or np.any(maps < 0):
            raise ValueError("stack probabilities must be finite and non-negative")
        if any(f <= 0 for f in self.factors):
            raise ValueError("downsizing factors must be positive")
        maps.setflags(write=False)
        object.__setattr__(self, 'maps', maps)
        object.__setattr__(self, 'factors', tuple(float(f) for f in self.factors))

    @property
    def shape(self):
        return (self.height, self.width)

    def nearest_scale_index(self, scale):
        """Index of the level whose factor is closest to 1/scale."""
        factors = np.asarray(self.factors)
        return int(np.argmin(np.abs(factors - 1.0 / scale)))

    def at_scale(self, part, scale):
        return self.maps[int(part), self.nearest_scale_index(scale)]


@dataclass(frozen=True)
class HeadCandidate:
    """A person-instance anchor found on the pooled head map."""
    x: int
    y: int
    scale: float
    peak_prob: float

    @property
    def center(self):
        return (self.x, self.y)

    @property
    def selection_cost(self):
        """p_j: one minus the peak head probability."""
        return 1.0 - self.peak_prob

    def to_dict(self):
        return {'x': int(self.x), 'y': int(self.y), 'scale': float(self.scale), 'p': float(self.peak_prob)}

    @classmethod
    def from_dict(cls, document):
        return cls(x=int(document['x']), y=int(document['y']),
                   scale=float(document['scale']), peak_prob=float(document['p']))


@dataclass(frozen=True, eq=False)
class SemanticMap:
    """Hard 5-class labelling; values are `Part` members."""
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.ndim != 2 or labels.min(initial=0) < 0 or labels.max(initial=0) > Part.BACKGROUND:
            raise ValueError("semantic labels must be a 2-D grid of part ids")
        labels.setflags(write=False)
        object.__setattr__(self, 'labels', labels)

    @property
    def shape(self):
        return self.labels.shape

    @property
    def foreground(self):
        return self.labels != Part.BACKGROUND

    def mask(self, part):
        return self.labels == int(part)

    def area(self, part):
        return int(np.count_nonzero(self.labels == int(part)))

    def as_label_raster(self):
        height, width = self.shape
        legend = {int(part): (0, part.label) for part in Part}
        return LabelRaster(width=width, height=height, labels=self.labels.astype(np.uint16), legend=legend)

    @classmethod
    def from_label_raster(cls, raster):
        lookup = np.full(max(raster.legend) + 1, Part.BACKGROUND, dtype=np.int8)
        for label_id, (_, part) in raster.legend.items():
            lookup[label_id] = Part.parse(part)
        return cls(labels=lookup[raster.labels])


def _by_part(values):
    return {Part.parse(name) if isinstance(name, str) else Part(name): float(v) for name, v in values.items()}


@dataclass(frozen=True)
class ReferenceAnthropometry:
    """Part sizes of the reference person; lengths in pixels, areas in pixels squared.

    Lengths and areas scale with an instance's scale s (lengths by s, areas by s**2).
    """
    reference_height: float = 150.0
    head_radius: float = 12.0
    target_area: dict = field(default_factory=lambda: {Part.TORSO: 2400.0, Part.ARM: 1200.0, Part.LEG: 1800.0})
    max_area: dict = field(default_factory=lambda: {Part.TORSO: 4800.0, Part.ARM: 3000.0, Part.LEG: 4200.0})
    range_radius: dict = field(default_factory=lambda: {Part.TORSO: 85.0, Part.ARM: 95.0, Part.LEG: 150.0})

    def __post_init__(self):
        for name in ('target_area', 'max_area', 'range_radius'):
            object.__setattr__(self, name, _by_part(getattr(self, name)))
        if self.reference_height <= 0 or self.head_radius <= 0:
            raise ValueError("reference height and head radius must be positive")
        for part, target in self.target_area.items():
            if not 0 < target < self.max_area[part]:
                raise ValueError(f"{part.label}: need 0 < target area < max area")
        if any(r <= 0 for r in self.range_radius.values()):
            raise ValueError("range radii must be positive")

    def head_radius_at(self, scale):
        return self.head_radius * scale

    def range_radius_at(self, part, scale):
        return self.range_radius[Part(part)] * scale

    def distance_unit(self, scale):
        """Normalizer of point-to-point distances for an instance of this scale."""
        return self.reference_height * scale

    def slack_bound(self, part):
        """Largest possible |normalized area - target| under the hard size cap."""
        target, cap = self.target_area[Part(part)], self.max_area[Part(part)]
        return max(target, cap - target)

    def scaled(self, factor):
        """The same person proportions for a reference height multiplied by `factor`."""
        return replace(
            self,
            reference_height=self.reference_height * factor,
            head_radius=self.head_radius * factor,
            target_area={p: v * factor ** 2 for p, v in self.target_area.items()},
            max_area={p: v * factor ** 2 for p, v in self.max_area.items()},
            range_radius={p: v * factor for p, v in self.range_radius.items()},
        )

    def to_dict(self):
        return {
            'reference_height': self.reference_height,
            'head_radius': self.head_radius,
            'target_area': {p.label: v for p, v in self.target_area.items()},
            'max_area': {p.label: v for p, v in self.max_area.items()},
            'range_radius': {p.label: v for p, v in self.range_radius.items()},
        }

    @classmethod
    def from_dict(cls, document, base=None):
        base = base or cls()
        merged = base.to_dict()
        for key, value in document.items():
            if isinstance(value, dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return cls(**merged)

    @classmethod
    def from_settings(cls):
        from django.conf import settings
        return cls.from_dict(settings.DETANGLE['ANTHROPOMETRY'], base=cls())
