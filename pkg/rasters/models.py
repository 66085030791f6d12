from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from detangle.exceptions import DetangleError


class MalformedRasterError(DetangleError):
    pass


class DimensionMismatchError(DetangleError):
    pass


class RunLengthError(DetangleError):
    pass


@dataclass(frozen=True, eq=False)
class RasterF32:
    """A row-major float grid, one value per pixel."""
    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32).reshape(self.height, self.width)
        if not np.all(np.isfinite(data)):
            raise MalformedRasterError("raster contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_array(cls, array):
        array = np.asarray(array, dtype=np.float32)
        height, width = array.shape
        return cls(width=width, height=height, data=array)


@dataclass(frozen=True)
class MaskRLE:
    """Row-major run lengths, alternating background/foreground, background first."""
    width: int
    height: int
    runs: tuple = field(default=())

    @property
    def shape(self):
        return (self.height, self.width)

    @cached_property
    def bitmask(self):
        from .rle import decode_rle
        mask = decode_rle(self)
        mask.setflags(write=False)
        return mask

    @property
    def area(self):
        return int(sum(self.runs[1::2]))

    def to_dict(self, mask_id=None):
        document = {'runs': [int(r) for r in self.runs]}
        if mask_id is not None:
            document = {'id': mask_id, **document}
        return document


@dataclass(frozen=True, eq=False)
class LabelRaster:
    """A row-major grid of label ids with a legend id -> (person index, part name)."""
    width: int
    height: int
    labels: np.ndarray
    legend: dict

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint16).reshape(self.height, self.width)
        missing = set(np.unique(labels).tolist()) - set(self.legend)
        if missing:
            raise MalformedRasterError(f"label ids {sorted(missing)} are not in the legend")
        labels.setflags(write=False)
        object.__setattr__(self, 'labels', labels)

    def person_of(self):
        """Per-pixel person index (0 = unattributed or background)."""
        lookup = np.zeros(max(self.legend) + 1, dtype=np.int32)
        for label_id, (person, _) in self.legend.items():
            lookup[label_id] = person
        return lookup[self.labels]
