from dataclasses import dataclass, field

import numpy as np

from semantics.models import BODY_PARTS


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Labelled persons of one image; each person's instance mask is the union of its parts."""
    name: str
    width: int
    height: int
    persons: list

    def __post_init__(self):
        for person in self.persons:
            if person.shape not in (None, (self.height, self.width)):
                raise ValueError(f"{self.name}: person {person.index} is {person.shape}, "
                                 f"image is {(self.height, self.width)}")


@dataclass(frozen=True)
class Matches:
    """Best-match instance and part IoUs of one image or of a pooled data set.

    `forward` holds one entry per ground-truth person, `backward` one per
    prediction. Part arrays are (persons, 4) with NaN where the person lacks the part.
    """
    forward: np.ndarray
    backward: np.ndarray
    forward_parts: np.ndarray = field(default_factory=lambda: np.zeros((0, len(BODY_PARTS))))
    backward_parts: np.ndarray = field(default_factory=lambda: np.zeros((0, len(BODY_PARTS))))

    @classmethod
    def pool(cls, matches):
        matches = list(matches)
        if not matches:
            return cls(forward=np.zeros(0), backward=np.zeros(0))
        return cls(
            forward=np.concatenate([m.forward for m in matches]),
            backward=np.concatenate([m.backward for m in matches]),
            forward_parts=np.concatenate([m.forward_parts for m in matches]),
            backward_parts=np.concatenate([m.backward_parts for m in matches]),
        )


@dataclass(frozen=True)
class ScoreReport:
    """Forward (ground truth to prediction) and backward mean IoUs, all in [0, 1]."""
    images: int
    forward: float
    backward: float
    part_forward: float
    part_backward: float
    per_part: dict
    curve: list  # (threshold, forward fraction, backward fraction)

    def to_dict(self):
        return {
            'images': self.images,
            'instance': {'forward': self.forward, 'backward': self.backward},
            'part': {'forward': self.part_forward, 'backward': self.part_backward},
            'per_part': {part.label: {'forward': f, 'backward': b} for part, (f, b) in self.per_part.items()},
            'curve': [{'threshold': t, 'forward': f, 'backward': b} for t, f, b in self.curve],
        }
