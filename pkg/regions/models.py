from dataclasses import dataclass

import numpy as np

from detangle.exceptions import DetangleError
from semantics.models import Part


class InconsistentCoverError(DetangleError):
    pass


@dataclass(frozen=True, eq=False)
class Region:
    """One candidate part region."""
    id: int
    part: Part
    mask: object  # MaskRLE
    area: int
    color_hist: np.ndarray
    centroid: tuple

    @property
    def bitmask(self):
        return self.mask.bitmask

    def to_dict(self):
        return {
            'id': self.id,
            'part': self.part.label,
            'area': self.area,
            'centroid': list(self.centroid),
            'runs': list(self.mask.runs),
            'histogram': {str(k): round(float(v), 9) for k, v in enumerate(self.color_hist) if v > 0},
        }


@dataclass(frozen=True, eq=False)
class Instance:
    """A person candidate: a head region, plus assigned torso pieces in stage two."""
    index: int
    head: object  # HeadCandidate
    mask: np.ndarray

    @property
    def scale(self):
        return self.head.scale


@dataclass(frozen=True)
class CostFeatures:
    """Unweighted terms of the assignment cost of one region to one instance."""
    q: float
    r: float
    d: float


@dataclass(frozen=True, eq=False)
class PairwiseExclusions:
    """Region-pair IoU (q_mn) and colour-histogram L1 distance (h_uv)."""
    iou: np.ndarray
    color: np.ndarray

    def overlapping_pairs(self, tau):
        m, n = np.nonzero(np.triu(self.iou > tau, k=1))
        return list(zip(m.tolist(), n.tolist()))

    def color_pairs(self, epsilon):
        u, v = np.nonzero(np.triu(self.color > epsilon, k=1))
        return list(zip(u.tolist(), v.tolist()))
