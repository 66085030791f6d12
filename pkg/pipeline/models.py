from dataclasses import dataclass, field

import numpy as np

from detangle.exceptions import DetangleError
from rasters.models import MaskRLE
from rasters.rle import encode_rle
from semantics.models import Part, BODY_PARTS, HeadCandidate


class ConstraintViolationError(DetangleError):
    pass


@dataclass(frozen=True, eq=False)
class PersonParse:
    """One person's part masks. Parts without pixels are left out of `parts`.

    `index` is 1-based; person 0 in a label raster means unattributed.
    """
    index: int
    parts: dict
    regions: dict = field(default_factory=dict)
    head: HeadCandidate = None

    def __post_init__(self):
        parts = {Part(part): np.asarray(mask, dtype=bool) for part, mask in self.parts.items() if np.any(mask)}
        object.__setattr__(self, 'parts', parts)
        if parts:
            object.__setattr__(self, '_shape', next(iter(parts.values())).shape)

    @property
    def shape(self):
        return getattr(self, '_shape', None)

    def has(self, part):
        return Part(part) in self.parts

    def mask(self, part, shape=None):
        if Part(part) in self.parts:
            return self.parts[Part(part)]
        return np.zeros(shape or self.shape or (0, 0), dtype=bool)

    @property
    def instance_mask(self):
        masks = list(self.parts.values())
        if not masks:
            return np.zeros(self.shape or (0, 0), dtype=bool)
        return np.logical_or.reduce(masks)

    @property
    def area(self):
        return int(np.count_nonzero(self.instance_mask))

    def to_dict(self):
        document = {'index': self.index}
        if self.head is not None:
            document['head'] = {'x': self.head.x, 'y': self.head.y, 'scale': self.head.scale}
        document['instance'] = list(encode_rle(self.instance_mask).runs) if self.parts else []
        document['parts'] = {part.label: list(encode_rle(mask).runs) for part, mask in sorted(self.parts.items())}
        if self.regions:
            document['regions'] = {Part(part).label: list(ids) for part, ids in sorted(self.regions.items())}
        return document

    @classmethod
    def from_dict(cls, document, width, height):
        parts = {
            Part.parse(name): MaskRLE(width=width, height=height, runs=tuple(runs)).bitmask
            for name, runs in document.get('parts', {}).items()
        }
        if Part.BACKGROUND in parts:
            raise ValueError("a person cannot own background pixels")
        head = document.get('head')
        if head is not None:
            head = HeadCandidate(x=int(head['x']), y=int(head['y']), scale=float(head['scale']),
                                 peak_prob=float(head.get('p', 1.0)))
        regions = {Part.parse(name): tuple(ids) for name, ids in document.get('regions', {}).items()}
        return cls(index=int(document['index']), parts=parts, regions=regions, head=head)


@dataclass(frozen=True, eq=False)
class Scene:
    """Everything the assembly programs need from one image.

    `soft` is the pooled, normalized (5, H, W) class probability; `heads` are
    the candidates that kept a head region, aligned with `head_regions`.
    """
    stack: object  # SoftMapStack
    soft: np.ndarray
    foreground: np.ndarray
    semantic: object  # SemanticMap
    heads: list
    head_regions: list
    pool: dict
    image: np.ndarray = None

    @property
    def shape(self):
        return self.foreground.shape

    @property
    def regions(self):
        return [region for part in sorted(self.pool) for region in self.pool[part]]


def label_id(person, part):
    """Label raster id of (person, part); 0 is background."""
    return person * len(BODY_PARTS) + int(part) + 1
