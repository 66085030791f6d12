import numpy as np

from rasters.models import LabelRaster
from semantics.models import Part, BODY_PARTS
from .models import label_id


def legend(person_count):
    entries = {0: (0, Part.BACKGROUND.label)}
    for person in range(person_count + 1):
        for part in BODY_PARTS:
            entries[label_id(person, part)] = (person, part.label)
    return entries


def paint_labels(persons, semantic, soft):
    """Label raster of (person, part) ids.

    A pixel covered by several (person, part) masks takes the one whose part is
    most probable there, the first in person then part order on ties. Foreground
    pixels no person covers keep their semantic part with person 0.
    """
    height, width = semantic.shape
    labels = np.zeros((height, width), dtype=np.uint16)
    unattributed = semantic.foreground
    labels[unattributed] = semantic.labels[unattributed].astype(np.uint16) + 1

    layers, ids = [], []
    for person in persons:
        for part, mask in sorted(person.parts.items()):
            layers.append(np.where(mask, soft[part], -np.inf))
            ids.append(label_id(person.index, part))
    if layers:
        scores = np.stack(layers)
        covered = np.isfinite(scores).any(axis=0)
        winner = np.asarray(ids, dtype=np.uint16)[scores.argmax(axis=0)]
        labels[covered] = winner[covered]
    count = max((person.index for person in persons), default=0)
    return LabelRaster(width=width, height=height, labels=labels, legend=legend(count))
