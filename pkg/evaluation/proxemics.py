"""Geometric features of a pair of parsed persons."""
import itertools

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from semantics.models import Part

UPPER_BODY = (Part.HEAD, Part.TORSO, Part.ARM)

# distance reported when either person lacks the part
MISSING_DISTANCE = 10.0

# (first part, second part) min/max distances, then head dx, head dy, scale difference
FEATURE_NAMES = tuple(
    f"{kind}_{a.label}_{b.label}" for a, b in itertools.product(UPPER_BODY, repeat=2) for kind in ('min', 'max')
) + ('head_dx', 'head_dy', 'scale_difference')


def _boundary(mask):
    return np.argwhere(mask & ~ndimage.binary_erosion(mask))


def mask_distances(first, second):
    """Smallest and largest pixel-to-pixel distance between two non-empty masks."""
    nearest = ndimage.distance_transform_edt(~first)[second].min()
    farthest = cdist(_boundary(first), _boundary(second)).max()
    return float(nearest), float(farthest)


def proxemics_features(first, second, reference_height=150.0):
    """Feature vector ordered as FEATURE_NAMES.

    Distances are divided by the reference height at the mean scale of the two
    persons; both must carry a head candidate.
    """
    if first.head is None or second.head is None:
        raise ValueError("both persons need a head to compute proxemics features")
    unit = reference_height * (first.head.scale + second.head.scale) / 2
    features = []
    for a, b in itertools.product(UPPER_BODY, repeat=2):
        if first.has(a) and second.has(b):
            features.extend(d / unit for d in mask_distances(first.mask(a), second.mask(b)))
        else:
            features.extend((MISSING_DISTANCE, MISSING_DISTANCE))
    features.append(abs(second.head.x - first.head.x) / unit)
    features.append(abs(second.head.y - first.head.y) / unit)
    features.append(abs(second.head.scale - first.head.scale))
    return np.asarray(features)
