import numpy as np
from scipy import ndimage

from semantics.models import BODY_PARTS
from .models import PersonParse


def connected_components_baseline(semantic):
    """One pseudo-person per 4-connected foreground component, keeping its part labels."""
    components, count = ndimage.label(semantic.foreground)
    persons = []
    for label in range(1, count + 1):
        component = components == label
        parts = {part: component & semantic.mask(part) for part in BODY_PARTS}
        persons.append(PersonParse(index=label, parts=parts))
    return persons
