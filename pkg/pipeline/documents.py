"""parse.json / gt.json: persons with their instance and part masks as run lengths."""
from detangle.commands import read_json
from rasters.models import MaskRLE
from rasters.rle import encode_rle
from .models import PersonParse


def persons_document(persons, width, height, **extra):
    return {'width': width, 'height': height, 'persons': [person.to_dict() for person in persons], **extra}


def read_persons(path):
    """(persons, width, height) of a parse or ground-truth document."""
    document = read_json(path)
    width, height = int(document['width']), int(document['height'])
    persons = [PersonParse.from_dict(entry, width, height) for entry in document['persons']]
    return persons, width, height


def instance_masks(persons, width, height):
    """{person index: MaskRLE} for a .masks.json document."""
    empty = MaskRLE(width=width, height=height, runs=(width * height,))
    return {person.index: encode_rle(person.instance_mask) if person.parts else empty for person in persons}
