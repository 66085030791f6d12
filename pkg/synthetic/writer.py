from pathlib import Path

from PIL import Image

from detangle.commands import write_json
from pipeline.documents import persons_document
from rasters.formats import write_label_raster, write_masks
from semantics.stack import IMAGE, save_stack


def write_fixture(fixture, out):
    """stack/ (with image.png), proposals.masks.json, gt.json, anthro.json and the labels raster pair."""
    out = Path(out)
    height, width = fixture.shape
    save_stack(out / 'stack', fixture.stack)
    Image.fromarray(fixture.image).save(out / 'stack' / IMAGE)
    write_masks(out / 'proposals.masks.json', dict(enumerate(fixture.proposals)), width, height)
    write_json(out / 'gt.json', persons_document(fixture.persons, width, height))
    write_json(out / 'anthro.json', fixture.anthro.to_dict())
    write_label_raster(out / 'labels', fixture.labels)
