import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from rasters.formats import read_raster, write_raster
from rasters.models import RasterF32, DimensionMismatchError
from .models import SoftMapStack, Part, EmptyStackError

logger = logging.getLogger(__name__)

# 1.00 down to 0.25 in steps of 0.05
DEFAULT_FACTORS = tuple(round(1.0 - 0.05 * k, 2) for k in range(16))

MANIFEST = 'stack.json'
IMAGE = 'image.png'


def load_stack(directory):
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text())
    factors = tuple(float(f) for f in manifest['factors'])
    classes = [Part.parse(name) for name in manifest['classes']]
    if sorted(classes) != list(Part):
        raise ValueError(f"stack classes must be {[p.label for p in Part]}, got {manifest['classes']}")

    maps, shape = {}, None
    for part in classes:
        files = manifest['maps'][part.label]
        if len(files) != len(factors):
            raise ValueError(f"{part.label}: {len(files)} rasters for {len(factors)} factors")
        rasters = [read_raster(directory / name) for name in files]
        for raster in rasters:
            if shape is None:
                shape = (raster.height, raster.width)
            elif (raster.height, raster.width) != shape:
                raise DimensionMismatchError(f"{part.label} raster is {raster.height}x{raster.width}, expected {shape}")
        maps[part] = np.stack([r.data for r in rasters]) if rasters else None
    if shape is None:
        raise EmptyStackError(f"{directory}: stack has no scale levels")
    height, width = shape
    return SoftMapStack(width=width, height=height, factors=factors,
                        maps=np.stack([maps[part] for part in Part]))


def save_stack(directory, stack):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for part in Part:
        files[part.label] = []
        for level, factor in enumerate(stack.factors):
            name = f"{part.label}_{level:02d}.f32r"
            write_raster(directory / name, RasterF32.from_array(stack.maps[part, level]))
            files[part.label].append(name)
    manifest = {'classes': [p.label for p in Part], 'factors': list(stack.factors), 'maps': files}
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=1))


def load_image(directory, shape=None):
    """The RGB image next to the stack, or None when the stack has none."""
    path = Path(directory) / IMAGE
    if not path.exists():
        logger.info("%s has no %s; colour histograms will be uniform", directory, IMAGE)
        return None
    with Image.open(path) as image:
        pixels = np.asarray(image.convert('RGB'), dtype=np.uint8)
    if shape is not None and pixels.shape[:2] != tuple(shape):
        raise DimensionMismatchError(f"image is {pixels.shape[:2]}, stack is {tuple(shape)}")
    return pixels


def max_pool_stack(stack, normalize=True):
    """Per-class maximum over scale levels, shape (5, height, width).

    With `normalize` the five class values at each pixel are rescaled to sum
    to one; pixels where every class is zero become uniform.
    """
    if len(stack.factors) == 0:
        raise EmptyStackError("cannot pool a stack without scale levels")
    pooled = stack.maps.max(axis=1).astype(np.float64)
    if not normalize:
        return pooled
    totals = pooled.sum(axis=0)
    empty = totals <= 0
    pooled[:, empty] = 1.0 / len(Part)
    totals[empty] = 1.0
    return pooled / totals
