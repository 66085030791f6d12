"""Readers and writers for .f32r/.u16r rasters, .lbl.json legends and .masks.json documents."""
import json
from pathlib import Path

import numpy as np

from .models import RasterF32, LabelRaster, MaskRLE, MalformedRasterError


def _read_header(payload, magic):
    newline = payload.find(b'\n')
    if newline < 0:
        raise MalformedRasterError("missing header line")
    try:
        tag, width, height = payload[:newline].decode('ascii').split(' ')
        width, height = int(width), int(height)
    except ValueError as exc:
        raise MalformedRasterError(f"malformed header {payload[:newline]!r}") from exc
    if tag != magic or width <= 0 or height <= 0:
        raise MalformedRasterError(f"malformed header {payload[:newline]!r}")
    return width, height, payload[newline + 1:]


def _read_grid(path, magic, dtype):
    payload = Path(path).read_bytes()
    width, height, body = _read_header(payload, magic)
    expected = width * height * np.dtype(dtype).itemsize
    if len(body) < expected:
        raise MalformedRasterError(f"{path}: truncated payload ({len(body)} of {expected} bytes)")
    if len(body) > expected:
        raise MalformedRasterError(f"{path}: {len(body) - expected} trailing bytes")
    return width, height, np.frombuffer(body, dtype=dtype).reshape(height, width)


def read_raster(path):
    width, height, grid = _read_grid(path, 'F32', '<f4')
    if not np.all(np.isfinite(grid)):
        raise MalformedRasterError(f"{path}: non-finite values")
    return RasterF32(width=width, height=height, data=grid)


def write_raster(path, raster):
    header = f"F32 {raster.width} {raster.height}\n".encode('ascii')
    Path(path).write_bytes(header + raster.data.astype('<f4').tobytes())


def read_label_raster(stem):
    """Read `<stem>.u16r` and `<stem>.lbl.json`."""
    stem = Path(stem)
    width, height, grid = _read_grid(stem.with_suffix('.u16r'), 'U16', '<u2')
    document = json.loads(stem.with_suffix('.lbl.json').read_text())
    legend = {int(entry['id']): (int(entry['person']), entry['part']) for entry in document['legend']}
    return LabelRaster(width=width, height=height, labels=grid, legend=legend)


def write_label_raster(stem, raster):
    stem = Path(stem)
    header = f"U16 {raster.width} {raster.height}\n".encode('ascii')
    stem.with_suffix('.u16r').write_bytes(header + raster.labels.astype('<u2').tobytes())
    legend = [
        {'id': label_id, 'person': person, 'part': part}
        for label_id, (person, part) in sorted(raster.legend.items())
    ]
    document = {'width': raster.width, 'height': raster.height, 'legend': legend}
    stem.with_suffix('.lbl.json').write_text(json.dumps(document, indent=1))


def read_masks(path):
    """Read a .masks.json document into an ordered {id: MaskRLE} dict."""
    document = json.loads(Path(path).read_text())
    width, height = int(document['width']), int(document['height'])
    masks = {}
    for entry in document['masks']:
        mask = MaskRLE(width=width, height=height, runs=tuple(int(r) for r in entry['runs']))
        mask.bitmask  # validates the run sum
        masks[int(entry['id'])] = mask
    return masks


def write_masks(path, masks, width, height):
    document = {
        'width': width,
        'height': height,
        'masks': [mask.to_dict(mask_id) for mask_id, mask in masks.items()],
    }
    Path(path).write_text(json.dumps(document))
