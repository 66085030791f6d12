"""Candidate region generation: part components, proposal chops and head discs."""
import logging
from dataclasses import replace

import numpy as np
from scipy import ndimage

from rasters.models import DimensionMismatchError
from rasters.rle import encode_rle
from semantics.models import Part, REGION_PARTS
from .models import Region

logger = logging.getLogger(__name__)


def color_histogram(image, bitmask, bins=8):
    """Joint RGB histogram with `bins` levels per channel, L1-normalized."""
    size = bins ** 3
    if image is None:
        return np.full(size, 1.0 / size)
    pixels = image[bitmask].astype(np.int64) * bins // 256
    codes = (pixels[:, 0] * bins + pixels[:, 1]) * bins + pixels[:, 2]
    histogram = np.bincount(codes, minlength=size).astype(np.float64)
    return histogram / histogram.sum()


def make_region(region_id, part, bitmask, image=None, bins=8):
    rows, cols = np.nonzero(bitmask)
    return Region(
        id=region_id,
        part=Part(part),
        mask=encode_rle(bitmask),
        area=int(rows.size),
        color_hist=color_histogram(image, bitmask, bins),
        centroid=(float(cols.mean()), float(rows.mean())),
    )


def connected_components(semantic, part, min_area=25, image=None, bins=8):
    """Maximal 4-connected components of one part class, smallest ones dropped."""
    components, count = ndimage.label(semantic.mask(part))
    regions = []
    for label in range(1, count + 1):
        bitmask = components == label
        if np.count_nonzero(bitmask) >= min_area:
            regions.append(make_region(len(regions), part, bitmask, image, bins))
    return regions


def chop_with_proposals(parts, proposals, min_area=25, image=None, bins=8):
    """Part regions plus their intersections with each proposal and its complement.

    Pieces equal to an already pooled mask of the same part are dropped.
    """
    pool = list(parts)
    seen = {(region.part, region.mask.runs) for region in pool}
    for region in parts:
        for proposal in proposals:
            if proposal.shape != region.mask.shape:
                raise DimensionMismatchError(f"proposal is {proposal.shape}, image is {region.mask.shape}")
            inside = region.bitmask & proposal.bitmask
            for piece in (inside, region.bitmask & ~inside):
                if np.count_nonzero(piece) < min_area:
                    continue
                key = (region.part, encode_rle(piece).runs)
                if key in seen:
                    continue
                seen.add(key)
                pool.append(make_region(len(pool), region.part, piece, image, bins))
    return pool


def head_disc(shape, center, radius):
    rows, cols = np.indices(shape)
    return (cols - center[0]) ** 2 + (rows - center[1]) ** 2 <= radius ** 2


def head_regions(heads, foreground, anthro, image=None, bins=8):
    """One disc per head point, intersected with the person foreground.

    Returns the regions and the head candidates they belong to; candidates whose
    disc misses the foreground are dropped.
    """
    best = {}
    for head in heads:
        if head.center not in best or head.peak_prob > best[head.center].peak_prob:
            best[head.center] = head
    regions, kept = [], []
    for head in heads:
        if best[head.center] is not head:
            continue
        disc = head_disc(foreground.shape, head.center, anthro.head_radius_at(head.scale)) & foreground
        if not disc.any():
            logger.warning("head candidate at %s misses the foreground; dropped", head.center)
            continue
        regions.append(make_region(len(regions), Part.HEAD, disc, image, bins))
        kept.append(head)
    return regions, kept


def cap_pool(regions, max_regions):
    if len(regions) <= max_regions:
        return regions
    logger.info("pool of %d regions capped at %d", len(regions), max_regions)
    ranked = sorted(regions, key=lambda region: (-region.area, region.id))[:max_regions]
    return sorted(ranked, key=lambda region: region.id)


def build_pool(semantic, proposals, image=None, min_area=25, max_regions=1000, bins=8):
    """Candidate regions per assembled part type, ids unique across the pool."""
    candidates = []
    for part in REGION_PARTS:
        components = connected_components(semantic, part, min_area, image, bins)
        chopped = chop_with_proposals(components, proposals, min_area, image, bins)
        logger.debug("%s: %d components, %d chopped regions", part.label, len(components), len(chopped))
        offset = len(candidates)
        candidates += [replace(region, id=offset + k) for k, region in enumerate(chopped)]
    kept = cap_pool(candidates, max_regions)
    pool = {part: [] for part in REGION_PARTS}
    for new_id, region in enumerate(kept):
        pool[region.part].append(replace(region, id=new_id))
    return pool
