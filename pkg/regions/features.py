"""Per-region, per-instance and pairwise features feeding the integer programs."""
import numpy as np
from scipy import ndimage, sparse
from scipy.spatial.distance import cdist

from .models import CostFeatures, PairwiseExclusions, InconsistentCoverError


def instance_distance(instance):
    """Distance of every pixel to the nearest pixel of the instance."""
    return ndimage.distance_transform_edt(~instance.mask)


def compute_cost_features(region, instance, anthro, stack, distance=None):
    """q, r and d of assigning `region` to `instance`."""
    if region.mask.shape != instance.mask.shape:
        raise ValueError("region and instance must share image dimensions")
    bitmask = region.bitmask
    scale = instance.scale
    probability = np.clip(stack.at_scale(region.part, scale)[bitmask], 0.0, 1.0)
    rows, cols = np.nonzero(bitmask)
    radius = anthro.range_radius_at(region.part, scale)
    outside = (cols - instance.head.x) ** 2 + (rows - instance.head.y) ** 2 > radius ** 2
    if distance is None:
        distance = instance_distance(instance)
    return CostFeatures(
        q=float(1.0 - probability.mean()),
        r=float(outside.mean()),
        d=float(distance[bitmask].min() / anthro.distance_unit(scale)),
    )


def cost_feature_table(regions, instances, anthro, stack):
    """CostFeatures holding dense (region, instance) arrays of q, r and d."""
    shape = (len(regions), len(instances))
    q, r, d = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for j, instance in enumerate(instances):
        distance = instance_distance(instance)
        for i, region in enumerate(regions):
            features = compute_cost_features(region, instance, anthro, stack, distance)
            q[i, j], r[i, j], d[i, j] = features.q, features.r, features.d
    return CostFeatures(q=q, r=r, d=d)


def cover_weights(regions, semantic):
    """r_i = a_i / m_t: region area over the semantic area of its part type."""
    weights = np.zeros(len(regions))
    for i, region in enumerate(regions):
        total = semantic.area(region.part)
        if total == 0:
            raise InconsistentCoverError(f"region {region.id}: no {region.part.label} pixels in the semantic map")
        weights[i] = region.area / total
    return weights


def pairwise_exclusions(regions):
    """IoU and colour distance of every region pair.

    Masks are held as a sparse region-by-pixel matrix, so only pairs that share
    pixels produce nonzero intersections.
    """
    if not regions:
        return PairwiseExclusions(iou=np.zeros((0, 0)), color=np.zeros((0, 0)))
    pixels = [np.flatnonzero(region.bitmask) for region in regions]
    masks = sparse.csr_matrix(
        (np.ones(sum(p.size for p in pixels)), np.concatenate(pixels), np.cumsum([0] + [p.size for p in pixels])),
        shape=(len(regions), regions[0].bitmask.size),
    )
    intersection = (masks @ masks.T).toarray()
    areas = np.diag(intersection)
    union = areas[:, None] + areas[None, :] - intersection
    iou = np.divide(intersection, union, out=np.zeros_like(intersection), where=union > 0)
    histograms = np.stack([region.color_hist for region in regions])
    return PairwiseExclusions(iou=iou.astype(np.float64), color=cdist(histograms, histograms, 'cityblock'))
