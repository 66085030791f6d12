"""Small random assembly problems for exercising solvers."""
import numpy as np

from regions.features import pairwise_exclusions
from regions.models import CostFeatures, Instance, PairwiseExclusions
from regions.pool import make_region
from semantics.models import Part, HeadCandidate, ReferenceAnthropometry
from .builders import build_stage1, build_stage2
from .models import Params

SMALL_ANTHRO = ReferenceAnthropometry().scaled(0.1)


def random_instances(rng, count, shape=(16, 16)):
    instances = []
    for j in range(count):
        head = HeadCandidate(
            x=int(rng.integers(0, shape[1])), y=int(rng.integers(0, shape[0])),
            scale=float(rng.choice([0.8, 1.0, 1.25])), peak_prob=float(rng.uniform(0.3, 1.0)),
        )
        mask = np.zeros(shape, dtype=bool)
        mask[head.y, head.x] = True
        instances.append(Instance(index=j, head=head, mask=mask))
    return instances


def random_regions(rng, count, part, shape=(16, 16)):
    regions = []
    for k in range(count):
        mask = np.zeros(shape, dtype=bool)
        y, x = rng.integers(0, shape[0] - 4), rng.integers(0, shape[1] - 4)
        h, w = rng.integers(2, 7, size=2)
        mask[y:y + h, x:x + w] = True
        regions.append(make_region(k, part, mask))
    return regions


def random_problem(rng, n_regions=3, n_instances=2, stage=1, part=None, params=None, anthro=SMALL_ANTHRO):
    """A stage-one (torso) or stage-two (arm by default) problem on random rectangles."""
    part = Part(part if part is not None else (Part.TORSO if stage == 1 else Part.ARM))
    params = params or Params(pi=300.0, xi=50.0)
    regions = random_regions(rng, n_regions, part)
    instances = random_instances(rng, n_instances)
    shape = (n_regions, n_instances)
    features = CostFeatures(q=rng.random(shape), r=0.5 * rng.random(shape), d=0.3 * rng.random(shape))
    areas = np.array([region.area for region in regions], dtype=np.float64)
    cover = areas / max(areas.sum(), 1.0)
    color = 0.8 * rng.random((n_regions, n_regions))
    color = np.triu(color, 1) + np.triu(color, 1).T
    exclusions = PairwiseExclusions(iou=pairwise_exclusions(regions).iou, color=color)
    if stage == 1:
        return build_stage1(regions, instances, features, cover, exclusions, anthro, params)
    return build_stage2(part, regions, instances, features, cover, exclusions, anthro, params)


def crowded_problem(rng, n_regions=30, n_instances=2, stage=1, params=None):
    """Tiles of several people side by side, each person owning a vertical band.

    Every region is worth taking for every instance, so the relaxed rows
    decide the assignment: a fifth of each person's regions merge two
    adjacent tiles and exclude them, and about a third of the cross-person
    region pairs differ in colour. Near a band edge the closer head may
    belong to the other person.
    """
    if n_instances < 1 or n_regions < n_instances:
        raise ValueError("need at least one region per instance")
    part = Part.TORSO if stage == 1 else Part.ARM
    share = [n_regions // n_instances + (j < n_regions % n_instances) for j in range(n_instances)]
    merges = [count // 5 for count in share]
    tiles = [count - merged for count, merged in zip(share, merges)]
    cell, columns = 4, 10
    rows = max(4, -(-max(tiles) // columns))
    shape = (rows * cell, n_instances * columns * cell)

    regions, owners = [], []
    for j in range(n_instances):
        masks = []
        for t in range(tiles[j]):
            r, c = divmod(t, columns)
            mask = np.zeros(shape, dtype=bool)
            left = (j * columns + c) * cell
            mask[r * cell:(r + 1) * cell, left:left + cell] = True
            masks.append(mask)
        masks += [masks[2 * k] | masks[2 * k + 1] for k in range(merges[j])]
        for mask in masks:
            regions.append(make_region(len(regions), part, mask))
            owners.append(j)
    owners = np.array(owners)

    instances = []
    for j in range(n_instances):
        head = HeadCandidate(x=(2 * j + 1) * columns * cell // 2, y=1, scale=1.0,
                             peak_prob=float(rng.uniform(0.6, 1.0)))
        mask = np.zeros(shape, dtype=bool)
        mask[head.y, head.x] = True
        instances.append(Instance(index=j, head=head, mask=mask))

    centroids = np.array([np.argwhere(region.bitmask).mean(axis=0) for region in regions])
    heads = np.array([(instance.head.y, instance.head.x) for instance in instances], dtype=np.float64)
    distance = np.linalg.norm(centroids[:, None, :] - heads[None, :, :], axis=2) / sum(shape)
    grid = (len(regions), n_instances)
    features = CostFeatures(q=0.3 * rng.random(grid), r=0.2 * rng.random(grid), d=distance)

    areas = np.array([region.area for region in regions], dtype=np.float64)
    covered = cell * cell * sum(tiles)
    cover = areas / covered
    n = len(regions)
    apart = owners[:, None] != owners[None, :]
    color = np.where(apart & (rng.random((n, n)) < 0.3), 0.6 + 0.4 * rng.random((n, n)), 0.3 * rng.random((n, n)))
    color = np.triu(color, 1) + np.triu(color, 1).T
    exclusions = PairwiseExclusions(iou=pairwise_exclusions(regions).iou, color=color)

    # room for every person's own regions under the hard cap
    person = cell * cell * max(tiles)
    anthro = ReferenceAnthropometry().scaled(np.sqrt(person / 2400.0))
    params = params or Params(pi=1000.0 * sum(tiles))
    if stage == 1:
        return build_stage1(regions, instances, features, cover, exclusions, anthro, params)
    return build_stage2(part, regions, instances, features, cover, exclusions, anthro, params)
