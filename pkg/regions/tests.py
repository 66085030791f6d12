import itertools
import math
from collections import deque

import numpy as np
from django.test import SimpleTestCase

from rasters.rle import encode_rle
from semantics.models import Part, HeadCandidate, SemanticMap, SoftMapStack, ReferenceAnthropometry
from regions.features import compute_cost_features, cover_weights, pairwise_exclusions
from regions.models import Instance, InconsistentCoverError
from regions.pool import (
    build_pool, chop_with_proposals, color_histogram, connected_components, head_regions, make_region,
)


def _semantic(shape, **blocks):
    labels = np.full(shape, Part.BACKGROUND, dtype=np.int8)
    for name, (rows, cols) in blocks.items():
        labels[rows, cols] = Part.parse(name.rstrip('0123456789'))
    return SemanticMap(labels=labels)


def _flood_fill_components(mask):
    """Reference 4-connected labelling by breadth-first search."""
    seen = np.zeros_like(mask)
    components = []
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        component, queue = set(), deque([start])
        seen[start] = True
        while queue:
            y, x = queue.popleft()
            component.add((y, x))
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < mask.shape[0] and 0 <= nx < mask.shape[1] and mask[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    queue.append((ny, nx))
        components.append(frozenset(component))
    return components


class ConnectedComponentsTestCase(SimpleTestCase):
    def test_two_disjoint_torso_blobs(self):
        semantic = _semantic((20, 20), torso1=(slice(0, 6), slice(0, 6)), torso2=(slice(10, 16), slice(10, 16)))
        regions = connected_components(semantic, Part.TORSO)
        self.assertEqual(len(regions), 2)
        self.assertEqual([region.area for region in regions], [36, 36])

    def test_empty_part_class(self):
        semantic = _semantic((8, 8), torso=(slice(0, 6), slice(0, 6)))
        self.assertEqual(connected_components(semantic, Part.LEG), [])

    def test_small_components_are_discarded(self):
        semantic = _semantic((12, 12), arm1=(slice(0, 2), slice(0, 2)), arm2=(slice(5, 12), slice(5, 12)))
        regions = connected_components(semantic, Part.ARM, min_area=25)
        self.assertEqual([region.area for region in regions], [49])

    def test_random_maps_match_flood_fill(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            labels = rng.choice([Part.TORSO, Part.BACKGROUND], size=(16, 16), p=[0.55, 0.45]).astype(np.int8)
            semantic = SemanticMap(labels=labels)
            regions = connected_components(semantic, Part.TORSO, min_area=1)
            found = {frozenset(zip(*np.nonzero(region.bitmask))) for region in regions}
            expected = set(_flood_fill_components(semantic.mask(Part.TORSO)))
            self.assertEqual(found, expected)

    def test_region_invariants(self):
        image = np.random.default_rng(4).integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
        semantic = _semantic((10, 10), leg=(slice(2, 9), slice(1, 8)))
        (region,) = connected_components(semantic, Part.LEG, image=image)
        self.assertEqual(region.area, region.mask.area)
        self.assertAlmostEqual(region.color_hist.sum(), 1.0, places=9)
        self.assertTrue(np.all(region.color_hist >= 0))
        self.assertEqual(region.centroid, (4.0, 5.0))


class ChopTestCase(SimpleTestCase):
    def setUp(self):
        self.semantic = _semantic((12, 12), torso=(slice(0, 10), slice(0, 10)))
        self.parts = connected_components(self.semantic, Part.TORSO)

    def _proposal(self, rows, cols):
        mask = np.zeros((12, 12), dtype=bool)
        mask[rows, cols] = True
        return encode_rle(mask)

    def test_containing_proposal_is_deduplicated(self):
        pool = chop_with_proposals(self.parts, [self._proposal(slice(0, 12), slice(0, 12))])
        self.assertEqual(len(pool), 1)

    def test_splitting_proposal_adds_both_halves(self):
        pool = chop_with_proposals(self.parts, [self._proposal(slice(0, 12), slice(0, 5))])
        self.assertEqual(sorted(region.area for region in pool), [50, 50, 100])

    def test_pieces_stay_inside_their_parent(self):
        rng = np.random.default_rng(5)
        proposals = []
        for _ in range(6):
            y, x = rng.integers(0, 8, size=2)
            h, w = rng.integers(3, 8, size=2)
            proposals.append(self._proposal(slice(y, y + h), slice(x, x + w)))
        parent = self.semantic.mask(Part.TORSO)
        pool = chop_with_proposals(self.parts, proposals, min_area=4)
        for region in pool:
            self.assertFalse(np.any(region.bitmask & ~parent))
            self.assertGreaterEqual(region.area, 4)
        self.assertEqual(len({region.mask.runs for region in pool}), len(pool))

    def test_pool_is_capped_by_area(self):
        semantic = _semantic((12, 12), torso=(slice(0, 10), slice(0, 10)), arm=(slice(0, 12), slice(10, 12)))
        proposals = [self._proposal(slice(0, 12), slice(0, c)) for c in range(2, 10)]
        pool = build_pool(semantic, proposals, min_area=4, max_regions=5)
        regions = [region for part in pool.values() for region in part]
        self.assertEqual(len(regions), 5)
        self.assertEqual(sorted(region.id for region in regions), list(range(5)))
        self.assertIn(100, [region.area for region in regions])


class HeadRegionTestCase(SimpleTestCase):
    anthro = ReferenceAnthropometry()

    def test_disc_area_close_to_analytic(self):
        foreground = np.ones((80, 80), dtype=bool)
        regions, kept = head_regions([HeadCandidate(40, 40, 2.0, 0.9)], foreground, self.anthro)
        radius = self.anthro.head_radius_at(2.0)
        self.assertEqual(len(kept), 1)
        self.assertLess(abs(regions[0].area - math.pi * radius ** 2) / (math.pi * radius ** 2), 0.02)

    def test_head_on_background_is_dropped(self):
        foreground = np.zeros((60, 60), dtype=bool)
        foreground[:5, :5] = True
        with self.assertLogs('regions.pool', level='WARNING'):
            regions, kept = head_regions([HeadCandidate(45, 45, 1.0, 0.9)], foreground, self.anthro)
        self.assertEqual((regions, kept), ([], []))

    def test_one_region_per_head(self):
        foreground = np.ones((60, 100), dtype=bool)
        heads = [HeadCandidate(20, 30, 1.0, 0.8), HeadCandidate(70, 30, 1.0, 0.7)]
        regions, kept = head_regions(heads, foreground, self.anthro)
        self.assertEqual(len(regions), 2)
        self.assertEqual(kept, heads)
        self.assertTrue(all(region.part == Part.HEAD for region in regions))

    def test_most_likely_candidate_wins_at_a_point(self):
        foreground = np.ones((60, 60), dtype=bool)
        heads = [HeadCandidate(30, 30, 1.0, 0.4), HeadCandidate(30, 30, 1.5, 0.9)]
        _, kept = head_regions(heads, foreground, self.anthro)
        self.assertEqual(kept, [heads[1]])

    def test_disc_is_clipped_to_foreground(self):
        foreground = np.zeros((60, 60), dtype=bool)
        foreground[:, :30] = True
        regions, _ = head_regions([HeadCandidate(30, 30, 1.0, 0.9)], foreground, self.anthro)
        self.assertFalse(np.any(regions[0].bitmask & ~foreground))


class CostFeatureTestCase(SimpleTestCase):
    anthro = ReferenceAnthropometry()

    def _stack(self, torso):
        torso = np.asarray(torso, dtype=np.float32)
        maps = np.zeros((5, 1) + torso.shape, dtype=np.float32)
        maps[Part.TORSO, 0] = torso
        maps[Part.BACKGROUND, 0] = 1.0 - torso
        return SoftMapStack(width=torso.shape[1], height=torso.shape[0], factors=(1.0,), maps=maps)

    def _mask(self, shape, rows, cols):
        mask = np.zeros(shape, dtype=bool)
        mask[rows, cols] = True
        return mask

    def test_confident_touching_region_inside_range(self):
        shape = (40, 40)
        instance = Instance(0, HeadCandidate(20, 10, 1.0, 0.9), self._mask(shape, slice(5, 15), slice(15, 25)))
        region = make_region(0, Part.TORSO, self._mask(shape, slice(14, 30), slice(12, 28)))
        features = compute_cost_features(region, instance, self.anthro, self._stack(np.ones(shape)))
        self.assertEqual((features.q, features.r, features.d), (0.0, 0.0, 0.0))

    def test_region_outside_range(self):
        shape = (30, 200)
        instance = Instance(0, HeadCandidate(5, 15, 1.0, 0.9), self._mask(shape, slice(10, 20), slice(0, 10)))
        region = make_region(0, Part.TORSO, self._mask(shape, slice(10, 20), slice(120, 140)))
        features = compute_cost_features(region, instance, self.anthro, self._stack(np.full(shape, 0.25)))
        self.assertEqual(features.r, 1.0)
        self.assertAlmostEqual(features.q, 0.75, places=6)
        self.assertAlmostEqual(features.d, 111 / 150)

    def test_random_instances_match_pixel_loop(self):
        rng = np.random.default_rng(6)
        anthro = self.anthro.scaled(0.05)
        shape = (12, 14)
        for _ in range(5):
            torso = rng.random(shape)
            head = HeadCandidate(int(rng.integers(0, 14)), int(rng.integers(0, 12)), float(rng.uniform(0.5, 2)), 0.9)
            instance_mask = rng.random(shape) < 0.15
            instance_mask[head.y, head.x] = True
            region_mask = rng.random(shape) < 0.3
            region_mask[0, 0] = True
            region = make_region(0, Part.TORSO, region_mask)
            features = compute_cost_features(region, Instance(0, head, instance_mask), anthro, self._stack(torso))

            pixels = list(zip(*np.nonzero(region_mask)))
            others = list(zip(*np.nonzero(instance_mask)))
            radius = anthro.range_radius_at(Part.TORSO, head.scale)
            q = 1 - sum(float(np.float32(torso[y, x])) for y, x in pixels) / len(pixels)
            r = sum(math.hypot(x - head.x, y - head.y) > radius for y, x in pixels) / len(pixels)
            d = min(math.hypot(x - u, y - v) for (y, x), (v, u) in itertools.product(pixels, others))
            self.assertAlmostEqual(features.q, q, places=5)
            self.assertAlmostEqual(features.r, r)
            self.assertAlmostEqual(features.d, d / anthro.distance_unit(head.scale))

    def _layout(self, k):
        """Head block, a near torso block and a far torso block, all geometry times k."""
        shape = (40 * k, 400 * k)
        instance = Instance(0, HeadCandidate(5 * k, 20 * k, float(k), 0.9),
                            self._mask(shape, slice(15 * k, 25 * k), slice(0, 10 * k)))
        region_mask = self._mask(shape, slice(15 * k, 25 * k), slice(20 * k, 30 * k))
        region_mask |= self._mask(shape, slice(15 * k, 25 * k), slice(200 * k, 220 * k))
        region = make_region(0, Part.TORSO, region_mask)
        return compute_cost_features(region, instance, self.anthro, self._stack(np.ones(shape)))

    def test_range_and_distance_are_scale_covariant(self):
        single, double = self._layout(1), self._layout(2)
        self.assertAlmostEqual(single.r, 2 / 3)
        self.assertEqual(single.r, double.r)
        self.assertAlmostEqual(single.d, double.d, delta=1.5 / self.anthro.distance_unit(2.0))


class CoverAndExclusionTestCase(SimpleTestCase):
    def setUp(self):
        self.semantic = _semantic((10, 10), torso=(slice(0, 10), slice(0, 4)))

    def _region(self, region_id, rows, cols):
        mask = np.zeros((10, 10), dtype=bool)
        mask[rows, cols] = True
        return make_region(region_id, Part.TORSO, mask)

    def test_whole_and_half_cover(self):
        whole = self._region(0, slice(0, 10), slice(0, 4))
        half = self._region(1, slice(0, 5), slice(0, 4))
        np.testing.assert_allclose(cover_weights([whole, half], self.semantic), [1.0, 0.5])

    def test_disjoint_regions_cover_at_most_one(self):
        rng = np.random.default_rng(7)
        cuts = np.sort(rng.choice(np.arange(1, 10), size=3, replace=False))
        bounds = [0, *cuts.tolist(), 10]
        regions = [self._region(k, slice(a, b), slice(0, 4)) for k, (a, b) in enumerate(zip(bounds, bounds[1:]))]
        self.assertLessEqual(cover_weights(regions, self.semantic).sum(), 1.0 + 1e-12)

    def test_missing_part_class_is_inconsistent(self):
        region = make_region(0, Part.LEG, np.ones((10, 10), dtype=bool))
        with self.assertRaises(InconsistentCoverError):
            cover_weights([region], self.semantic)

    def test_exclusion_matrices(self):
        image = np.random.default_rng(8).integers(0, 256, size=(10, 10, 3), dtype=np.uint8)
        masks = [np.zeros((10, 10), dtype=bool) for _ in range(3)]
        masks[0][:, :4] = True
        masks[1][:, 2:6] = True
        masks[2][:, 6:] = True
        regions = [make_region(k, Part.TORSO, mask, image) for k, mask in enumerate(masks)]
        exclusions = pairwise_exclusions(regions)
        np.testing.assert_allclose(exclusions.iou, exclusions.iou.T)
        np.testing.assert_allclose(exclusions.color, exclusions.color.T)
        np.testing.assert_allclose(np.diag(exclusions.iou), 1.0)
        np.testing.assert_allclose(np.diag(exclusions.color), 0.0)
        self.assertAlmostEqual(exclusions.iou[0, 1], 20 / 60)
        self.assertEqual(exclusions.iou[0, 2], 0.0)
        self.assertTrue(np.all((exclusions.color >= 0) & (exclusions.color <= 2 + 1e-12)))
        self.assertEqual(exclusions.overlapping_pairs(0.2), [(0, 1)])

    def test_overlaps_match_pixel_counting(self):
        rng = np.random.default_rng(9)
        masks = []
        for _ in range(15):
            top, left = rng.integers(0, 9, size=2)
            mask = np.zeros((12, 12), dtype=bool)
            mask[top:top + rng.integers(2, 5), left:left + rng.integers(2, 5)] = True
            masks.append(mask)
        regions = [make_region(k, Part.TORSO, mask) for k, mask in enumerate(masks)]
        iou = pairwise_exclusions(regions).iou
        for m, first in enumerate(masks):
            for n, second in enumerate(masks):
                expected = (first & second).sum() / (first | second).sum()
                self.assertAlmostEqual(iou[m, n], expected)

    def test_histogram_without_image_is_uniform(self):
        histogram = color_histogram(None, np.ones((3, 3), dtype=bool))
        self.assertEqual(histogram.size, 512)
        self.assertAlmostEqual(histogram.sum(), 1.0)

    def test_histogram_bins_pixel_colors(self):
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        image[0, 0] = (255, 0, 0)
        histogram = color_histogram(image, np.ones((2, 2), dtype=bool))
        self.assertEqual(histogram[0], 0.75)
        self.assertEqual(histogram[7 * 64], 0.25)
