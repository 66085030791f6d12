import itertools
import tempfile

import numpy as np
from django.test import SimpleTestCase
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from semantics.graphcut import (
    alpha_expansion, binary_energy, graph_cut_pass1, graph_cut_pass2, grid_edges, potts_energy,
)
from semantics.heads import detect_heads
from semantics.maxflow import maxflow
from semantics.models import (
    Part, SoftMapStack, HeadCandidate, SemanticMap, ReferenceAnthropometry,
    EmptyStackError, CapacityOverflowError,
)
from semantics.stack import max_pool_stack, load_stack, save_stack


def _normalized(maps):
    maps = np.asarray(maps, dtype=np.float64)
    return maps / maps.sum(axis=0)


def _uniform_soft(shape, **probabilities):
    """Soft maps with the given per-class probability everywhere, rest on background."""
    soft = np.zeros((5,) + shape)
    for name, value in probabilities.items():
        soft[Part.parse(name)] = value
    soft[Part.BACKGROUND] += 1.0 - soft.sum(axis=0)
    return soft


class StackTestCase(SimpleTestCase):
    def _stack(self, maps, factors):
        maps = np.asarray(maps, dtype=np.float32)
        return SoftMapStack(width=maps.shape[-1], height=maps.shape[-2], factors=factors, maps=maps)

    def test_single_scale_pools_to_normalized_input(self):
        rng = np.random.default_rng(0)
        maps = rng.random((5, 1, 4, 3)).astype(np.float32)
        pooled = max_pool_stack(self._stack(maps, (1.0,)))
        np.testing.assert_allclose(pooled, _normalized(maps[:, 0]), atol=1e-6)

    def test_max_over_two_scales(self):
        maps = np.full((5, 2, 1, 1), 0.1, dtype=np.float32)
        maps[Part.TORSO, 0, 0, 0] = 0.2
        maps[Part.TORSO, 1, 0, 0] = 0.7
        raw = max_pool_stack(self._stack(maps, (1.0, 0.5)), normalize=False)
        self.assertAlmostEqual(raw[Part.TORSO, 0, 0], 0.7, places=6)

    def test_pooling_matches_per_pixel_loop(self):
        rng = np.random.default_rng(1)
        maps = rng.random((5, 3, 6, 5)).astype(np.float32)
        stack = self._stack(maps, (1.0, 0.75, 0.5))
        raw = max_pool_stack(stack, normalize=False)
        pooled = max_pool_stack(stack)
        for c, y, x in itertools.product(range(5), range(6), range(5)):
            self.assertAlmostEqual(raw[c, y, x], max(maps[c, s, y, x] for s in range(3)), places=6)
            self.assertTrue(all(raw[c, y, x] >= maps[c, s, y, x] for s in range(3)))
        np.testing.assert_allclose(pooled.sum(axis=0), 1.0, atol=1e-6)

    def test_empty_scale_list(self):
        with self.assertRaises(EmptyStackError):
            max_pool_stack(self._stack(np.zeros((5, 0, 2, 2)), ()))

    def test_stack_directory_round_trip(self):
        rng = np.random.default_rng(2)
        stack = self._stack(rng.random((5, 2, 3, 4)), (1.0, 0.5))
        with tempfile.TemporaryDirectory() as directory:
            save_stack(directory, stack)
            loaded = load_stack(directory)
        self.assertEqual(loaded.factors, (1.0, 0.5))
        np.testing.assert_array_equal(loaded.maps, stack.maps)


class HeadDetectionTestCase(SimpleTestCase):
    def _bump(self, shape, center, peak, sigma=2.0):
        rows, cols = np.indices(shape)
        return peak * np.exp(-((rows - center[1]) ** 2 + (cols - center[0]) ** 2) / (2 * sigma ** 2))

    def test_single_bump_gives_one_candidate_at_apex(self):
        head_stack = self._bump((21, 21), (12, 8), 0.9)[None]
        heads = detect_heads(head_stack, (1.0,))
        self.assertEqual(len(heads), 1)
        self.assertEqual(heads[0].center, (12, 8))
        self.assertAlmostEqual(heads[0].peak_prob, 0.9)

    def test_uniform_map_below_threshold(self):
        self.assertEqual(detect_heads(np.full((1, 10, 10), 0.1), (1.0,), threshold=0.2), [])

    def test_scale_is_inverse_of_best_factor(self):
        weak = self._bump((15, 15), (7, 7), 0.4)
        strong = self._bump((15, 15), (7, 7), 0.8)
        heads = detect_heads(np.stack([weak, strong, weak]), (1.0, 0.5, 0.25))
        self.assertEqual(len(heads), 1)
        self.assertEqual(heads[0].scale, 2.0)

    def test_plateau_keeps_smallest_row_major_index(self):
        pooled = np.zeros((9, 9))
        pooled[4, 4] = pooled[4, 5] = pooled[5, 4] = 0.6
        heads = detect_heads(pooled[None], (1.0,))
        self.assertEqual([h.center for h in heads], [(4, 4)])

    def test_separated_peaks_are_all_found(self):
        head_map = self._bump((30, 30), (5, 5), 0.7) + self._bump((30, 30), (22, 20), 0.5)
        heads = detect_heads(head_map[None], (1.0,))
        self.assertEqual(sorted(h.center for h in heads), [(5, 5), (22, 20)])
        self.assertTrue(all(h.peak_prob >= 0.2 for h in heads))

    def test_window_must_be_odd(self):
        with self.assertRaises(ValueError):
            detect_heads(np.zeros((1, 5, 5)), (1.0,), window=4)


class MaxflowTestCase(SimpleTestCase):
    def test_parallel_edges(self):
        result = maxflow(2, [0, 0], [1, 1], [3, 4], 0, 1)
        self.assertEqual(result.value, 7)

    def test_bottleneck(self):
        tails, heads, caps = [0, 1], [1, 2], [5, 2]
        result = maxflow(3, tails, heads, caps, 0, 2)
        self.assertEqual(result.value, 2)
        np.testing.assert_array_equal(result.source_side, [True, True, False])
        self.assertEqual(result.cut_capacity(tails, heads, caps), 2)

    def _random_graph(self, rng, n=8):
        pairs = [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < 0.35]
        tails = np.array([u for u, _ in pairs], dtype=np.int64)
        heads = np.array([v for _, v in pairs], dtype=np.int64)
        caps = rng.integers(0, 20, size=len(pairs))
        return tails, heads, caps

    def test_random_graphs_match_brute_force_cut(self):
        rng = np.random.default_rng(7)
        n, source, sink = 8, 0, 7
        for _ in range(100):
            tails, heads, caps = self._random_graph(rng, n)
            best = None
            for bits in itertools.product([False, True], repeat=n - 2):
                side = np.array([True, *bits, False])
                cut = int(caps[side[tails] & ~side[heads]].sum())
                best = cut if best is None else min(best, cut)
            result = maxflow(n, tails, heads, caps, source, sink)
            self.assertEqual(result.value, best)
            self.assertEqual(result.cut_capacity(tails, heads, caps), result.value)

    def test_agrees_with_scipy(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = 30
            tails, heads, caps = self._random_graph(rng, n)
            graph = csr_matrix((caps.astype(np.int32), (tails, heads)), shape=(n, n))
            expected = maximum_flow(graph, 0, n - 1).flow_value
            self.assertEqual(maxflow(n, tails, heads, caps, 0, n - 1).value, expected)

    def test_overflowing_capacities_are_rejected(self):
        with self.assertRaises(CapacityOverflowError):
            maxflow(2, [0, 0], [1, 1], [2.0 ** 62, 2.0 ** 62], 0, 1)

    def test_fractional_capacities_are_rejected(self):
        with self.assertRaises(ValueError):
            maxflow(2, [0], [1], [0.5], 0, 1)


class GraphCutPassOneTestCase(SimpleTestCase):
    def test_confident_foreground(self):
        soft = _uniform_soft((6, 6), torso=0.9)
        self.assertTrue(graph_cut_pass1(soft).all())

    def test_confident_background(self):
        soft = _uniform_soft((6, 6), torso=0.1)
        self.assertFalse(graph_cut_pass1(soft).any())

    def _brute_force_minimum(self, unary0, unary1, p, q, weight, n):
        return min(
            binary_energy(unary0, unary1, p, q, weight, np.array(bits))
            for bits in itertools.product([False, True], repeat=n)
        )

    def test_exact_on_random_crops(self):
        rng = np.random.default_rng(5)
        for shape in [(3, 3)] * 50 + [(3, 4)] * 5:
            # probabilities on the 1/1000 grid make the integer capacities exact
            background = rng.integers(0, 1001, size=shape) / 1000
            soft = np.zeros((5,) + shape)
            soft[Part.BACKGROUND] = background
            soft[Part.ARM] = 1.0 - background
            labels = graph_cut_pass1(soft).ravel()
            p, q = grid_edges(np.ones(shape, dtype=bool))
            weight = np.full(p.size, 0.2)
            unary0 = (1.0 - background).ravel()
            unary1 = background.ravel()
            best = self._brute_force_minimum(unary0, unary1, p, q, weight, labels.size)
            self.assertAlmostEqual(binary_energy(unary0, unary1, p, q, weight, labels), best, places=9)

    def test_near_optimal_on_unquantized_crops(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            background = rng.random((3, 3))
            soft = np.stack([np.zeros((3, 3))] * 3 + [1.0 - background, background])
            labels = graph_cut_pass1(soft).ravel()
            p, q = grid_edges(np.ones((3, 3), dtype=bool))
            weight = np.full(p.size, 0.2)
            energy = binary_energy((1 - background).ravel(), background.ravel(), p, q, weight, labels)
            best = self._brute_force_minimum((1 - background).ravel(), background.ravel(), p, q, weight, 9)
            # flooring loses less than one capacity unit per terminal edge
            self.assertLessEqual(energy, best + 9 / 1000)


class AlphaExpansionTestCase(SimpleTestCase):
    def setUp(self):
        self.anthro = ReferenceAnthropometry()

    def test_torso_blob_inside_arm_range(self):
        soft = _uniform_soft((8, 8), torso=0.95, head=0.0125, arm=0.0125, leg=0.0125)
        heads = [HeadCandidate(x=4, y=0, scale=1.0, peak_prob=0.9)]
        semantic = graph_cut_pass2(soft, np.ones((8, 8), dtype=bool), heads, self.anthro)
        self.assertTrue(semantic.mask(Part.TORSO).all())

    def test_range_penalty_flips_torso_to_leg(self):
        soft = _uniform_soft((8, 8), torso=0.55, leg=0.45)
        far_away = [HeadCandidate(x=1000, y=1000, scale=1.0, peak_prob=0.9)]
        semantic = graph_cut_pass2(soft, np.ones((8, 8), dtype=bool), far_away, self.anthro)
        self.assertTrue(semantic.mask(Part.LEG).all())

    def test_background_pixels_keep_background(self):
        soft = _uniform_soft((4, 4), arm=0.9)
        foreground = np.zeros((4, 4), dtype=bool)
        foreground[1:3, 1:3] = True
        semantic = graph_cut_pass2(soft, foreground, [], self.anthro)
        np.testing.assert_array_equal(semantic.foreground, foreground)

    def test_energy_never_increases(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            unary = rng.random((4, 64))
            p, q = grid_edges(np.ones((8, 8), dtype=bool))
            _, trace = alpha_expansion(unary, p, q, 0.2, initial=rng.integers(0, 4, 64))
            self.assertTrue(all(b <= a for a, b in zip(trace, trace[1:])))

    def test_no_single_expansion_lowers_the_result(self):
        rng = np.random.default_rng(10)
        p, q = grid_edges(np.ones((3, 3), dtype=bool))
        subsets = np.array(list(itertools.product([False, True], repeat=9)))
        for _ in range(20):
            # quarter steps keep the scaled capacities exact
            unary = rng.integers(0, 8, size=(3, 9)) / 4.0
            labels, _ = alpha_expansion(unary, p, q, 0.5, initial=rng.integers(0, 3, 9))
            final = potts_energy(unary, labels, p, q, 0.5)
            for alpha in range(3):
                moved = np.where(subsets, alpha, labels)
                energies = unary[moved, np.arange(9)].sum(axis=1) + 0.5 * (moved[:, p] != moved[:, q]).sum(axis=1)
                self.assertGreaterEqual(energies.min(), final - 1e-9)

    def test_small_instance_against_exhaustive_minimum(self):
        rng = np.random.default_rng(9)
        p, q = grid_edges(np.ones((3, 3), dtype=bool))
        every = np.array(list(itertools.product(range(4), repeat=9)))
        for _ in range(3):
            unary = rng.random((4, 9))
            labels, trace = alpha_expansion(unary, p, q, 0.2)
            energies = unary[every, np.arange(9)].sum(axis=1) + 0.2 * (every[:, p] != every[:, q]).sum(axis=1)
            best = energies.min()
            final = potts_energy(unary, labels, p, q, 0.2)
            self.assertAlmostEqual(final, trace[-1])
            self.assertGreaterEqual(final, best - 1e-9)
            # expansion moves stay within twice the optimum on Potts models
            self.assertLessEqual(final, 2 * best + 0.1)


class SemanticMapTestCase(SimpleTestCase):
    def test_label_raster_round_trip(self):
        labels = np.array([[Part.HEAD, Part.BACKGROUND], [Part.LEG, Part.ARM]])
        semantic = SemanticMap(labels=labels)
        restored = SemanticMap.from_label_raster(semantic.as_label_raster())
        np.testing.assert_array_equal(restored.labels, labels)
        self.assertEqual(semantic.area(Part.LEG), 1)

    def test_anthropometry_scaling(self):
        anthro = ReferenceAnthropometry().scaled(0.5)
        self.assertEqual(anthro.reference_height, 75.0)
        self.assertEqual(anthro.target_area[Part.TORSO], 600.0)
        self.assertEqual(anthro.range_radius_at(Part.ARM, 2.0), 95.0)
        self.assertEqual(ReferenceAnthropometry().slack_bound(Part.TORSO), 2400.0)
