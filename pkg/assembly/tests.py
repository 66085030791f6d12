import itertools

import numpy as np
from django.test import SimpleTestCase

from assembly.builders import (
    build_stage1, build_stage2, evaluate_objective, head_torso_instances, term_vector, unary_cost,
)
from assembly.fixtures import SMALL_ANTHRO, crowded_problem, random_problem, random_instances, random_regions
from assembly.models import AssemblyProblem, Params, ProblemShapeError, Solution
from regions.models import CostFeatures, PairwiseExclusions
from regions.pool import make_region
from semantics.models import Part

DEFAULTS = Params()


def _features(shape, q=0.0, r=0.0, d=0.0):
    return CostFeatures(q=np.full(shape, q), r=np.full(shape, r), d=np.full(shape, d))


def _no_exclusions(n):
    return PairwiseExclusions(iou=np.eye(n), color=np.zeros((n, n)))


def _binary_points(problem):
    """Every x with at most one instance per region."""
    n_r, n_j = problem.n_regions, problem.n_instances
    for choice in itertools.product(range(-1, n_j), repeat=n_r):
        x = np.zeros(problem.n_x)
        for i, j in enumerate(choice):
            if j >= 0:
                x[i * n_j + j] = 1
        yield x


class UnaryCostTestCase(SimpleTestCase):
    def test_offset_only(self):
        self.assertEqual(unary_cost(CostFeatures(0, 0, 0), DEFAULTS), 40)

    def test_weighted_sum(self):
        self.assertAlmostEqual(unary_cost(CostFeatures(q=0.5, r=0.1, d=0.2), DEFAULTS), 170)
        self.assertAlmostEqual(unary_cost(CostFeatures(q=1, r=1, d=0), DEFAULTS), 340)

    def test_params_validation(self):
        with self.assertRaises(ValueError):
            Params(tau=1.0)
        with self.assertRaises(ValueError):
            Params(epsilon=2.5)
        with self.assertRaises(ValueError):
            Params(alpha=-1)
        with self.assertRaises(ValueError):
            Params.from_dict({'kappa': 1})

    def test_params_from_document_override(self):
        params = Params.from_dict({'tau': 0.3})
        self.assertEqual((params.tau, params.alpha), (0.3, 200.0))


class StageOneTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(10)

    def test_single_torso_is_assigned_when_it_pays(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:5, 2:5] = True
        regions = [make_region(0, Part.TORSO, mask)]
        instances = random_instances(self.rng, 1)
        problem = build_stage1(regions, instances, _features((1, 1)), np.array([0.5]),
                               _no_exclusions(1), SMALL_ANTHRO, DEFAULTS)
        self.assertLess(problem.g[0], -DEFAULTS.xi * problem.selection[0])
        assigned, empty = problem.complete(np.array([1])), problem.complete(np.array([0]))
        self.assertTrue(assigned.is_feasible)
        self.assertEqual(assigned.y.tolist(), [1])
        self.assertLess(assigned.objective, empty.objective)

    def test_overlapping_torsos_get_an_exclusion_row(self):
        regions = random_regions(self.rng, 2, Part.TORSO)
        iou = np.array([[1.0, 0.5], [0.5, 1.0]])
        problem = build_stage1(regions, random_instances(self.rng, 2), _features((2, 2)), np.array([0.2, 0.2]),
                               PairwiseExclusions(iou=iou, color=np.zeros((2, 2))), SMALL_ANTHRO, DEFAULTS)
        (row,) = problem.rows_tagged('exclusion')
        self.assertEqual(problem.B[row].toarray().ravel().tolist(), [1, 1, 1, 1])
        self.assertEqual(problem.f[row], 1)
        self.assertEqual(problem.row_instance[row], -1)

    def test_without_exclusions_only_coupling_and_size_rows(self):
        problem = build_stage1(random_regions(self.rng, 3, Part.TORSO), random_instances(self.rng, 2),
                               _features((3, 2)), np.full(3, 0.1), _no_exclusions(3), SMALL_ANTHRO, DEFAULTS)
        self.assertEqual(set(problem.row_tags), {'coupling', 'size', 'soft_size'})
        self.assertEqual(problem.row_tags.count('coupling'), 6)
        self.assertEqual(problem.row_tags.count('size'), 2)
        self.assertEqual(problem.row_tags.count('soft_size'), 4)

    def test_rows_follow_canonical_order(self):
        problem = random_problem(self.rng, 4, 2)
        order = [('coupling', 'exclusion', 'color', 'size', 'soft_size').index(tag) for tag in problem.row_tags]
        self.assertEqual(order, sorted(order))

    def test_coefficient_identity(self):
        problem = random_problem(self.rng, 4, 3)
        f, p = problem.features, problem.params
        expected = p.alpha * f.q + p.beta * f.r + p.gamma * f.d + p.theta - p.pi * problem.cover[:, None]
        np.testing.assert_array_equal(problem.g, expected.ravel())
        np.testing.assert_array_equal(problem.w, p.xi * problem.selection)

    def test_hard_size_row_scales_with_instance(self):
        problem = random_problem(self.rng, 3, 2)
        for j, r in enumerate(problem.rows_tagged('size')):
            self.assertEqual(problem.row_instance[r], j)
        scales = [problem.f[r] / SMALL_ANTHRO.max_area[Part.TORSO] for r in problem.rows_tagged('size')]
        self.assertTrue(all(s > 0 for s in scales))

    def test_slack_bound(self):
        problem = random_problem(self.rng, 2, 1)
        self.assertEqual(problem.slack_bound, SMALL_ANTHRO.slack_bound(Part.TORSO))

    def test_no_heads_gives_an_empty_problem(self):
        with self.assertLogs('assembly.builders', level='WARNING'):
            problem = build_stage1(random_regions(self.rng, 2, Part.TORSO), [], _features((2, 0)),
                                   np.full(2, 0.5), _no_exclusions(2), SMALL_ANTHRO, DEFAULTS)
        self.assertEqual((problem.n_x, problem.n_y), (0, 0))
        self.assertEqual(problem.empty_solution().objective, 0.0)


class StageTwoTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_one_column_per_selected_head(self):
        stage1 = random_problem(self.rng, 3, 3)
        instances = random_instances(np.random.default_rng(0), 3)
        torsos = random_regions(np.random.default_rng(1), 3, Part.TORSO)
        solution = Solution(x=np.zeros(9, dtype=np.int8), y=np.array([1, 0, 1], dtype=np.int8),
                            e=np.zeros(3), objective=0.0, is_feasible=True)
        solution.x[0 * 3 + 2] = 1
        composites = head_torso_instances(instances, torsos, stage1, solution)
        self.assertEqual([c.index for c in composites], [0, 2])
        self.assertTrue(np.all(composites[1].mask >= torsos[0].bitmask))
        self.assertEqual(composites[0].mask.sum(), instances[0].mask.sum())

        arms = random_regions(self.rng, 2, Part.ARM)
        problem = build_stage2(Part.ARM, arms, composites, _features((2, 2)), np.full(2, 0.5),
                               _no_exclusions(2), SMALL_ANTHRO, DEFAULTS)
        self.assertEqual(problem.n_instances, 2)
        self.assertEqual(problem.instance_ids, (0, 2))

    def test_part_specific_size_terms(self):
        for part in (Part.ARM, Part.LEG):
            problem = random_problem(self.rng, 3, 2, stage=2, part=part)
            self.assertEqual(problem.n_y, 0)
            self.assertEqual(problem.w.size, 0)
            self.assertEqual(problem.D.shape[1], 0)
            self.assertNotIn('coupling', problem.row_tags)
            soft = problem.rows_tagged('soft_size')
            self.assertEqual(problem.f[soft[0]], SMALL_ANTHRO.target_area[part])
            self.assertEqual(problem.f[soft[1]], -SMALL_ANTHRO.target_area[part])
            self.assertEqual(problem.slack_bound, SMALL_ANTHRO.slack_bound(part))

    def test_torso_is_not_a_stage_two_part(self):
        with self.assertRaises(ValueError):
            random_problem(self.rng, 2, 2, stage=2, part=Part.TORSO)

    def test_empty_stage_one_gives_empty_stage_two(self):
        stage1 = random_problem(self.rng, 2, 2)
        solution = stage1.empty_solution()
        self.assertEqual(head_torso_instances(random_instances(self.rng, 2), [], stage1, solution), [])


class ObjectiveTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(12)

    def test_zero_point(self):
        problem = random_problem(self.rng, 3, 2)
        zero = Solution(x=np.zeros(6), y=np.zeros(2), e=np.zeros(2), objective=0.0, is_feasible=True)
        self.assertEqual(evaluate_objective(problem, zero), 0.0)

    def test_infeasible_points_still_evaluate(self):
        problem = random_problem(self.rng, 3, 2)
        x = np.ones(6)
        solution = Solution(x=x, y=np.zeros(2), e=np.zeros(2), objective=0.0, is_feasible=False)
        self.assertAlmostEqual(evaluate_objective(problem, solution), problem.g.sum())
        self.assertFalse(problem.is_feasible(x, np.zeros(2), np.zeros(2)))

    def test_dimension_mismatch(self):
        problem = random_problem(self.rng, 3, 2)
        bad = Solution(x=np.zeros(5), y=np.zeros(2), e=np.zeros(2), objective=0.0, is_feasible=False)
        with self.assertRaises(ProblemShapeError):
            evaluate_objective(problem, bad)

    def test_matches_term_by_term_recomputation(self):
        for stage in (1, 2):
            problem = random_problem(self.rng, 3, 2, stage=stage)
            p, f = problem.params, problem.features
            for x in _binary_points(problem):
                solution = problem.complete(x)
                if not solution.is_feasible:
                    continue
                grid = x.reshape(3, 2)
                unary = np.sum((p.alpha * f.q + p.beta * f.r + p.gamma * f.d + p.theta) * grid)
                selection = p.xi * problem.selection @ solution.y if stage == 1 else 0.0
                slack = p.phi * solution.e.sum()
                cover = p.pi * problem.cover @ grid.sum(axis=1)
                self.assertAlmostEqual(evaluate_objective(problem, solution), unary + selection + slack - cover,
                                       places=6)
                self.assertAlmostEqual(p.cost_weights @ term_vector(problem, x, solution.y, solution.e),
                                       solution.objective, places=6)

    def test_completion_agrees_with_feasibility_check(self):
        problem = random_problem(self.rng, 4, 2)
        for x in _binary_points(problem):
            solution = problem.complete(x)
            self.assertEqual(solution.is_feasible, problem.is_feasible(solution.x, solution.y, solution.e))
            bound = np.full(2, problem.slack_bound)
            for y in itertools.product((0, 1), repeat=2):
                if problem.is_feasible(x, y, bound):
                    self.assertTrue(solution.is_feasible)
                    self.assertLessEqual(solution.objective, problem.objective(x, y, bound) + 1e-9)

    def test_empty_point_is_always_feasible(self):
        for stage in (1, 2):
            problem = random_problem(self.rng, 3, 2, stage=stage)
            self.assertTrue(problem.empty_solution().is_feasible)

    def test_problem_document_round_trip(self):
        problem = random_problem(self.rng, 3, 2)
        loaded = AssemblyProblem.from_dict(problem.to_dict())
        self.assertEqual(loaded.row_tags, problem.row_tags)
        np.testing.assert_array_equal(loaded.B.toarray(), problem.B.toarray())
        np.testing.assert_array_equal(loaded.D.toarray(), problem.D.toarray())
        np.testing.assert_array_equal(loaded.g, problem.g)
        np.testing.assert_array_equal(loaded.features.q, problem.features.q)

    def test_rows_may_only_reference_declared_variables(self):
        document = random_problem(self.rng, 2, 1).to_dict()
        document['rows'][0]['x'].append([7, 1.0])
        with self.assertRaises(ProblemShapeError):
            AssemblyProblem.from_dict(document)


class CrowdedProblemTestCase(SimpleTestCase):
    def setUp(self):
        self.problem = crowded_problem(np.random.default_rng(40), 30, 2)

    def _row_regions(self, tag):
        B = self.problem.B
        for row in np.flatnonzero(np.asarray(self.problem.row_tags) == tag):
            yield sorted({int(k) // self.problem.n_instances for k in B.indices[B.indptr[row]:B.indptr[row + 1]]})

    def test_every_edge_is_worth_taking(self):
        self.assertEqual((self.problem.n_regions, self.problem.n_instances), (30, 2))
        self.assertTrue(np.all(self.problem.g < 0))

    def test_merged_tiles_exclude_their_parts(self):
        # 15 regions per person: 12 tiles and 3 merged pairs
        pairs = list(self._row_regions('exclusion'))
        self.assertEqual(len(pairs), 12)
        for first, second in pairs:
            self.assertTrue(second % 15 >= 12 and first % 15 < 12)

    def test_colour_rows_only_join_different_people(self):
        pairs = list(self._row_regions('color'))
        self.assertTrue(pairs)
        for first, second in pairs:
            self.assertNotEqual(first // 15, second // 15)

    def test_own_regions_fit_under_the_cap(self):
        grid = np.zeros((30, 2))
        grid[:12, 0] = grid[15:27, 1] = 1
        solution = self.problem.complete(grid.ravel())
        self.assertTrue(solution.is_feasible)
        self.assertEqual(solution.y.tolist(), [1, 1])

    def test_stage_two(self):
        problem = crowded_problem(np.random.default_rng(41), 12, 3, stage=2)
        self.assertEqual(problem.part, Part.ARM)
        self.assertEqual(problem.n_y, 0)
