import os
import tempfile
import time
from io import StringIO

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from assembly.fixtures import crowded_problem, random_problem
from assembly.models import AssemblyProblem, Params
from detangle.commands import write_json
from semantics.models import Part
from solver.baselines import exhaustive_oracle, greedy_baseline
from solver.branching import branch_and_bound, pins_infeasible
from solver.lagrangian import dual_ascent, lagrangian, solve_P1, solve_P2, solve_P3
from solver.models import OversizedProblemError, SimplexError, SolverOptions
from solver.simplex import binding_rows, lp_relaxation, relaxation_rows, simplex_minimize

FAST = SolverOptions(iterations=200, node_iterations=50, tolerance=1e-9)

# (regions, instances) shapes with at most 12 edge variables
SMALL_SHAPES = [(3, 2), (4, 2), (5, 2), (6, 2), (3, 3), (4, 3), (6, 1), (12, 1), (2, 4)]


def _bare_problem(g, n_regions, n_instances, rows=(), slack_bound=10.0):
    """Stage-two problem with hand-written x-only rows: [(x entries {k: coef}, f), ...]."""
    g = np.asarray(g, dtype=np.float64)
    B = np.zeros((len(rows), g.size))
    for r, (entries, _) in enumerate(rows):
        for k, coef in entries.items():
            B[r, k] = coef
    return AssemblyProblem(
        stage=2, part=Part.ARM,
        region_ids=tuple(range(n_regions)), instance_ids=tuple(range(n_instances)),
        unary=g.reshape(n_regions, n_instances), cover=np.zeros(n_regions), selection=np.zeros(n_instances),
        params=Params(), g=g, w=np.zeros(0), phi=1.0,
        B=sparse.csr_matrix(B), C=sparse.csr_matrix((len(rows), n_instances)), D=sparse.csr_matrix((len(rows), 0)),
        f=np.array([f for _, f in rows], dtype=np.float64),
        row_tags=('exclusion',) * len(rows), row_instance=np.full(len(rows), -1), slack_bound=slack_bound,
    )


def _triangle():
    """Three pairwise-excluding regions, one instance: LP -1.5, integer optimum -1."""
    return _bare_problem([-1, -1, -1], 3, 1, rows=[({0: 1, 1: 1}, 1), ({1: 1, 2: 1}, 1), ({0: 1, 2: 1}, 1)])


def _milp_optimum(problem):
    """Integer optimum from HiGHS branch and cut with no relative gap."""
    A, b = relaxation_rows(problem)
    c = np.concatenate([problem.g, problem.w, np.full(problem.n_instances, problem.phi)])
    integrality = np.concatenate([np.ones(problem.n_x + problem.n_y), np.zeros(problem.n_instances)])
    result = milp(c, constraints=LinearConstraint(A, -np.inf, b), integrality=integrality,
                  bounds=Bounds(0, np.inf), options={'mip_rel_gap': 0})
    return result.fun


class SubproblemTestCase(SimpleTestCase):
    def test_most_negative_link(self):
        self.assertEqual(solve_P1([-3, -1], 1, 2).tolist(), [1, 0])

    def test_no_negative_link(self):
        self.assertEqual(solve_P1([2, 5], 1, 2).tolist(), [0, 0])

    def test_ties_take_smallest_instance(self):
        self.assertEqual(solve_P1([-2, -2, 1], 1, 3).tolist(), [1, 0, 0])

    def test_random_matrices_match_per_region_enumeration(self):
        rng = np.random.default_rng(20)
        for _ in range(50):
            coefficients = rng.normal(size=(6, 3))
            x = solve_P1(coefficients.ravel(), 6, 3).reshape(6, 3)
            for i in range(6):
                options = [0.0] + coefficients[i].tolist()
                best = int(np.argmin(options))
                self.assertEqual(x[i].tolist(), [int(best == j + 1) for j in range(3)])
            self.assertTrue(np.all(x.sum(axis=1) <= 1))

    def test_pins(self):
        lower = np.array([0, 0, 0, 1])
        upper = np.array([0, 1, 1, 1])
        x = solve_P1([-5, -1, 3, 4], 2, 2, lower, upper)
        self.assertEqual(x.tolist(), [0, 1, 0, 1])

    def test_sign_rules(self):
        self.assertEqual(solve_P2([-0.5, 0.5, 0.0]).tolist(), [1, 0, 0])
        self.assertEqual(solve_P3([-0.5, 0.5, 0.0], 7.0).tolist(), [7.0, 0.0, 0.0])


class DualAscentTestCase(SimpleTestCase):
    def test_without_coupling_rows_bound_is_exact_at_first_iteration(self):
        rng = np.random.default_rng(21)
        problem = _bare_problem(rng.normal(size=8), 4, 2)
        state = dual_ascent(problem, iterations=1)
        self.assertAlmostEqual(state.best_bound, exhaustive_oracle(problem).objective, places=9)

    def test_weak_duality_for_any_multipliers(self):
        rng = np.random.default_rng(22)
        for n_regions, n_instances in SMALL_SHAPES:
            problem = random_problem(rng, n_regions, n_instances, stage=int(rng.integers(1, 3)))
            optimum = exhaustive_oracle(problem).objective
            for _ in range(5):
                nu = rng.exponential(scale=rng.choice([0.1, 10.0, 1000.0]), size=problem.n_rows)
                self.assertLessEqual(lagrangian(problem, nu)[0], optimum + 1e-9 * (1 + abs(optimum)))
            for schedule, step in (('constant', 1e-6), ('diminishing', 1.0), ('polyak', 1.0)):
                state = dual_ascent(problem, iterations=100, step=step, schedule=schedule, target=optimum)
                self.assertLessEqual(max(state.history), optimum + 1e-9 * (1 + abs(optimum)))

    def test_running_max_bound(self):
        problem = random_problem(np.random.default_rng(23), 5, 2)
        state = dual_ascent(problem, iterations=50, step=0.5, schedule='diminishing')
        self.assertEqual(state.best_bound, max(state.history))
        self.assertTrue(np.all(state.nu >= 0))

    def test_optimal_multipliers_reach_the_lp_value(self):
        # LP duals of the relaxed rows close the gap exactly, the inner problem being integral
        rng = np.random.default_rng(24)
        for _ in range(20):
            problem = random_problem(rng, int(rng.integers(3, 9)), int(rng.integers(1, 4)))
            A, b = relaxation_rows(problem)
            c = np.concatenate([problem.g, problem.w, np.full(problem.n_instances, problem.phi)])
            result = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method='highs')
            coupled = slice(problem.n_regions, problem.n_regions + problem.n_rows)
            nu = np.maximum(0.0, -result.ineqlin.marginals[coupled])
            value = lagrangian(problem, nu)[0]
            self.assertAlmostEqual(value, result.fun, delta=1e-4 * (1 + abs(result.fun)))

    def test_diminishing_schedule_reaches_the_lp_value(self):
        rng = np.random.default_rng(25)
        for _ in range(50):
            problem = random_problem(rng, int(rng.integers(3, 9)), int(rng.integers(1, 4)),
                                     stage=int(rng.integers(1, 3)))
            lp = lp_relaxation(problem, 'highs').value
            state = dual_ascent(problem, iterations=5000, step=1.0, schedule='diminishing')
            self.assertLessEqual(state.iterations, 5000)
            self.assertAlmostEqual(state.best_bound, lp, delta=1e-6 * (1 + abs(lp)))

    def test_plain_diminishing_steps_stay_below_the_lp_value(self):
        problem = random_problem(np.random.default_rng(37), 6, 2)
        lp = lp_relaxation(problem, 'highs').value
        state = dual_ascent(problem, iterations=300, step=1.0, schedule='diminishing', polish=False)
        self.assertEqual(state.iterations, len(state.history))
        self.assertLessEqual(state.best_bound, lp + 1e-9 * (1 + abs(lp)))

    def test_debug_mode_checks_weak_duality(self):
        problem = _triangle()
        with self.settings(DEBUG=True):
            state = dual_ascent(problem, iterations=20, step=0.1, schedule='diminishing')
        self.assertLessEqual(state.best_bound, 0.0)


class BranchAndBoundTestCase(SimpleTestCase):
    def test_without_coupling_rows_solved_at_root(self):
        problem = _bare_problem(np.random.default_rng(26).normal(size=40), 20, 2)
        solution = branch_and_bound(problem, FAST.override(leaf_size=1))
        self.assertEqual(solution.nodes, 1)
        self.assertEqual(solution.status, 'optimal')
        self.assertAlmostEqual(solution.objective, np.minimum(problem.g.reshape(20, 2).min(axis=1), 0).sum())

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(27)
        for sweep in range(100):
            n_regions, n_instances = SMALL_SHAPES[sweep % len(SMALL_SHAPES)]
            problem = random_problem(rng, n_regions, n_instances, stage=1 + sweep % 2)
            expected = exhaustive_oracle(problem)
            solution = branch_and_bound(problem, FAST.override(leaf_size=4 + sweep % 3 * 30))
            self.assertEqual(solution.status, 'optimal')
            self.assertTrue(problem.is_feasible(solution.x, solution.y, solution.e))
            self.assertAlmostEqual(solution.objective, expected.objective, delta=1e-6)

    def test_fractional_root_needs_branching(self):
        solution = branch_and_bound(_triangle(), FAST.override(leaf_size=1))
        self.assertAlmostEqual(solution.objective, -1.0)
        self.assertGreater(solution.nodes, 1)

    def test_budget_exhaustion_reports_gap(self):
        with self.assertLogs('solver.branching', level='WARNING'):
            solution = branch_and_bound(_triangle(), FAST.override(leaf_size=1, node_budget=1))
        self.assertEqual(solution.status, 'budget')
        self.assertGreater(solution.gap, 0.0)
        self.assertLessEqual(solution.bound, -1.0)

    def test_objective_does_not_depend_on_threads(self):
        rng = np.random.default_rng(28)
        for _ in range(5):
            problem = random_problem(rng, 8, 3)
            single = branch_and_bound(problem, FAST.override(leaf_size=8, threads=1))
            several = branch_and_bound(problem, FAST.override(leaf_size=8, threads=3))
            self.assertAlmostEqual(single.objective, several.objective, delta=1e-6)

    def test_negative_costs_force_branching_and_match_milp(self):
        rng = np.random.default_rng(38)
        nodes = []
        for sweep in range(8):
            problem = crowded_problem(rng, 24 + 4 * sweep, 2 + sweep % 2, stage=1 + sweep % 2)
            solution = branch_and_bound(problem, SolverOptions(threads=1))
            optimum = _milp_optimum(problem)
            self.assertEqual(solution.status, 'optimal')
            self.assertTrue(problem.is_feasible(solution.x, solution.y, solution.e))
            self.assertAlmostEqual(solution.objective, optimum, delta=1e-6 * (1 + abs(optimum)))
            nodes.append(solution.nodes)
        self.assertGreater(max(nodes), 1)

    def test_root_takes_the_root_schedule(self):
        options = FAST.override(leaf_size=1, schedule='diminishing', node_schedule='polyak')
        with self.assertLogs('solver.branching', level='DEBUG') as logs:
            branch_and_bound(_triangle(), options)
        self.assertTrue(any('diminishing iterations' in line for line in logs.output))

    @tag('slow')
    def test_five_hundred_edges_within_ten_seconds(self):
        solved = 0
        for seed in range(10):
            problem = crowded_problem(np.random.default_rng(seed), 250, 2)
            self.assertEqual(problem.n_x, 500)
            start = time.perf_counter()
            solution = branch_and_bound(problem, SolverOptions(threads=1))
            elapsed = time.perf_counter() - start
            solved += solution.status == 'optimal' and solution.gap <= 1e-6 and elapsed <= 10.0
        self.assertGreaterEqual(solved, 9)

    def test_pin_propagation(self):
        problem = _triangle()
        self.assertTrue(pins_infeasible(problem, np.array([1, 1, 0]), np.ones(3)))
        self.assertFalse(pins_infeasible(problem, np.array([1, 0, 0]), np.ones(3)))

    def test_raising_tau_never_increases_the_optimum(self):
        for seed in range(10):
            strict = random_problem(np.random.default_rng(seed), 4, 2, params=Params(pi=300, xi=50, tau=0.05))
            loose = random_problem(np.random.default_rng(seed), 4, 2, params=Params(pi=300, xi=50, tau=0.6))
            self.assertLessEqual(exhaustive_oracle(loose).objective, exhaustive_oracle(strict).objective + 1e-9)


class LinearRelaxationTestCase(SimpleTestCase):
    def test_textbook_program(self):
        value, z = simplex_minimize([-1, -1], [[1, 2], [3, 1]], [4, 6])
        self.assertAlmostEqual(value, -2.8)
        np.testing.assert_allclose(z, [1.6, 1.2])

    def test_phase_one_handles_negative_right_hand_sides(self):
        value, z = simplex_minimize([1, 2], [[-1, -1], [1, 0]], [-2, 3])
        self.assertAlmostEqual(value, 2.0)

    def test_infeasible_and_unbounded(self):
        with self.assertRaises(SimplexError):
            simplex_minimize([1], [[1]], [-1])
        with self.assertRaises(SimplexError):
            simplex_minimize([-1, 0], [[0, 1]], [1])

    def test_degenerate_cycling_example_terminates(self):
        c = [-0.75, 20, -0.5, 6]
        A = [[0.25, -8, -1, 9], [0.5, -12, -0.5, 3], [0, 0, 1, 0]]
        b = [0, 0, 1]
        value, _ = simplex_minimize(c, A, b)
        self.assertAlmostEqual(value, linprog(c, A_ub=A, b_ub=b, method='highs').fun)

    def test_dense_simplex_agrees_with_highs(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            problem = random_problem(rng, int(rng.integers(2, 8)), int(rng.integers(1, 4)),
                                     stage=int(rng.integers(1, 3)))
            dense, highs = lp_relaxation(problem, 'simplex'), lp_relaxation(problem, 'highs')
            self.assertAlmostEqual(dense.value, highs.value, delta=1e-6 * (1 + abs(highs.value)))

    def test_relaxation_bounds_the_integer_optimum(self):
        rng = np.random.default_rng(30)
        for n_regions, n_instances in SMALL_SHAPES:
            problem = random_problem(rng, n_regions, n_instances)
            self.assertLessEqual(lp_relaxation(problem).value, exhaustive_oracle(problem).objective + 1e-6)

    def test_integral_relaxation_equals_branch_and_bound(self):
        problem = _bare_problem(np.random.default_rng(31).normal(size=12), 6, 2)
        self.assertAlmostEqual(lp_relaxation(problem).value, branch_and_bound(problem, FAST).objective, places=6)

    @tag('slow')
    def test_dual_bound_is_ten_times_cheaper_than_the_lp(self):
        rng = np.random.default_rng(32)
        ratios = []
        for _ in range(10):
            problem = random_problem(rng, 500, 2)
            start = time.perf_counter()
            dual_ascent(problem)
            dual_time = time.perf_counter() - start
            start = time.perf_counter()
            lp_relaxation(problem)
            ratios.append((time.perf_counter() - start) / dual_time)
        self.assertGreaterEqual(np.median(ratios), 10.0)

    def test_dense_simplex_refuses_oversized_tableaus(self):
        with self.assertRaises(OversizedProblemError):
            simplex_minimize(np.ones(5000), sparse.csr_matrix((20000, 5000)), np.ones(20000))

    def test_large_problems_go_to_highs(self):
        problem = random_problem(np.random.default_rng(36), 250, 2)
        with self.assertRaises(OversizedProblemError):
            lp_relaxation(problem, 'simplex')
        self.assertEqual(lp_relaxation(problem).method, 'highs')

    def test_rows_the_bound_box_satisfies_are_dropped(self):
        problem = _bare_problem([-1, -2], 2, 1, rows=[({0: 1}, 5), ({0: 1, 1: 1}, 1)])
        A, b = relaxation_rows(problem)
        rows = binding_rows(problem, A, b)
        # two assignment rows, then the coupled rows, then one slack bound
        self.assertEqual(rows.tolist(), [0, 1, 3, 4])
        self.assertAlmostEqual(lp_relaxation(problem, 'simplex').value, -2.0)


class BaselineTestCase(SimpleTestCase):
    def test_exhaustive_refuses_large_problems(self):
        with self.assertRaises(OversizedProblemError):
            exhaustive_oracle(random_problem(np.random.default_rng(33), 11, 2))

    def test_greedy_equals_optimum_with_one_head(self):
        rng = np.random.default_rng(34)
        for stage in (1, 2):
            problem = random_problem(rng, 6, 1, stage=stage)
            self.assertAlmostEqual(greedy_baseline(problem, FAST).objective, exhaustive_oracle(problem).objective,
                                   delta=1e-6)

    def test_greedy_first_grab_can_block_the_optimum(self):
        # instance 1 grabs both regions first; splitting them is better
        problem = _bare_problem([-10, -9, -1, -8], 2, 2)
        greedy, optimum = greedy_baseline(problem, FAST), exhaustive_oracle(problem)
        self.assertAlmostEqual(greedy.objective, -17)
        self.assertAlmostEqual(optimum.objective, -18)
        self.assertTrue(problem.is_feasible(greedy.x, greedy.y, greedy.e))


class AssembleCommandTestCase(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.problem_path = os.path.join(self.directory.name, 'problem.json')
        self.out = os.path.join(self.directory.name, 'solution.json')

    def tearDown(self):
        self.directory.cleanup()

    def test_oracle_agreement_is_logged(self):
        write_json(self.problem_path, random_problem(np.random.default_rng(35), 4, 2).to_dict())
        with self.assertLogs('solver', level='INFO') as logs:
            call_command('assemble', self.problem_path, out=self.out, oracle='exhaustive', stdout=StringIO())
        self.assertTrue(any('oracle agreement: yes' in line for line in logs.output))
        self.assertTrue(os.path.exists(self.out))

    def test_gap_remaining_exit_status(self):
        write_json(self.problem_path, _triangle().to_dict())
        with self.settings(DETANGLE={**settings.DETANGLE, 'SOLVER': {'leaf_size': 1, 'node_budget': 1}}):
            with self.assertRaises(CommandError) as raised, self.assertLogs('solver', level='WARNING'):
                call_command('assemble', self.problem_path, out=self.out, stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 3)

    def test_missing_problem_file(self):
        with self.assertRaises(CommandError), self.assertLogs('detangle', level='ERROR') as logs:
            call_command('assemble', os.path.join(self.directory.name, 'absent.json'), out=self.out)
        self.assertTrue(any('absent.json' in line for line in logs.output))

    def test_schedule_flag_drives_the_root(self):
        write_json(self.problem_path, _triangle().to_dict())
        with self.settings(DETANGLE={**settings.DETANGLE, 'SOLVER': {**settings.DETANGLE['SOLVER'], 'leaf_size': 1}}):
            with self.assertLogs('solver.branching', level='DEBUG') as logs:
                call_command('assemble', self.problem_path, out=self.out, schedule='polyak', stdout=StringIO())
        self.assertTrue(any('polyak iterations' in line for line in logs.output))

    def test_package_logger_is_configured(self):
        self.assertIn('detangle', settings.LOGGING['loggers'])
