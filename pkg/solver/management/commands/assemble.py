import logging

from django.core.management.base import CommandError

from assembly.models import AssemblyProblem
from detangle.commands import DetangleCommand, GAP_REMAINING, read_json, write_json
from solver.baselines import exhaustive_oracle, greedy_baseline
from solver.branching import branch_and_bound
from solver.models import SolverOptions
from solver.simplex import lp_relaxation

logger = logging.getLogger('solver')


class Command(DetangleCommand):
    help = 'Solve a serialized assembly problem (problem.json) and write solution.json.'

    def add_arguments(self, parser):
        parser.add_argument('problem', help='problem.json to solve')
        parser.add_argument('--out', default='solution.json')
        parser.add_argument('--method', choices=('bnb', 'greedy', 'exhaustive'), default='bnb')
        parser.add_argument('--iters', type=int, help='subgradient iterations at the root node')
        parser.add_argument('--step', type=float, help='subgradient step size')
        parser.add_argument('--schedule', choices=('constant', 'diminishing', 'polyak'))
        parser.add_argument('--tol', type=float, help='absolute optimality gap')
        parser.add_argument('--node-budget', type=int)
        parser.add_argument('--threads', type=int)
        parser.add_argument('--oracle', choices=('exhaustive', 'lp', 'none'), default='none',
                            help='cross-check the result against an independent solver')

    def handle(self, *args, **options):
        problem = AssemblyProblem.from_dict(read_json(options['problem']))
        solver_options = SolverOptions.from_settings().override(
            iterations=options['iters'],
            step=options['step'],
            schedule=options['schedule'],
            tolerance=options['tol'],
            node_budget=options['node_budget'],
            threads=options['threads'],
        )
        if options['method'] == 'exhaustive':
            solution = exhaustive_oracle(problem, solver_options.exhaustive_limit)
        elif options['method'] == 'greedy':
            solution = greedy_baseline(problem, solver_options)
        else:
            solution = branch_and_bound(problem, solver_options)

        if not problem.is_feasible(solution.x, solution.y, solution.e):
            raise CommandError('solver returned an infeasible point')
        self.check_oracle(problem, solution, options['oracle'], solver_options)

        write_json(options['out'], solution.to_dict())
        self.stdout.write(f"objective {solution.objective:.6f} bound {solution.bound:.6f} "
                          f"status {solution.status} nodes {solution.nodes}")
        if solution.status == 'budget':
            raise CommandError(f"node budget exhausted with gap {solution.gap:.6g}", returncode=GAP_REMAINING)

    def check_oracle(self, problem, solution, oracle, solver_options):
        if oracle == 'none':
            return
        tolerance = solver_options.tolerance
        if oracle == 'exhaustive':
            reference = exhaustive_oracle(problem, solver_options.exhaustive_limit).objective
            agrees = abs(reference - solution.objective) <= tolerance
        else:
            reference = lp_relaxation(problem, solver_options.lp_method).value
            agrees = reference <= solution.objective + tolerance
        logger.info("oracle agreement: %s (%s %.6f, solver %.6f)",
                    'yes' if agrees else 'no', oracle, reference, solution.objective)
        if not agrees:
            raise CommandError(f"{oracle} oracle disagrees: {reference:.6f} vs {solution.objective:.6f}")
