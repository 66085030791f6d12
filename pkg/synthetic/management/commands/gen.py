import numpy as np
from django.conf import settings

from assembly.fixtures import random_problem
from detangle.commands import DetangleCommand, write_json
from synthetic.render import render_fixture
from synthetic.writer import write_fixture


class Command(DetangleCommand):
    help = 'Render a synthetic stick-figure scene with its soft maps, proposals and ground truth.'

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='defaults to DETANGLE_SEED')
        parser.add_argument('--people', type=int, default=1)
        parser.add_argument('--overlap', type=float, default=0.0,
                            help='fraction of spread-arm width shared by neighbours')
        parser.add_argument('--reference-height', type=float, default=64.0,
                            help='height in pixels of a scale-1 figure')
        parser.add_argument('--fixed-scale', action='store_true', help='draw every figure at scale 1')
        parser.add_argument('--problem', type=int, metavar='REGIONS',
                            help='also write problem.json: a random two-instance program over REGIONS regions')
        parser.add_argument('--out', required=True)

    def handle(self, *args, **options):
        seed = settings.SEED if options['seed'] is None else options['seed']
        fixture = render_fixture(seed, options['people'], options['overlap'], options['reference_height'],
                                 vary_scale=not options['fixed_scale'])
        write_fixture(fixture, options['out'])
        if options['problem']:
            problem = random_problem(np.random.default_rng(seed), options['problem'], 2)
            write_json(f"{options['out']}/problem.json", problem.to_dict())
        self.stdout.write(f"{len(fixture.persons)} persons, {len(fixture.proposals)} proposals, "
                          f"{fixture.shape[1]}x{fixture.shape[0]} pixels")
