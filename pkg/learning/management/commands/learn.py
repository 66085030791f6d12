import logging
from dataclasses import replace
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from detangle.commands import DetangleCommand, load_anthro, load_params, read_json, write_json
from evaluation.documents import find_documents
from learning.fitting import fit_params, learned_params, search_tau
from learning.samples import build_example, estimate_epsilon, training_images
from pipeline.documents import read_persons
from pipeline.stages import prepare_scene
from rasters.formats import read_masks
from semantics.models import ReferenceAnthropometry
from semantics.stack import load_image, load_stack
from solver.models import SolverOptions

logger = logging.getLogger('learning')

# keeps a learned epsilon strictly inside (0, 2)
EPSILON_MARGIN = 0.01


class Command(DetangleCommand):
    help = 'Fit the objective weights, epsilon and tau on a directory of labelled images; write params.json.'

    def add_arguments(self, parser):
        parser.add_argument('--train', required=True,
                            help='directory of images, each with stack/, gt.json and optionally '
                                 'proposals.masks.json and anthro.json')
        parser.add_argument('--out', default='params.json')
        self.add_params_arguments(parser)
        parser.add_argument('--negatives', type=int, help='negative samples per image')
        parser.add_argument('--tau-grid', help='comma-separated tau values to search')
        parser.add_argument('--seed', type=int, help='defaults to DETANGLE_SEED')
        parser.add_argument('--threads', type=int)

    def handle(self, *args, **options):
        learning = settings.DETANGLE['LEARNING']
        base, anthro = load_params(options['params']), load_anthro(options['anthro'])
        grid = learning['tau_grid'] if options['tau_grid'] is None else \
            [float(value) for value in options['tau_grid'].split(',') if value.strip()]
        threads = options['threads'] or settings.THREADS
        seed = settings.SEED if options['seed'] is None else options['seed']
        solver_options = SolverOptions.from_settings().override(threads=options['threads'])

        documents = {name: path for name, path in find_documents(options['train']).items() if path.name == 'gt.json'}
        if not documents:
            raise CommandError(f"{options['train']} holds no gt.json")

        scenes, examples = [], []
        for name, path in sorted(documents.items()):
            scene, persons, image_anthro = self.load_scene(path.parent, anthro)
            scenes.append((scene, persons, image_anthro))
            examples.append(build_example(name, scene, persons, base, image_anthro, learning['containment']))

        images = training_images(examples, seed, options['negatives'] or learning['negatives'],
                                 learning['attempts'], learning['negative_iou'], threads)
        fit = fit_params(images)
        params = learned_params(fit, base)
        epsilon = estimate_epsilon(examples, learning['epsilon_percentile'])
        if epsilon is not None:
            params = replace(params, epsilon=min(max(epsilon, EPSILON_MARGIN), 2.0 - EPSILON_MARGIN))
        params = replace(params, tau=search_tau(scenes, grid, params, solver_options))

        write_json(options['out'], params.to_dict())
        self.stdout.write(f"{len(images)} images, separable: {'yes' if fit.separable else 'no'}; "
                          f"tau {params.tau:g}, epsilon {params.epsilon:.4g} written to {options['out']}")

    def load_scene(self, directory, anthro):
        directory = Path(directory)
        stack = load_stack(directory / 'stack')
        image = load_image(directory / 'stack', stack.shape)
        proposals_path = directory / 'proposals.masks.json'
        proposals = list(read_masks(proposals_path).values()) if proposals_path.exists() else []
        anthro_path = directory / 'anthro.json'
        if anthro_path.exists():
            anthro = ReferenceAnthropometry.from_dict(read_json(anthro_path), base=anthro)
        persons, width, height = read_persons(directory / 'gt.json')
        if (height, width) != stack.shape:
            raise CommandError(f"{directory.name}: ground truth is {width}x{height}, stack is "
                               f"{stack.width}x{stack.height}")
        logger.info("%s: %d ground-truth persons", directory.name, len(persons))
        return prepare_scene(stack, proposals, anthro, image), persons, anthro
