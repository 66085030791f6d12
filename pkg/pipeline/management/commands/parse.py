import logging
from pathlib import Path

from django.core.management.base import CommandError

from detangle.commands import DetangleCommand, GAP_REMAINING, load_anthro, load_params, write_json
from rasters.formats import read_masks, write_label_raster, write_masks
from regions.documents import features_document, pool_document, write_document
from semantics.stack import load_image, load_stack
from solver.models import SolverOptions
from pipeline.documents import instance_masks, persons_document
from pipeline.stages import Pipeline, prepare_scene

logger = logging.getLogger('pipeline')


class Command(DetangleCommand):
    help = ('Parse one image into persons and write parse.json, the person and semantic label rasters, '
            'heads.json and the intermediate pool.')

    def add_arguments(self, parser):
        parser.add_argument('--stack', required=True, help='soft map stack directory')
        parser.add_argument('--proposals', help='.masks.json with generic object proposals')
        self.add_params_arguments(parser)
        parser.add_argument('--out', required=True, help='output directory')
        parser.add_argument('--node-budget', type=int)
        parser.add_argument('--threads', type=int)

    def handle(self, *args, **options):
        stack = load_stack(options['stack'])
        image = load_image(options['stack'], stack.shape)
        proposals = list(read_masks(options['proposals']).values()) if options['proposals'] else []
        params, anthro = load_params(options['params']), load_anthro(options['anthro'])
        solver_options = SolverOptions.from_settings().override(
            node_budget=options['node_budget'], threads=options['threads'])

        scene = prepare_scene(stack, proposals, anthro, image)
        pipeline = Pipeline(scene, params, anthro, solver_options)
        persons, raster = pipeline.run()

        out = Path(options['out'])
        out.mkdir(parents=True, exist_ok=True)
        width, height = stack.width, stack.height
        summary = {part.label: {key: value for key, value in solution.to_dict().items() if key not in ('x', 'y', 'e')}
                   for part, solution in pipeline.solutions.items()}
        write_json(out / 'parse.json', persons_document(persons, width, height, solutions=summary))
        write_label_raster(out / 'labels', raster)
        write_label_raster(out / 'semantic', scene.semantic.as_label_raster())
        write_json(out / 'heads.json', [head.to_dict() for head in scene.heads])
        write_masks(out / 'persons.masks.json', instance_masks(persons, width, height), width, height)
        pool = pool_document(scene.regions, width, height)
        pool['heads'] = [region.to_dict() for region in scene.head_regions]
        write_document(out / 'pool.json', pool)
        write_document(out / 'features.json', {
            part.label: features_document(scene.pool[part], pipeline.features[part], pipeline.exclusions[part],
                                          params.tau, params.epsilon)
            for part in pipeline.features
        })
        self.stdout.write(f"{len(persons)} persons written to {out}")

        unfinished = [part.label for part, solution in pipeline.solutions.items() if solution.status == 'budget']
        if unfinished:
            raise CommandError(f"node budget exhausted for {', '.join(unfinished)}", returncode=GAP_REMAINING)
