"""Image to person parses: semantic passes, region pool, then the three assembly programs."""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

from assembly.builders import build_stage1, build_stage2, head_torso_instances
from regions.features import cost_feature_table, cover_weights, pairwise_exclusions
from regions.models import Instance
from regions.pool import build_pool, head_regions
from semantics.graphcut import graph_cut_pass1, graph_cut_pass2
from semantics.heads import detect_heads
from semantics.models import Part
from semantics.stack import max_pool_stack
from solver.branching import branch_and_bound
from solver.models import SolverOptions
from .models import ConstraintViolationError, PersonParse, Scene
from .rendering import paint_labels

logger = logging.getLogger(__name__)

STAGE_TWO_PARTS = (Part.ARM, Part.LEG)


def _section(name, overrides):
    return {**settings.DETANGLE[name], **(overrides or {})}


def prepare_scene(stack, proposals, anthro, image=None, semantic=None, pool=None):
    """Pooled maps, foreground, semantic labels, head candidates and the region pool.

    `semantic` and `pool` override entries of the SEMANTIC and POOL settings.
    """
    semantic_options, pool_options = _section('SEMANTIC', semantic), _section('POOL', pool)
    soft = max_pool_stack(stack)
    heads = detect_heads(stack.maps[Part.HEAD], stack.factors,
                         semantic_options['nms_window'], semantic_options['nms_threshold'])
    foreground = graph_cut_pass1(soft, semantic_options['unary_weight'], semantic_options['pairwise_weight'],
                                 semantic_options['capacity_scale'])
    semantic_map = graph_cut_pass2(
        soft, foreground, heads, anthro,
        unary_weight=semantic_options['unary_weight'],
        pairwise_weight=semantic_options['pairwise_weight'],
        range_penalty=semantic_options['range_penalty'],
        iterations=semantic_options['expansion_iterations'],
        scale=semantic_options['capacity_scale'],
    )
    bins = pool_options['histogram_bins']
    discs, kept = head_regions(heads, foreground, anthro, image, bins)
    regions = build_pool(semantic_map, proposals, image, pool_options['min_area'],
                         pool_options['max_regions'], bins)
    logger.info("%d head candidates, %d pooled regions (%s)", len(kept), sum(map(len, regions.values())),
                ", ".join(f"{part.label} {len(found)}" for part, found in regions.items()))
    return Scene(stack=stack, soft=soft, foreground=foreground, semantic=semantic_map, heads=kept,
                 head_regions=discs, pool=regions, image=image)


class Pipeline:
    """Stage one assigns torso regions to heads; stage two assigns arms and legs to the
    selected head-torso composites. Problems, solutions and feature tables stay on the
    instance for inspection.
    """

    def __init__(self, scene, params, anthro, options=None):
        self.scene = scene
        self.params = params
        self.anthro = anthro
        self.options = options or SolverOptions.from_settings()
        self.problems = {}
        self.solutions = {}
        self.features = {}
        self.exclusions = {}
        self.instances = {}

    def build(self, part, regions, instances):
        """The assembly program of one part type."""
        features = cost_feature_table(regions, instances, self.anthro, self.scene.stack)
        cover = cover_weights(regions, self.scene.semantic)
        exclusions = pairwise_exclusions(regions)
        self.features[part], self.exclusions[part], self.instances[part] = features, exclusions, instances
        if part == Part.TORSO:
            return build_stage1(regions, instances, features, cover, exclusions, self.anthro, self.params)
        return build_stage2(part, regions, instances, features, cover, exclusions, self.anthro, self.params)

    def solve(self, part, problem):
        if problem.n_x == 0:
            solution = problem.complete(np.zeros(0))
            solution.bound = solution.objective
        else:
            solution = branch_and_bound(problem, self.options)
        if not problem.is_feasible(solution.x, solution.y, solution.e):
            raise ConstraintViolationError(f"{part.label} solution violates its constraints")
        logger.info("%s: objective %.6f, gap %.3g, %d nodes", part.label, solution.objective,
                    solution.gap, solution.nodes)
        self.problems[part], self.solutions[part] = problem, solution
        return solution

    def head_instances(self):
        return [Instance(index=j, head=head, mask=disc.bitmask)
                for j, (head, disc) in enumerate(zip(self.scene.heads, self.scene.head_regions))]

    def stage_one(self):
        instances = self.head_instances()
        torsos = self.scene.pool[Part.TORSO]
        problem = self.build(Part.TORSO, torsos, instances)
        solution = self.solve(Part.TORSO, problem)
        return head_torso_instances(instances, torsos, problem, solution)

    def stage_two(self, composites):
        """Arm and leg programs, solved concurrently."""
        def run(part):
            problem = self.build(part, self.scene.pool[part], composites)
            return self.solve(part, problem)

        with ThreadPoolExecutor(max_workers=len(STAGE_TWO_PARTS)) as pool:
            list(pool.map(run, STAGE_TWO_PARTS))

    def persons(self, composites):
        """One parse per selected head, numbered from 1 in head order."""
        scene = self.scene
        persons = []
        for person, composite in enumerate(composites, start=1):
            disc = scene.head_regions[composite.index]
            parts, regions = {Part.HEAD: disc.bitmask}, {Part.HEAD: (disc.id,)}
            for part, column in self._columns(composite):
                masks = [region.bitmask for region in column]
                if masks:
                    parts[part] = np.logical_or.reduce(masks)
                regions[part] = tuple(region.id for region in column)
            persons.append(PersonParse(index=person, parts=parts, regions=regions, head=composite.head))
        return persons

    def _columns(self, composite):
        for part in (Part.TORSO, *STAGE_TWO_PARTS):
            problem, solution = self.problems[part], self.solutions[part]
            j = problem.instance_ids.index(composite.index)
            owner = solution.assignment(problem.n_instances)
            yield part, [region for region, k in zip(self.scene.pool[part], owner) if k == j]

    def run(self):
        composites = self.stage_one()
        if composites:
            self.stage_two(composites)
        else:
            logger.warning("no person selected; every foreground pixel stays unattributed")
        persons = self.persons(composites)
        return persons, paint_labels(persons, self.scene.semantic, self.scene.soft)


def run_pipeline(stack, proposals, params, anthro, image=None, options=None, semantic=None, pool=None):
    """Person parses and the (person, part) label raster of one image."""
    scene = prepare_scene(stack, proposals, anthro, image, semantic, pool)
    return Pipeline(scene, params, anthro, options).run()
