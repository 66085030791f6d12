"""Ground-truth positives and randomly sampled negative assemblies."""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from assembly.builders import head_torso_instances, term_vector
from pipeline.stages import Pipeline, STAGE_TWO_PARTS
from rasters.rle import bitmask_iou
from regions.features import pairwise_exclusions
from semantics.models import Part
from .models import AssemblyExample, TermVector, TrainingImage

logger = logging.getLogger(__name__)


def match_heads(instances, persons):
    """{instance index: ground-truth person containing its head}.

    More confident heads claim a person first; a person is claimed once.
    """
    owners, claimed = {}, set()
    for instance in sorted(instances, key=lambda k: -k.head.peak_prob):
        for person in persons:
            if person.index in claimed or person.shape is None:
                continue
            if person.instance_mask[instance.head.y, instance.head.x]:
                owners[instance.index] = person
                claimed.add(person.index)
                break
    return owners


def positive_assignment(problem, regions, owners, containment=0.8):
    """Regions lying mostly inside their part of an owner, added largest first while feasible."""
    x = np.zeros(problem.n_x, dtype=np.int8)
    columns = [(j, owners[k]) for j, k in enumerate(problem.instance_ids) if k in owners]
    for i in sorted(range(len(regions)), key=lambda i: -regions[i].area):
        region = regions[i]
        for j, person in columns:
            inside = np.count_nonzero(region.bitmask & person.mask(region.part, region.bitmask.shape))
            if inside < containment * region.area:
                continue
            x[problem.x_index(i, j)] = 1
            if not problem.complete(x).is_feasible:
                x[problem.x_index(i, j)] = 0
            break
    return x


def build_example(name, scene, persons, params, anthro, containment=0.8):
    """The torso, arm and leg problems of a scene with the ground-truth assembly of each."""
    pipeline = Pipeline(scene, params, anthro)
    instances = pipeline.head_instances()
    owners = match_heads(instances, persons)
    if len(owners) < len(persons):
        logger.info("%s: %d of %d persons have no detected head", name, len(persons) - len(owners), len(persons))

    torsos = scene.pool[Part.TORSO]
    torso_problem = pipeline.build(Part.TORSO, torsos, instances)
    x = positive_assignment(torso_problem, torsos, owners, containment)
    problems, regions, positive = {Part.TORSO: torso_problem}, {Part.TORSO: torsos}, {Part.TORSO: x}

    composites = head_torso_instances(instances, torsos, torso_problem, torso_problem.complete(x))
    if composites:
        for part in STAGE_TWO_PARTS:
            problem = pipeline.build(part, scene.pool[part], composites)
            problems[part], regions[part] = problem, scene.pool[part]
            positive[part] = positive_assignment(problem, scene.pool[part], owners, containment)
    return AssemblyExample(name=name, problems=problems, regions=regions, positive=positive)


def complete_assembly(example, assignment):
    """{part: Solution} extending every x of `assignment`, or None when one is infeasible."""
    solutions = {}
    for part, problem in example.problems.items():
        solution = problem.complete(assignment[part])
        if not solution.is_feasible:
            return None
        solutions[part] = solution
    return solutions


def assembly_terms(example, assignment, solutions=None):
    solutions = solutions or complete_assembly(example, assignment)
    values = sum(term_vector(problem, solutions[part].x, solutions[part].y, solutions[part].e)
                 for part, problem in example.problems.items())
    return TermVector(values=values, assignment={part: np.array(x) for part, x in assignment.items()})


def person_masks(example, assignment):
    """{instance index: union of the regions assigned to it}."""
    masks = {}
    for part, problem in example.problems.items():
        if problem.n_x == 0:
            continue
        grid = np.asarray(assignment[part]).reshape(problem.n_regions, problem.n_instances)
        for i, j in zip(*np.nonzero(grid)):
            k = problem.instance_ids[j]
            bitmask = example.regions[part][i].bitmask
            masks[k] = masks[k] | bitmask if k in masks else bitmask.copy()
    return masks


def assembly_iou(first, second, instance_ids):
    """Mean per-instance IoU; two empty instances count as equal."""
    if not instance_ids:
        return 1.0
    scores = []
    for k in instance_ids:
        a, b = first.get(k), second.get(k)
        if a is None and b is None:
            scores.append(1.0)
        elif a is None or b is None:
            scores.append(0.0)
        else:
            scores.append(bitmask_iou(a, b))
    return float(np.mean(scores))


def random_assignment(problem, rng):
    """Each region joins a uniformly chosen instance with a probability drawn per call."""
    x = np.zeros(problem.n_x, dtype=np.int8)
    if problem.n_x == 0:
        return x
    chosen = rng.random(problem.n_regions) < rng.random()
    columns = rng.integers(0, problem.n_instances, size=problem.n_regions)
    x[np.asarray([problem.x_index(i, columns[i]) for i in np.flatnonzero(chosen)], dtype=np.intp)] = 1
    return x


def sample_negatives(example, rng, count=20, attempts=10_000, negative_iou=0.5):
    """Feasible random assemblies whose persons overlap the ground truth by less than `negative_iou`.

    Returns fewer than `count` vectors, with a warning, when a sample is not
    found within `attempts` tries.
    """
    positive = person_masks(example, example.positive)
    ids = example.instance_ids
    negatives = []
    while len(negatives) < count:
        for _ in range(attempts):
            assignment = {part: random_assignment(problem, rng) for part, problem in example.problems.items()}
            solutions = complete_assembly(example, assignment)
            if solutions is None or assembly_iou(person_masks(example, assignment), positive, ids) >= negative_iou:
                continue
            negatives.append(assembly_terms(example, assignment, solutions))
            break
        else:
            logger.warning("%s: %d of %d negatives found in %d attempts", example.name, len(negatives), count,
                           attempts)
            break
    return negatives


def training_images(examples, seed=0, count=20, attempts=10_000, negative_iou=0.5, threads=1):
    """One TrainingImage per example with a ground-truth person; images are sampled concurrently."""
    examples = [example for example in examples if any(np.any(x) for x in example.positive.values())]
    streams = np.random.SeedSequence(seed).spawn(len(examples))

    def sample(pair):
        example, stream = pair
        negatives = sample_negatives(example, np.random.default_rng(stream), count, attempts, negative_iou)
        return TrainingImage(name=example.name, positive=assembly_terms(example, example.positive),
                             negatives=negatives)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(sample, zip(examples, streams)))


def color_distances(example):
    """Histogram distances of region pairs that the ground truth puts in the same part of one person."""
    distances = []
    for part, problem in example.problems.items():
        if problem.n_x == 0:
            continue
        color = pairwise_exclusions(example.regions[part]).color
        grid = np.asarray(example.positive[part]).reshape(problem.n_regions, problem.n_instances)
        for j in range(problem.n_instances):
            members = np.flatnonzero(grid[:, j])
            distances.extend(color[m, n] for a, m in enumerate(members) for n in members[a + 1:])
    return distances


def estimate_epsilon(examples, percentile=95.0):
    """Colour exclusion threshold from the ground truth, in [0, 2]; None without same-part pairs."""
    distances = [d for example in examples for d in color_distances(example)]
    if not distances:
        logger.warning("no ground-truth part has two regions; epsilon cannot be estimated")
        return None
    return float(np.clip(np.percentile(distances, percentile), 0.0, 2.0))
