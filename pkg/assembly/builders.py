"""Construction of the three assembly programs: torso to head, then arm and leg to head-torso."""
import logging

import numpy as np
from scipy import sparse

from regions.models import Instance
from semantics.models import Part
from .models import AssemblyProblem, ProblemShapeError

logger = logging.getLogger(__name__)


def unary_cost(features, params):
    """c = alpha*q + beta*r + gamma*d + theta; works on scalars and arrays alike."""
    return params.alpha * features.q + params.beta * features.r + params.gamma * features.d + params.theta


class _Rows:
    def __init__(self, n_x, n_instances, n_y):
        self.shape = (n_x, n_instances, n_y)
        self.entries = {'x': [], 'e': [], 'y': []}
        self.f, self.tags, self.instance = [], [], []

    def add(self, tag, instance, f, x=(), y=(), e=()):
        r = len(self.f)
        for key, items in (('x', x), ('y', y), ('e', e)):
            self.entries[key].extend((r, k, v) for k, v in items)
        self.f.append(f)
        self.tags.append(tag)
        self.instance.append(instance)

    def block(self, key, width):
        entries = self.entries[key]
        rows = [r for r, _, _ in entries]
        cols = [k for _, k, _ in entries]
        data = [v for _, _, v in entries]
        return sparse.csr_matrix((data, (rows, cols)), shape=(len(self.f), width), dtype=np.float64)


def _build(stage, part, regions, instances, features, cover, exclusions, anthro, params):
    n_r, n_j = len(regions), len(instances)
    if features.q.shape != (n_r, n_j):
        raise ProblemShapeError(f"features are {features.q.shape}, expected {(n_r, n_j)}")
    if len(cover) != n_r or exclusions.iou.shape != (n_r, n_r):
        raise ProblemShapeError("cover weights and exclusions must cover every region")
    with_y = stage == 1
    n_x, n_y = n_r * n_j, n_j if with_y else 0

    unary = np.asarray(unary_cost(features, params), dtype=np.float64).reshape(n_r, n_j)
    g = (unary - params.pi * np.asarray(cover)[:, None]).ravel()
    selection = np.array([instance.head.selection_cost for instance in instances], dtype=np.float64)
    w = params.xi * selection if with_y else np.zeros(0)

    rows = _Rows(n_x, n_j, n_y)
    if with_y:
        for i in range(n_r):
            for j in range(n_j):
                rows.add('coupling', j, 0.0, x=[(i * n_j + j, 1.0)], y=[(j, -1.0)])
    for m, n in exclusions.overlapping_pairs(params.tau):
        rows.add('exclusion', -1, 1.0, x=[(i * n_j + j, 1.0) for i in (m, n) for j in range(n_j)])
    for u, v in exclusions.color_pairs(params.epsilon):
        for j in range(n_j):
            rows.add('color', j, 1.0, x=[(u * n_j + j, 1.0), (v * n_j + j, 1.0)])

    areas = np.array([region.area for region in regions], dtype=np.float64)
    target, cap = anthro.target_area[part], anthro.max_area[part]
    for j, instance in enumerate(instances):
        scale2 = instance.scale ** 2
        rows.add('size', j, scale2 * cap, x=[(i * n_j + j, areas[i]) for i in range(n_r)])
    for j, instance in enumerate(instances):
        normalized = areas / instance.scale ** 2
        column = [i * n_j + j for i in range(n_r)]
        if with_y:
            rows.add('soft_size', j, 0.0, x=zip(column, normalized), y=[(j, -target)], e=[(j, -1.0)])
            rows.add('soft_size', j, 0.0, x=zip(column, -normalized), y=[(j, target)], e=[(j, -1.0)])
        else:
            rows.add('soft_size', j, target, x=zip(column, normalized), e=[(j, -1.0)])
            rows.add('soft_size', j, -target, x=zip(column, -normalized), e=[(j, -1.0)])

    problem = AssemblyProblem(
        stage=stage,
        part=Part(part),
        region_ids=tuple(region.id for region in regions),
        instance_ids=tuple(instance.index for instance in instances),
        unary=unary,
        cover=np.asarray(cover, dtype=np.float64),
        selection=selection,
        params=params,
        g=g,
        w=w,
        phi=params.phi,
        B=rows.block('x', n_x),
        C=rows.block('e', n_j),
        D=rows.block('y', n_y),
        f=np.asarray(rows.f, dtype=np.float64),
        row_tags=tuple(rows.tags),
        row_instance=np.asarray(rows.instance, dtype=np.int64),
        slack_bound=params.slack_bound if params.slack_bound is not None else anthro.slack_bound(part),
        areas=areas,
        features=features,
    )
    logger.debug("stage %d %s problem: %d regions, %d instances, %d rows",
                 stage, problem.part.label, n_r, n_j, problem.n_rows)
    return problem


def build_stage1(torsos, instances, features, cover, exclusions, anthro, params):
    """Torso regions against head instances, with instance selection variables y."""
    if not instances:
        logger.warning("no head candidates; the torso problem is empty")
    return _build(1, Part.TORSO, torsos, instances, features, cover, exclusions, anthro, params)


def build_stage2(part, regions, instances, features, cover, exclusions, anthro, params):
    """Arm or leg regions against the head-torso instances chosen in stage one; y is fixed to one."""
    part = Part(part)
    if part not in (Part.ARM, Part.LEG):
        raise ValueError(f"stage two assembles arms or legs, not {part.label}")
    return _build(2, part, regions, instances, features, cover, exclusions, anthro, params)


def head_torso_instances(instances, torsos, problem, solution):
    """Selected heads of a stage-one solution, each merged with its assigned torso regions."""
    if problem.n_instances == 0:
        return []
    grid = np.asarray(solution.x).reshape(problem.n_regions, problem.n_instances)
    composites = []
    for j, instance in enumerate(instances):
        if not solution.y[j]:
            continue
        mask = instance.mask.copy()
        for i in np.flatnonzero(grid[:, j]):
            mask |= torsos[i].bitmask
        composites.append(Instance(index=instance.index, head=instance.head, mask=mask))
    return composites


def evaluate_objective(problem, solution):
    """g.x + w.y + phi * sum(e), whether or not the solution is feasible."""
    problem.check_shapes(solution.x, solution.y, solution.e)
    return problem.objective(solution.x, solution.y, solution.e)


def term_vector(problem, x, y, e):
    """Objective split into the sums multiplied by (alpha, beta, gamma, theta, xi, phi, pi).

    The dot product with Params.cost_weights gives back the objective.
    """
    if problem.features is None:
        raise ProblemShapeError("problem carries no cost features")
    x = np.asarray(x, dtype=np.float64)
    grid = x.reshape(problem.n_regions, problem.n_instances)
    features = problem.features
    covered = grid.sum(axis=1)
    return np.array([
        float(np.sum(features.q * grid)),
        float(np.sum(features.r * grid)),
        float(np.sum(features.d * grid)),
        float(grid.sum()),
        float(problem.selection @ np.asarray(y, dtype=np.float64)) if problem.n_y else 0.0,
        float(np.sum(e)),
        -float(problem.cover @ covered),
    ])
