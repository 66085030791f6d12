"""Two-pass graph-cut labelling of the pooled soft maps."""
import logging

import numpy as np

from .maxflow import maxflow
from .models import Part, BODY_PARTS, SemanticMap

logger = logging.getLogger(__name__)


def grid_edges(mask):
    """4-neighbour pairs (p, q) of flat indices of pixels where `mask` holds."""
    height, width = mask.shape
    index = np.arange(height * width).reshape(height, width)
    right = mask[:, :-1] & mask[:, 1:]
    down = mask[:-1, :] & mask[1:, :]
    p = np.concatenate([index[:, :-1][right], index[:-1, :][down]])
    q = np.concatenate([index[:, 1:][right], index[1:, :][down]])
    return p, q


def _floor_scaled(values, scale):
    # the epsilon absorbs representation error of exact decimal capacities
    return np.floor(np.asarray(values, dtype=np.float64) * scale + 1e-9).astype(np.int64)


def minimize_binary_energy(unary0, unary1, p, q, e00, e01, e10, e11, scale=1000):
    """Exact minimizer of a submodular pairwise binary energy by one maxflow cut.

    Node i takes value 0 when it ends on the source side. Each pair term is
    split as E = e00 + (e10 - e00) x_p + (e11 - e10) x_q + (e01 + e10 - e00 - e11)(1 - x_p) x_q;
    the last coefficient becomes the p->q capacity. Capacities are multiplied
    by `scale` and floored to integers.
    """
    n = len(unary0)
    u0 = np.asarray(unary0, dtype=np.float64).copy()
    u1 = np.asarray(unary1, dtype=np.float64).copy()
    pair = np.asarray(e01, dtype=np.float64) + e10 - e00 - e11
    if np.any(pair < -1e-12):
        raise ValueError("pairwise energy is not submodular")
    np.add.at(u1, p, np.asarray(e10, dtype=np.float64) - e00)
    np.add.at(u1, q, np.asarray(e11, dtype=np.float64) - e10)

    net = u1 - u0
    source, sink = n, n + 1
    nodes = np.arange(n)
    tails = np.concatenate([np.full(n, source), nodes, p])
    heads = np.concatenate([nodes, np.full(n, sink), q])
    capacities = np.concatenate([
        _floor_scaled(np.maximum(net, 0.0), scale),
        _floor_scaled(np.maximum(-net, 0.0), scale),
        _floor_scaled(np.maximum(pair, 0.0), scale),
    ])
    result = maxflow(n + 2, tails, heads, capacities, source, sink)
    return ~result.source_side[:n]


def binary_energy(unary0, unary1, p, q, weight, labels):
    labels = np.asarray(labels, dtype=bool)
    unary = np.where(labels, unary1, unary0).sum()
    return float(unary + (np.asarray(weight) * (labels[p] != labels[q])).sum())


def graph_cut_pass1(soft, unary_weight=1.0, pairwise_weight=0.2, scale=1000):
    """Foreground/background labelling of normalized soft maps (5, H, W)."""
    background = np.asarray(soft[Part.BACKGROUND], dtype=np.float64)
    foreground = 1.0 - background
    shape = background.shape
    everywhere = np.ones(shape, dtype=bool)
    p, q = grid_edges(everywhere)
    weight = np.full(p.size, pairwise_weight)
    zeros = np.zeros(p.size)
    labels = minimize_binary_energy(
        unary_weight * (1.0 - background).ravel(),
        unary_weight * (1.0 - foreground).ravel(),
        p, q, zeros, weight, weight, zeros, scale,
    )
    logger.debug("pass 1: %d of %d pixels foreground", labels.sum(), labels.size)
    return labels.reshape(shape)


def potts_energy(unary, labels, p, q, weight):
    """Energy of a multi-label Potts labelling; `unary` is (labels, nodes)."""
    return float(unary[labels, np.arange(labels.size)].sum()
                 + (np.asarray(weight) * (labels[p] != labels[q])).sum())


def alpha_expansion(unary, p, q, weight, iterations=20, scale=1000, initial=None):
    """Alpha-expansion over Potts energies.

    One iteration visits every label in order. A move is kept only when it
    lowers the energy, so the returned trace (energy after each move) never
    increases. Stops early after an iteration without change.
    """
    unary = np.asarray(unary, dtype=np.float64)
    num_labels, n = unary.shape
    labels = unary.argmin(axis=0) if initial is None else np.asarray(initial).copy()
    weight = np.broadcast_to(np.asarray(weight, dtype=np.float64), np.shape(p))
    energy = potts_energy(unary, labels, p, q, weight)
    trace = [energy]
    nodes = np.arange(n)
    for iteration in range(iterations):
        changed = False
        for alpha in range(num_labels):
            lp, lq = labels[p], labels[q]
            switched = minimize_binary_energy(
                unary[labels, nodes], unary[alpha], p, q,
                weight * (lp != lq), weight * (lp != alpha), weight * (alpha != lq),
                np.zeros_like(weight), scale,
            )
            proposal = np.where(switched, alpha, labels)
            proposal_energy = potts_energy(unary, proposal, p, q, weight)
            if proposal_energy < energy - 1e-12:
                labels, energy, changed = proposal, proposal_energy, True
            trace.append(energy)
        if not changed:
            logger.debug("alpha-expansion converged after %d iterations", iteration + 1)
            break
    return labels, trace


def outside_arm_range(shape, heads, anthro):
    """Pixels farther than every head's scaled arm range radius."""
    rows, cols = np.indices(shape)
    outside = np.ones(shape, dtype=bool)
    for head in heads:
        radius = anthro.range_radius_at(Part.ARM, head.scale)
        outside &= (rows - head.y) ** 2 + (cols - head.x) ** 2 > radius ** 2
    return outside


def pass2_unaries(soft, heads, anthro, unary_weight=1.0, range_penalty=1.0):
    """Unary costs (4, H, W) for head, torso, arm and leg.

    Torso and arm pay `range_penalty` outside every head's arm range radius.
    """
    soft = np.asarray(soft, dtype=np.float64)
    unary = unary_weight * (1.0 - soft[list(BODY_PARTS)])
    outside = outside_arm_range(soft.shape[1:], heads, anthro)
    for part in (Part.TORSO, Part.ARM):
        unary[part] += range_penalty * outside
    return unary


def graph_cut_pass2(soft, foreground, heads, anthro, unary_weight=1.0, pairwise_weight=0.2,
                    range_penalty=1.0, iterations=20, scale=1000):
    """Label foreground pixels as head, torso, arm or leg by alpha-expansion."""
    if not heads:
        logger.warning("no head candidates: the arm range penalty applies everywhere")
    unary = pass2_unaries(soft, heads, anthro, unary_weight, range_penalty)
    foreground = np.asarray(foreground, dtype=bool)
    pixels = np.flatnonzero(foreground)
    labels = np.full(foreground.size, int(Part.BACKGROUND), dtype=np.int8)
    if pixels.size:
        position = np.full(foreground.size, -1)
        position[pixels] = np.arange(pixels.size)
        p, q = grid_edges(foreground)
        node_labels, trace = alpha_expansion(
            unary.reshape(len(BODY_PARTS), -1)[:, pixels],
            position[p], position[q], pairwise_weight, iterations, scale,
        )
        labels[pixels] = node_labels
        logger.debug("pass 2: %d expansion moves, energy %.3f -> %.3f", len(trace) - 1, trace[0], trace[-1])
    return SemanticMap(labels=labels.reshape(foreground.shape))
