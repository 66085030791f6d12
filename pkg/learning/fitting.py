"""Max-margin objective weights and the exclusion threshold grid search."""
import logging
from dataclasses import replace

import numpy as np

from evaluation.scores import forward_score
from pipeline.stages import Pipeline
from solver.models import SimplexError
from solver.simplex import simplex_minimize
from .models import LearningError, MarginFit, TERMS

logger = logging.getLogger(__name__)


def margin_lp(images):
    """(c, A_ub, b_ub) over z = (v, u+, u-) with u = u+ - u- free per image.

    min -sum(u)  s.t.  u_i - v.(w_n - w_p) <= 0 per negative,  sum(v) = 1,  v >= 0.
    """
    n_t, n_i = len(TERMS), len(images)
    rows, bounds = [], []
    for i, image in enumerate(images):
        for delta in image.differences:
            row = np.zeros(n_t + 2 * n_i)
            row[:n_t] = -delta
            row[n_t + i], row[n_t + n_i + i] = 1.0, -1.0
            rows.append(row)
            bounds.append(0.0)
    simplex = np.zeros(n_t + 2 * n_i)
    simplex[:n_t] = 1.0
    rows.extend([simplex, -simplex])
    bounds.extend([1.0, -1.0])
    c = np.zeros(n_t + 2 * n_i)
    c[n_t:n_t + n_i], c[n_t + n_i:] = -1.0, 1.0
    return c, np.stack(rows), np.asarray(bounds)


def fit_params(images):
    """Weights v >= 0 with sum(v) = 1 maximizing the summed per-image margins.

    The margin of an image is the smallest energy gap between any of its
    negatives and its positive. Images whose margin stays at or below zero are
    reported.
    """
    usable = []
    for image in images:
        if image.negatives:
            usable.append(image)
        else:
            logger.warning("%s has no negative sample and is left out", image.name)
    if not usable:
        raise LearningError("no training image has both a positive and a negative sample")

    c, A, b = margin_lp(usable)
    try:
        _, z = simplex_minimize(c, A, b)
    except SimplexError as error:
        raise LearningError(f"margin program failed: {error}") from error
    weights = np.clip(z[:len(TERMS)], 0.0, None)
    weights /= weights.sum()
    margins = np.array([float((image.differences @ weights).min()) for image in usable])
    fit = MarginFit(weights=weights, margins=margins, names=tuple(image.name for image in usable))
    if not fit.separable:
        logger.warning("training data is not separable: %d image(s) without a positive margin, worst %s (%.6g)",
                       int(np.sum(margins <= 0)), fit.worst, margins.min())
    logger.info("fitted weights %s", ", ".join(f"{name} {v:.4g}" for name, v in zip(TERMS, weights)))
    return fit


def learned_params(fit, base):
    """`base` with the fitted weights, scaled to the same total as its own."""
    return base.with_weights(fit.weights * base.cost_weights.sum())


def tau_scores(scenes, grid, params, options=None):
    """{tau: mean forward instance IoU} over (scene, ground-truth persons, anthro) triples."""
    scores = {}
    for tau in grid:
        candidate = replace(params, tau=float(tau))
        values = [forward_score(Pipeline(scene, candidate, anthro, options).run()[0], persons)
                  for scene, persons, anthro in scenes]
        scores[float(tau)] = float(np.mean(values)) if values else 0.0
        logger.info("tau %.3f: forward %.4f", tau, scores[float(tau)])
    return scores


def pick_tau(scores):
    """Best scoring tau; the first of the grid on ties."""
    return max(scores, key=lambda tau: (scores[tau], -list(scores).index(tau)))


def search_tau(scenes, grid, params, options=None):
    if not grid:
        raise ValueError("the tau grid is empty")
    return pick_tau(tau_scores(scenes, grid, params, options))
