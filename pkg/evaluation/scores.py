"""Forward/backward best-match IoU scores and threshold curves."""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from rasters.rle import bitmask_iou
from semantics.models import BODY_PARTS
from .models import Matches, ScoreReport

logger = logging.getLogger(__name__)

THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(21))


def iou_matrix(first, second):
    """IoU of every mask in `first` against every mask in `second`."""
    if not first or not second:
        return np.zeros((len(first), len(second)))
    a = np.stack([np.ravel(mask) for mask in first]).astype(np.float32)
    b = np.stack([np.ravel(mask) for mask in second]).astype(np.float32)
    intersection = (a @ b.T).astype(np.float64)
    union = a.sum(axis=1)[:, None] + b.sum(axis=1)[None, :] - intersection
    return np.divide(intersection, union, out=np.zeros_like(intersection), where=union > 0)


def _part_ious(sources, targets, best):
    rows = np.full((len(sources), len(BODY_PARTS)), np.nan)
    for s, source in enumerate(sources):
        target = targets[best[s]] if targets else None
        for k, part in enumerate(BODY_PARTS):
            if not source.has(part):
                continue
            rows[s, k] = 0.0 if target is None else bitmask_iou(source.mask(part), target.mask(part, source.shape))
    return rows


def match(pred, gt):
    """Each ground-truth person against its best prediction, and the other way round."""
    ious = iou_matrix([person.instance_mask for person in gt], [person.instance_mask for person in pred])
    forward = ious.max(axis=1) if pred else np.zeros(len(gt))
    backward = ious.max(axis=0) if gt else np.zeros(len(pred))
    return Matches(
        forward=forward,
        backward=backward,
        forward_parts=_part_ious(gt, pred, ious.argmax(axis=1) if pred else None),
        backward_parts=_part_ious(pred, gt, ious.argmax(axis=0) if gt else None),
    )


def _mean(values):
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()) if values.size else 0.0


def forward_score(pred, gt):
    """Mean over ground-truth persons of the best IoU against any prediction."""
    return _mean(match(pred, gt).forward)


def backward_score(pred, gt):
    """Mean over predictions of the best IoU against any ground-truth person."""
    return _mean(match(pred, gt).backward)


def curve_points(matches, thresholds=THRESHOLDS):
    thresholds = [float(t) for t in thresholds]
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    return [(t, _mean(matches.forward > t), _mean(matches.backward > t)) for t in thresholds]


def iou_curve(pred, gt, thresholds=THRESHOLDS):
    """(threshold, forward, backward): fractions of best matches with IoU above each threshold."""
    return curve_points(match(pred, gt), thresholds)


def _instance_part_mean(rows):
    # parts first, then instances; persons without any part are left out
    present = ~np.isnan(rows).all(axis=1) if rows.size else np.zeros(0, dtype=bool)
    return _mean([np.nanmean(row) for row in rows[present]])


def _column_mean(rows, k):
    column = rows[:, k] if rows.size else np.zeros(0)
    return _mean(column[~np.isnan(column)])


def score_report(matches, images=1, thresholds=THRESHOLDS):
    return ScoreReport(
        images=images,
        forward=_mean(matches.forward),
        backward=_mean(matches.backward),
        part_forward=_instance_part_mean(matches.forward_parts),
        part_backward=_instance_part_mean(matches.backward_parts),
        per_part={part: (_column_mean(matches.forward_parts, k), _column_mean(matches.backward_parts, k))
                  for k, part in enumerate(BODY_PARTS)},
        curve=curve_points(matches, thresholds),
    )


def evaluate_dataset(pairs, thresholds=THRESHOLDS, threads=1):
    """Score (prediction persons, GroundTruth) pairs with all persons pooled across images."""
    pairs = list(pairs)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        matches = list(pool.map(lambda pair: match(pair[0], pair[1].persons), pairs))
    logger.info("scored %d images, %d ground-truth persons", len(pairs), sum(len(m.forward) for m in matches))
    return score_report(Matches.pool(matches), len(pairs), thresholds)
