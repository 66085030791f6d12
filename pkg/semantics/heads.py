import numpy as np
from scipy.ndimage import maximum_filter

from .models import HeadCandidate


def detect_heads(head_stack, factors, window=7, threshold=0.2):
    """Head centers by non-maximum suppression on the scale-pooled head map.

    `head_stack` has shape (scales, height, width). A pixel is kept when its
    pooled value reaches `threshold` and no other pixel of its window is larger
    or equal with a smaller row-major index. The candidate scale is the inverse
    of the factor whose map responds most strongly at the center.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd number")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    head_stack = np.asarray(head_stack, dtype=np.float64)
    pooled = head_stack.max(axis=0)
    height, width = pooled.shape
    window_max = maximum_filter(pooled, size=window, mode='constant', cval=-np.inf)
    radius = window // 2

    heads = []
    for index in np.flatnonzero((pooled >= threshold) & (pooled >= window_max)):
        y, x = divmod(int(index), width)
        y0, x0 = max(0, y - radius), max(0, x - radius)
        patch = pooled[y0:y + radius + 1, x0:x + radius + 1]
        ties_y, ties_x = np.nonzero(patch == pooled[y, x])
        if (ties_y[0] + y0, ties_x[0] + x0) != (y, x):
            continue
        level = int(np.argmax(head_stack[:, y, x]))
        heads.append(HeadCandidate(
            x=x, y=y,
            scale=1.0 / factors[level],
            peak_prob=float(min(pooled[y, x], 1.0)),
        ))
    return heads
