"""Stick-figure scenes: part masks, colour image, soft map stack and proposals."""
import logging
import math

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from pipeline.models import PersonParse
from pipeline.rendering import legend
from rasters.models import LabelRaster
from rasters.rle import encode_rle
from semantics.models import Part, BODY_PARTS, HeadCandidate, ReferenceAnthropometry, SoftMapStack
from semantics.stack import DEFAULT_FACTORS
from .models import (
    ARM_LENGTH, ARM_WIDTH, BACKGROUND_COLOR, FIGURE_WIDTH, Fixture, LEG_LENGTH, LEG_WIDTH, MAX_OVERLAP,
    SKIN, StickFigure, TORSO_BOTTOM, TORSO_TOP, TORSO_WIDTH,
)

logger = logging.getLogger(__name__)

FIGURE_SCALES = (1.0, 1 / 0.9, 1.25)
MARGIN = 4
HIP_OFFSET = 0.06
SHOULDER_DROP = 0.03
SMOOTHING = 0.7
NOISE = 0.05
# width of the head response across stack levels, in log scale
SCALE_SPREAD = 0.15

# one colour per histogram bin triple, so different figures never share a colour bin
PALETTE = (
    (200, 30, 30), (30, 60, 200), (30, 160, 60), (220, 200, 40),
    (150, 40, 180), (240, 130, 20), (20, 180, 190), (90, 90, 20),
)


def place_figures(rng, people, overlap, anthro, vary_scale=True):
    """Figures standing left to right on a common ground line.

    Neighbouring figures share `overlap` of their spread-arm width.
    Returns the figures and the canvas shape.
    """
    if people < 1:
        raise ValueError("a scene needs at least one person")
    clamped = min(max(float(overlap), 0.0), MAX_OVERLAP)
    if clamped != overlap:
        logger.warning("overlap %.3f clamped to %.3f", overlap, clamped)
    scales = rng.choice(FIGURE_SCALES, size=people) if vary_scale else np.ones(people)
    heights = anthro.reference_height * scales
    widths = FIGURE_WIDTH * heights
    tallest = heights.max()
    shirts = rng.permutation(len(PALETTE))
    trousers = rng.permutation(len(PALETTE))

    figures, x = [], MARGIN + widths[0] / 2
    for k in range(people):
        if k:
            x += (widths[k - 1] + widths[k]) / 2 * (1 - clamped)
        figures.append(StickFigure(
            x=float(round(x)),
            top=float(MARGIN + round(tallest - heights[k])),
            scale=float(scales[k]),
            arm_angles=tuple(float(a) for a in rng.uniform(35, 65, size=2)),
            leg_angles=tuple(float(a) for a in rng.uniform(5, 20, size=2)),
            shirt=PALETTE[shirts[k % len(PALETTE)]],
            trousers=PALETTE[trousers[k % len(PALETTE)]],
        ))
    shape = (int(math.ceil(tallest)) + 2 * MARGIN, int(math.ceil(x + widths[-1] / 2)) + MARGIN)
    return figures, shape


def _limb(start, side, angle, length):
    radians = math.radians(angle)
    return (start[0] + side * length * math.sin(radians), start[1] + length * math.cos(radians))


def _head_center(figure, anthro):
    x, y = figure.head_center(anthro)
    return int(round(x)), int(round(y))


def _draw(draw, figure, anthro, colors):
    """Legs, torso, arms, then head; later strokes cover earlier ones."""
    height = figure.height(anthro.reference_height)
    x, top = figure.x, figure.top
    leg_width = max(3, round(LEG_WIDTH * height))
    arm_width = max(3, round(ARM_WIDTH * height))
    for side, angle in zip((-1, 1), figure.leg_angles):
        hip = (x + side * HIP_OFFSET * height, top + TORSO_BOTTOM * height)
        draw.line([hip, _limb(hip, side, angle, LEG_LENGTH * height)], fill=colors[Part.LEG], width=leg_width)
    half = TORSO_WIDTH / 2 * height
    draw.rectangle([x - half, top + TORSO_TOP * height, x + half, top + TORSO_BOTTOM * height],
                   fill=colors[Part.TORSO])
    for side, angle in zip((-1, 1), figure.arm_angles):
        shoulder = (x + side * half, top + (TORSO_TOP + SHOULDER_DROP) * height)
        draw.line([shoulder, _limb(shoulder, side, angle, ARM_LENGTH * height)], fill=colors[Part.ARM],
                  width=arm_width)
    cx, cy = _head_center(figure, anthro)
    r = anthro.head_radius_at(figure.scale)
    draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=colors[Part.HEAD])


def draw_figure(figure, shape, anthro):
    """Part grid of one figure: the part id, -1 where the figure is absent."""
    height, width = shape
    canvas = Image.new('L', (width, height), 0)
    _draw(ImageDraw.Draw(canvas), figure, anthro, {part: int(part) + 1 for part in Part})
    return np.asarray(canvas, dtype=np.int16) - 1


def paint_image(figures, shape, anthro):
    height, width = shape
    canvas = Image.new('RGB', (width, height), BACKGROUND_COLOR)
    draw = ImageDraw.Draw(canvas)
    for figure in figures:
        colors = {Part.HEAD: SKIN, Part.TORSO: figure.shirt, Part.ARM: figure.shirt, Part.LEG: figure.trousers}
        _draw(draw, figure, anthro, colors)
    return np.asarray(canvas, dtype=np.uint8)


def composite(figures, shape, anthro):
    """(owner, part) grids of the visible pixels; owner 0 and part -1 on background."""
    owner = np.zeros(shape, dtype=np.int32)
    parts = np.full(shape, -1, dtype=np.int16)
    for index, figure in enumerate(figures, start=1):
        grid = draw_figure(figure, shape, anthro)
        drawn = grid >= 0
        owner[drawn] = index
        parts[drawn] = grid[drawn]
    return owner, parts


def soft_stack(figures, owner, parts, anthro, rng, factors=DEFAULT_FACTORS, noise=NOISE):
    """Smoothed part indicators plus noise, identical at every level for the body.

    Each head adds a peaked response that is strongest at the level whose
    factor is the inverse of the figure scale.
    """
    shape = parts.shape
    maps = np.zeros((len(Part), len(factors)) + shape, dtype=np.float32)
    for part in (Part.TORSO, Part.ARM, Part.LEG):
        maps[part] = ndimage.gaussian_filter((parts == part).astype(np.float64), SMOOTHING) + noise * rng.random(shape)
    maps[Part.BACKGROUND] = ndimage.gaussian_filter((parts < 0).astype(np.float64), SMOOTHING) \
        + noise * rng.random(shape)

    rows, cols = np.indices(shape)
    levels = np.log(np.asarray(factors))
    for index, figure in enumerate(figures, start=1):
        cx, cy = _head_center(figure, anthro)
        r = anthro.head_radius_at(figure.scale)
        distance2 = (cols - cx) ** 2 + (rows - cy) ** 2
        blob = np.where(distance2 <= (1.5 * r) ** 2, np.exp(-distance2 / (2 * (r / 2) ** 2)), 0.0)
        visible = ndimage.gaussian_filter(((owner == index) & (parts == Part.HEAD)).astype(np.float64), SMOOTHING)
        response = 0.5 * visible + 0.5 * blob
        weights = np.exp(-(levels + math.log(figure.scale)) ** 2 / (2 * SCALE_SPREAD ** 2))
        maps[Part.HEAD] = np.maximum(maps[Part.HEAD], weights[:, None, None] * response)
    return SoftMapStack(width=shape[1], height=shape[0], factors=tuple(factors), maps=maps)


def make_proposals(image, rng, boxes=3, min_area=4):
    """Colour segments of the image, each jittered by a pixel, plus random boxes.

    Every connected run of one non-background colour is a segment; a segment is
    grown, shrunk or kept at random.
    """
    height, width = image.shape[:2]
    colors, codes = np.unique(image.reshape(-1, 3), axis=0, return_inverse=True)
    codes = codes.reshape(height, width)
    masks = []
    for code, color in enumerate(colors):
        if tuple(int(c) for c in color) == tuple(BACKGROUND_COLOR):
            continue
        segments, count = ndimage.label(codes == code)
        for label in range(1, count + 1):
            segment = segments == label
            jitter = rng.integers(0, 3)
            if jitter == 1:
                segment = ndimage.binary_dilation(segment)
            elif jitter == 2:
                segment = ndimage.binary_erosion(segment)
            if segment.sum() >= min_area:
                masks.append(segment)
    for _ in range(boxes):
        y0, x0 = rng.integers(0, height // 2), rng.integers(0, width // 2)
        h, w = rng.integers(height // 4, height // 2 + 1), rng.integers(width // 4, width // 2 + 1)
        box = np.zeros((height, width), dtype=bool)
        box[y0:y0 + h, x0:x0 + w] = True
        masks.append(box)
    return [encode_rle(mask) for mask in masks if mask.any()]


def render_fixture(seed, people=1, overlap=0.0, reference_height=64.0, vary_scale=True, noise=NOISE,
                   anthro=None):
    """The scene of `seed`; the same arguments always give the same fixture."""
    rng = np.random.default_rng(seed)
    base = anthro or ReferenceAnthropometry()
    anthro = base.scaled(reference_height / base.reference_height)
    figures, shape = place_figures(rng, people, overlap, anthro, vary_scale)
    owner, parts = composite(figures, shape, anthro)

    persons = []
    for index, figure in enumerate(figures, start=1):
        cx, cy = _head_center(figure, anthro)
        persons.append(PersonParse(
            index=index,
            parts={part: (owner == index) & (parts == part) for part in BODY_PARTS},
            head=HeadCandidate(x=cx, y=cy, scale=figure.scale, peak_prob=1.0),
        ))
    image = paint_image(figures, shape, anthro)
    labels = np.where(owner > 0, owner * len(BODY_PARTS) + parts + 1, 0)
    raster = LabelRaster(width=shape[1], height=shape[0], labels=labels, legend=legend(len(figures)))
    logger.debug("seed %d: %d figures on a %dx%d canvas", seed, len(figures), shape[1], shape[0])
    return Fixture(
        seed=seed,
        figures=figures,
        anthro=anthro,
        stack=soft_stack(figures, owner, parts, anthro, rng, noise=noise),
        image=image,
        proposals=make_proposals(image, rng),
        persons=persons,
        labels=raster,
    )
