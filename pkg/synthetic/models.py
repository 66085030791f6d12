from dataclasses import dataclass

import numpy as np

# Figure proportions as fractions of the figure height; a scale-1 figure is
# as tall as the reference person.
# the torso starts inside the head disc, so every figure is one 4-connected blob
TORSO_TOP = 0.13
TORSO_BOTTOM = 0.55
TORSO_WIDTH = 0.22
ARM_LENGTH = 0.38
ARM_WIDTH = 0.06
LEG_LENGTH = 0.45
LEG_WIDTH = 0.08

# horizontal reach of a figure with fully spread arms, in figure heights
FIGURE_WIDTH = 0.9

MAX_OVERLAP = 0.6

SKIN = (224, 172, 135)
BACKGROUND_COLOR = (128, 128, 128)


@dataclass(frozen=True)
class StickFigure:
    """Placement of one figure: `x` is the body axis, `top` the crown of the head.

    Angles are in degrees from hanging straight down, positive away from the body.
    """
    x: float
    top: float
    scale: float
    arm_angles: tuple
    leg_angles: tuple
    shirt: tuple
    trousers: tuple

    def height(self, reference_height):
        return reference_height * self.scale

    def head_center(self, anthro):
        return (self.x, self.top + anthro.head_radius_at(self.scale))


@dataclass(frozen=True, eq=False)
class Fixture:
    """A rendered scene with everything `parse` consumes and `eval` compares against.

    `labels` is the ground-truth (person, part) label raster and `persons` the
    visible part masks of each figure.
    """
    seed: int
    figures: list
    anthro: object  # ReferenceAnthropometry
    stack: object  # SoftMapStack
    image: np.ndarray
    proposals: list
    persons: list
    labels: object  # LabelRaster

    @property
    def shape(self):
        return self.image.shape[:2]
