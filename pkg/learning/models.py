from dataclasses import dataclass, field

import numpy as np

from detangle.exceptions import DetangleError


class LearningError(DetangleError):
    pass


# order of TermVector entries; matches Params.cost_weights
TERMS = ('q', 'r', 'd', 'fragments', 'selection', 'slack', 'cover')


@dataclass(frozen=True, eq=False)
class TermVector:
    """Unweighted objective terms of one complete assembly of one image.

    Its dot product with the cost weights is the energy of the assembly.
    `assignment` keeps the x vector of every part problem it was summed from.
    """
    values: np.ndarray
    assignment: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(TERMS),):
            raise ValueError(f"a term vector has {len(TERMS)} entries, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("term values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def energy(self, weights):
        return float(np.asarray(weights, dtype=np.float64) @ self.values)

    def to_dict(self):
        return dict(zip(TERMS, self.values.tolist()))


@dataclass(frozen=True, eq=False)
class TrainingImage:
    """The ground-truth assembly of one image and feasible assemblies that differ from it."""
    name: str
    positive: TermVector
    negatives: list

    @property
    def differences(self):
        """w_n - w_p, one row per negative."""
        if not self.negatives:
            return np.zeros((0, len(TERMS)))
        return np.stack([negative.values for negative in self.negatives]) - self.positive.values


@dataclass(frozen=True, eq=False)
class AssemblyExample:
    """The part problems of one training image and their ground-truth solutions.

    `problems`, `regions` and `positive` are keyed by part; `positive[part]` is the
    x vector of the ground-truth assembly.
    """
    name: str
    problems: dict
    regions: dict
    positive: dict

    @property
    def instance_ids(self):
        ids = []
        for problem in self.problems.values():
            ids.extend(k for k in problem.instance_ids if k not in ids)
        return ids


@dataclass(frozen=True)
class MarginFit:
    """Weights on the probability simplex and the margin reached on each image."""
    weights: np.ndarray
    margins: np.ndarray
    names: tuple

    @property
    def separable(self):
        return bool(np.all(self.margins > 0))

    @property
    def worst(self):
        return self.names[int(np.argmin(self.margins))] if self.names else None

    def to_dict(self):
        return {
            'weights': dict(zip(TERMS, self.weights.tolist())),
            'margins': dict(zip(self.names, self.margins.tolist())),
        }
