from dataclasses import dataclass, field, fields

import numpy as np

from detangle.exceptions import DetangleError

SCHEDULES = ('constant', 'diminishing', 'polyak')


class OversizedProblemError(DetangleError):
    pass


class SimplexError(DetangleError):
    pass


class DualityViolationError(DetangleError):
    pass


@dataclass
class DualState:
    """Outcome of a subgradient run.

    `best_bound` is the running maximum of L(nu); x, y and e are the inner
    minimizers at the multipliers that achieved it.
    """
    nu: np.ndarray
    best_nu: np.ndarray
    best_bound: float
    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    residual: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)


@dataclass
class BnBNode:
    """A subproblem with x pinned inside [lower, upper]."""
    lower: np.ndarray
    upper: np.ndarray
    nu: np.ndarray
    bound: float
    depth: int = 0

    def pin(self, k, value, n_instances):
        lower, upper = self.lower.copy(), self.upper.copy()
        if value:
            region = k // n_instances
            upper[region * n_instances:(region + 1) * n_instances] = 0
            lower[k] = upper[k] = 1
        else:
            upper[k] = 0
        return BnBNode(lower=lower, upper=upper, nu=self.nu, bound=self.bound, depth=self.depth + 1)

    @property
    def free(self):
        return np.flatnonzero(self.lower != self.upper)


@dataclass(frozen=True)
class SolverOptions:
    iterations: int = 500
    step: float = 1e-6
    schedule: str = 'constant'
    node_iterations: int = 100
    node_schedule: str = 'polyak'
    node_budget: int = 20000
    tolerance: float = 1e-6
    exhaustive_limit: int = 20
    leaf_size: int = 64
    lp_method: str = 'auto'
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 1 or self.node_iterations < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.node_budget < 1:
            raise ValueError("node budget must be at least 1")
        if self.schedule not in SCHEDULES or self.node_schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def override(self, **values):
        known = {f.name for f in fields(self)}
        return SolverOptions(**{
            **{f.name: getattr(self, f.name) for f in fields(self)},
            **{k: v for k, v in values.items() if k in known and v is not None},
        })

    @classmethod
    def from_settings(cls):
        from django.conf import settings
        return cls().override(**settings.DETANGLE['SOLVER'])
