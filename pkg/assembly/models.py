from dataclasses import dataclass, field, fields, asdict

import numpy as np
from scipy import sparse

from detangle.exceptions import DetangleError
from semantics.models import Part

FEASIBILITY_TOLERANCE = 1e-9

ROW_TAGS = ('coupling', 'exclusion', 'color', 'size', 'soft_size')


class ProblemShapeError(DetangleError):
    pass


@dataclass(frozen=True)
class Params:
    """Weights of the assembly objective and the exclusion thresholds."""
    alpha: float = 200.0
    beta: float = 100.0
    gamma: float = 100.0
    theta: float = 40.0
    xi: float = 500.0
    phi: float = 1.0
    pi: float = 2e5
    tau: float = 0.2
    epsilon: float = 0.5
    delta: float = 1e-6
    slack_bound: float = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None and value < 0:
                raise ValueError(f"{f.name} must be non-negative, got {value}")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if not 0 < self.epsilon < 2:
            raise ValueError("epsilon must lie in (0, 2)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def cost_weights(self):
        """(alpha, beta, gamma, theta, xi, phi, pi): the learnable weights."""
        return np.array([self.alpha, self.beta, self.gamma, self.theta, self.xi, self.phi, self.pi])

    def with_weights(self, weights):
        names = ('alpha', 'beta', 'gamma', 'theta', 'xi', 'phi', 'pi')
        return Params(**{**asdict(self), **{n: float(w) for n, w in zip(names, weights)}})

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, document, base=None):
        known = {f.name for f in fields(cls)}
        unknown = set(document) - known
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        merged = {**(base or cls()).to_dict(), **document}
        return cls(**{k: float(v) for k, v in merged.items()})

    @classmethod
    def from_settings(cls):
        from django.conf import settings
        return cls.from_dict(settings.DETANGLE['PARAMS'])


@dataclass
class Solution:
    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    objective: float
    is_feasible: bool
    bound: float = -np.inf
    status: str = 'optimal'
    nodes: int = 0
    wall_time: float = 0.0

    @property
    def gap(self):
        return max(self.objective - self.bound, 0.0)

    def assignment(self, n_instances):
        """Instance index per region, -1 where the region is unassigned."""
        if n_instances == 0:
            return np.full(0, -1)
        grid = np.asarray(self.x).reshape(-1, n_instances)
        return np.where(grid.any(axis=1), grid.argmax(axis=1), -1)

    def to_dict(self):
        return {
            'x': np.asarray(self.x, dtype=int).tolist(),
            'y': np.asarray(self.y, dtype=int).tolist(),
            'e': np.asarray(self.e, dtype=float).tolist(),
            'objective': float(self.objective),
            'is_feasible': bool(self.is_feasible),
            'bound': float(self.bound) if np.isfinite(self.bound) else None,
            'gap': float(self.gap) if np.isfinite(self.bound) else None,
            'status': self.status,
            'nodes': self.nodes,
            'wall_time': round(self.wall_time, 6),
        }

    @classmethod
    def from_dict(cls, document):
        bound = document.get('bound')
        return cls(
            x=np.asarray(document['x'], dtype=np.int8),
            y=np.asarray(document['y'], dtype=np.int8),
            e=np.asarray(document['e'], dtype=np.float64),
            objective=float(document['objective']),
            is_feasible=bool(document['is_feasible']),
            bound=-np.inf if bound is None else float(bound),
            status=document.get('status', 'optimal'),
            nodes=int(document.get('nodes', 0)),
            wall_time=float(document.get('wall_time', 0.0)),
        )


@dataclass(frozen=True, eq=False)
class AssemblyProblem:
    """min g.x + w.y + phi*sum(e)  s.t.  sum_j x[i, j] <= 1,  B x + C e + D y <= f.

    x is flattened region-major (k = i * n_instances + j). The assignment block A is
    implicit in that layout. Rows carry a tag from ROW_TAGS and the instance they
    belong to (-1 for exclusion rows, which span instances).
    """
    stage: int
    part: Part
    region_ids: tuple
    instance_ids: tuple
    unary: np.ndarray
    cover: np.ndarray
    selection: np.ndarray
    params: Params
    g: np.ndarray
    w: np.ndarray
    phi: float
    B: sparse.csr_matrix
    C: sparse.csr_matrix
    D: sparse.csr_matrix
    f: np.ndarray
    row_tags: tuple
    row_instance: np.ndarray
    slack_bound: float
    areas: np.ndarray = field(default=None)
    features: object = field(default=None)  # CostFeatures of (region, instance) arrays

    def __post_init__(self):
        n_x, n_y, m = self.n_regions * self.n_instances, len(self.w), len(self.f)
        if self.unary.shape != (self.n_regions, self.n_instances) or self.g.shape != (n_x,):
            raise ProblemShapeError("objective coefficients do not match the region and instance counts")
        if n_y not in (0, self.n_instances):
            raise ProblemShapeError("instance variables must be absent or one per instance")
        if self.B.shape != (m, n_x) or self.C.shape != (m, self.n_instances) or self.D.shape != (m, n_y):
            raise ProblemShapeError("constraint blocks do not match the variable counts")
        if len(self.row_tags) != m or len(self.row_instance) != m:
            raise ProblemShapeError("every constraint row needs a tag and an instance")
        if any(tag not in ROW_TAGS for tag in self.row_tags):
            raise ProblemShapeError(f"row tags must be among {ROW_TAGS}")
        slack_rows = np.asarray(self.C.sum(axis=1)).ravel()
        object.__setattr__(self, 'row_instance', np.asarray(self.row_instance, dtype=np.int64))
        object.__setattr__(self, '_slack_rows', np.flatnonzero(slack_rows != 0))

    @property
    def n_regions(self):
        return len(self.region_ids)

    @property
    def n_instances(self):
        return len(self.instance_ids)

    @property
    def n_x(self):
        return self.n_regions * self.n_instances

    @property
    def n_y(self):
        return len(self.w)

    @property
    def n_rows(self):
        return len(self.f)

    def x_index(self, i, j):
        return i * self.n_instances + j

    def rows_tagged(self, tag):
        return [r for r, t in enumerate(self.row_tags) if t == tag]

    def residual(self, x, y, e):
        """B x + C e + D y - f."""
        residual = self.B @ np.asarray(x, dtype=np.float64) + self.C @ np.asarray(e, dtype=np.float64) - self.f
        if self.n_y:
            residual += self.D @ np.asarray(y, dtype=np.float64)
        return residual

    def objective(self, x, y, e):
        value = float(self.g @ np.asarray(x, dtype=np.float64)) + self.phi * float(np.sum(e))
        if self.n_y:
            value += float(self.w @ np.asarray(y, dtype=np.float64))
        return value

    def check_shapes(self, x, y, e):
        if len(x) != self.n_x or len(y) != self.n_y or len(e) != self.n_instances:
            raise ProblemShapeError(
                f"solution has {len(x)}/{len(y)}/{len(e)} x/y/e entries, "
                f"problem has {self.n_x}/{self.n_y}/{self.n_instances}"
            )

    def is_feasible(self, x, y, e, tolerance=FEASIBILITY_TOLERANCE):
        self.check_shapes(x, y, e)
        x, y, e = (np.asarray(v, dtype=np.float64) for v in (x, y, e))
        if not (np.all(np.isin(x, (0, 1))) and np.all(np.isin(y, (0, 1)))):
            return False
        if self.n_x and x.reshape(self.n_regions, self.n_instances).sum(axis=1).max() > 1:
            return False
        if np.any(e < -tolerance) or np.any(e > self.slack_bound + tolerance):
            return False
        return bool(np.all(self.residual(x, y, e) <= tolerance))

    def complete_batch(self, X, tolerance=FEASIBILITY_TOLERANCE):
        """Cheapest y and e for each row of X (one binary x per row).

        y and e of instance j only enter rows of instance j, so each instance is
        settled on its own: y_j in {0, 1}, e_j the smallest slack its soft rows allow.
        Returns (Y, E, objective, feasible).
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        N, n_j = X.shape[0], self.n_instances
        if n_j == 0:
            return np.zeros((N, 0)), np.zeros((N, 0)), np.zeros(N), np.ones(N, dtype=bool)
        base = np.asarray((self.B @ X.T).T) - self.f
        spanning = self.row_instance < 0
        feasible = np.all(base[:, spanning] <= tolerance, axis=1)
        feasible &= X.reshape(N, self.n_regions, n_j).sum(axis=2).max(axis=1, initial=0) <= 1

        owned = ~spanning
        owned[self._slack_rows] = False
        owner = np.zeros((self.n_rows, n_j))
        owner[np.flatnonzero(owned), self.row_instance[owned]] = 1.0
        slack_coef = self.C.tocsr()

        choices = [0.0] if self.n_y == 0 else [0.0, 1.0]
        costs, slacks = [], []
        for choice in choices:
            residual = base if choice == 0 else base + np.asarray(self.D.sum(axis=1)).ravel()
            slack = np.zeros((N, n_j))
            for r in self._slack_rows:
                row = slack_coef.getrow(r)
                j, coef = row.indices[0], row.data[0]
                slack[:, j] = np.maximum(slack[:, j], residual[:, r] / -coef)
            violated = (residual > tolerance).astype(np.float64) @ owner > 0
            violated |= slack > self.slack_bound + tolerance
            cost = self.phi * slack + (choice * self.w if self.n_y else 0.0)
            costs.append(np.where(violated, np.inf, cost))
            slacks.append(slack)

        if self.n_y:
            pick_one = costs[1] < costs[0]
            Y = pick_one.astype(np.float64)
            E = np.where(pick_one, slacks[1], slacks[0])
            best = np.minimum(costs[0], costs[1])
        else:
            Y, E, best = np.zeros((N, 0)), slacks[0], costs[0]
        feasible &= np.all(np.isfinite(best), axis=1)
        objective = X @ self.g + self.phi * E.sum(axis=1)
        if self.n_y:
            objective += Y @ self.w
        return Y, E, objective, feasible

    def complete(self, x):
        """The best Solution extending a fixed binary x."""
        Y, E, objective, feasible = self.complete_batch(np.asarray(x)[None, :])
        return Solution(
            x=np.asarray(x, dtype=np.int8), y=Y[0].astype(np.int8), e=E[0],
            objective=float(objective[0]), is_feasible=bool(feasible[0]),
        )

    def empty_solution(self):
        return self.complete(np.zeros(self.n_x))

    def to_dict(self):
        B, C, D = self.B.tocsr(), self.C.tocsr(), self.D.tocsr()

        def entries(matrix, r):
            start, end = matrix.indptr[r], matrix.indptr[r + 1]
            return [[int(k), float(v)] for k, v in zip(matrix.indices[start:end], matrix.data[start:end])]

        return {
            'stage': self.stage,
            'part': self.part.label,
            'regions': list(self.region_ids),
            'instances': list(self.instance_ids),
            'params': self.params.to_dict(),
            'unary': self.unary.tolist(),
            'cover': self.cover.tolist(),
            'selection': self.selection.tolist(),
            'areas': None if self.areas is None else self.areas.tolist(),
            'features': None if self.features is None else {
                'q': self.features.q.tolist(), 'r': self.features.r.tolist(), 'd': self.features.d.tolist(),
            },
            'g': self.g.tolist(),
            'w': self.w.tolist(),
            'phi': self.phi,
            'slack_bound': self.slack_bound,
            'rows': [
                {
                    'tag': self.row_tags[r],
                    'instance': int(self.row_instance[r]),
                    'x': entries(B, r),
                    'y': entries(D, r),
                    'e': entries(C, r),
                    'f': float(self.f[r]),
                }
                for r in range(self.n_rows)
            ],
        }

    @classmethod
    def from_dict(cls, document):
        n_r, n_j = len(document['regions']), len(document['instances'])
        n_y = len(document['w'])
        rows = document['rows']

        def block(key, width):
            data, indices, indptr = [], [], [0]
            for row in rows:
                for k, v in row[key]:
                    if not 0 <= k < width:
                        raise ProblemShapeError(f"row references undeclared {key} variable {k}")
                    indices.append(k)
                    data.append(v)
                indptr.append(len(indices))
            return sparse.csr_matrix(
                (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32),
                 np.asarray(indptr, dtype=np.int32)),
                shape=(len(rows), width),
            )

        return cls(
            stage=int(document['stage']),
            part=Part.parse(document['part']),
            region_ids=tuple(document['regions']),
            instance_ids=tuple(document['instances']),
            unary=np.asarray(document['unary'], dtype=np.float64).reshape(n_r, n_j),
            cover=np.asarray(document['cover'], dtype=np.float64),
            selection=np.asarray(document['selection'], dtype=np.float64),
            params=Params.from_dict(document.get('params', {})),
            g=np.asarray(document['g'], dtype=np.float64),
            w=np.asarray(document['w'], dtype=np.float64),
            phi=float(document['phi']),
            B=block('x', n_r * n_j),
            C=block('e', n_j),
            D=block('y', n_y),
            f=np.asarray([row['f'] for row in rows], dtype=np.float64),
            row_tags=tuple(row['tag'] for row in rows),
            row_instance=np.asarray([row['instance'] for row in rows], dtype=np.int64),
            slack_bound=float(document['slack_bound']),
            areas=None if document.get('areas') is None else np.asarray(document['areas'], dtype=np.float64),
            features=_features_from_dict(document.get('features'), n_r, n_j),
        )


def _features_from_dict(document, n_regions, n_instances):
    from regions.models import CostFeatures
    if document is None:
        return None
    return CostFeatures(**{
        key: np.asarray(document[key], dtype=np.float64).reshape(n_regions, n_instances) for key in ('q', 'r', 'd')
    })
