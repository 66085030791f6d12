"""Dense two-phase tableau simplex and the LP relaxation of an assembly program."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .models import OversizedProblemError, SimplexError

logger = logging.getLogger(__name__)

# consecutive degenerate pivots before switching to Bland's rule
DEGENERATE_LIMIT = 50

# problems with more variables than this go to HiGHS under method='auto'
DENSE_LIMIT = 400

# largest dense tableau simplex_minimize allocates
TABLEAU_BYTES = 1 << 29


@dataclass
class LPResult:
    value: float
    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    method: str


def _pivot(tableau, basis, row, column):
    tableau[row] /= tableau[row, column]
    factors = tableau[:, column].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    basis[row] = column


def _iterate(tableau, basis, columns, tolerance, limit):
    """Primal simplex on `columns`: Dantzig pricing, Bland's rule after degenerate stalls."""
    bland, degenerate = False, 0
    for _ in range(limit):
        costs = tableau[-1, columns]
        if bland:
            entering = np.flatnonzero(costs < -tolerance)
            if entering.size == 0:
                return
            column = columns[entering[0]]
        else:
            best = int(np.argmin(costs))
            if costs[best] >= -tolerance:
                return
            column = columns[best]
        entries = tableau[:-1, column]
        positive = entries > tolerance
        if not positive.any():
            raise SimplexError("linear program is unbounded")
        ratios = np.full(entries.shape, np.inf)
        ratios[positive] = tableau[:-1, -1][positive] / entries[positive]
        step = ratios.min()
        ties = np.flatnonzero(ratios <= step + tolerance)
        row = ties[np.argmin(basis[ties])] if bland else ties[0]
        degenerate = degenerate + 1 if step <= tolerance else 0
        if degenerate >= DEGENERATE_LIMIT and not bland:
            logger.debug("degenerate cycle suspected; switching to Bland's rule")
            bland = True
        _pivot(tableau, basis, row, column)
    raise SimplexError("simplex iteration limit reached")


def _tableau_bytes(m, n, artificial=0):
    return 8 * (m + 1) * (n + m + artificial + 1)


def simplex_minimize(c, A_ub, b_ub, tolerance=1e-9):
    """min c.z  s.t.  A_ub z <= b_ub, z >= 0.  Returns (value, z).

    The tableau is dense; OversizedProblemError is raised before allocating one
    larger than TABLEAU_BYTES.
    """
    c = np.asarray(c, dtype=np.float64)
    b = np.asarray(b_ub, dtype=np.float64)
    m, n = b.size, c.size
    needed = _tableau_bytes(m, n, int((b < 0).sum()))
    if needed > TABLEAU_BYTES:
        raise OversizedProblemError(
            f"a {m} x {n} program needs a {needed / 2 ** 30:.1f} GiB dense tableau; use method='highs'"
        )
    A = np.asarray(A_ub.toarray() if sparse.issparse(A_ub) else A_ub, dtype=np.float64).reshape(-1, n)
    flipped = b < 0
    sign = np.where(flipped, -1.0, 1.0)
    artificial_rows = np.flatnonzero(flipped)
    n_art = artificial_rows.size
    width = n + m + n_art

    tableau = np.zeros((m + 1, width + 1))
    tableau[:m, :n] = A * sign[:, None]
    tableau[np.arange(m), n + np.arange(m)] = sign
    tableau[artificial_rows, n + m + np.arange(n_art)] = 1.0
    tableau[:m, -1] = b * sign
    basis = n + np.arange(m)
    basis[artificial_rows] = n + m + np.arange(n_art)
    limit = 50 * (m + width) + 1000

    if n_art:
        tableau[-1, n + m:width] = 1.0
        tableau[-1] -= tableau[artificial_rows].sum(axis=0)
        _iterate(tableau, basis, np.arange(width), tolerance, limit)
        if -tableau[-1, -1] > tolerance * max(1.0, np.abs(b).max()):
            raise SimplexError("linear program is infeasible")
        keep = np.ones(m, dtype=bool)
        for row in np.flatnonzero(basis >= n + m):
            candidates = np.flatnonzero(np.abs(tableau[row, :n + m]) > tolerance)
            if candidates.size:
                _pivot(tableau, basis, row, candidates[0])
            else:
                keep[row] = False
        tableau = np.vstack([tableau[:m][keep], tableau[-1:]])
        tableau = np.delete(tableau, np.s_[n + m:width], axis=1)
        basis = basis[keep]
        m = basis.size

    cost = np.zeros(tableau.shape[1] - 1)
    cost[:n] = c
    tableau[-1] = 0.0
    tableau[-1, :-1] = cost
    for row, column in enumerate(basis):
        tableau[-1] -= cost[column] * tableau[row]
    _iterate(tableau, basis, np.arange(tableau.shape[1] - 1), tolerance, limit)

    z = np.zeros(tableau.shape[1] - 1)
    z[basis] = tableau[:-1, -1]
    return float(c @ z[:n]), z[:n]


def _hstack(blocks):
    return sparse.hstack([block for block in blocks if block.shape[1]]).tocsr()


def relaxation_rows(problem):
    """A_ub, b_ub over z = (x, y, e) with the assignment rows and the variable upper bounds."""
    n_r, n_j, n_y = problem.n_regions, problem.n_instances, problem.n_y
    assignment = sparse.kron(sparse.identity(n_r), np.ones((1, n_j)))
    coupled = _hstack([problem.B, problem.D, problem.C])
    bounds = _hstack([sparse.csr_matrix((n_y + n_j, problem.n_x)), sparse.identity(n_y + n_j)])
    A = sparse.vstack([
        block for block in (_hstack([assignment, sparse.csr_matrix((n_r, n_y + n_j))]), coupled, bounds)
        if block.shape[0]
    ]).tocsr()
    b = np.concatenate([np.ones(n_r), problem.f, np.ones(n_y), np.full(n_j, problem.slack_bound)])
    return A, b


def binding_rows(problem, A, b):
    """Rows of (A, b) that some point of the bound box can violate.

    Assignment and bound rows are kept; they define the box.
    """
    upper = np.concatenate([np.ones(problem.n_x + problem.n_y), np.full(problem.n_instances, problem.slack_bound)])
    most = A.maximum(0) @ upper
    keep = most > b + 1e-12
    keep[:problem.n_regions] = True
    keep[problem.n_regions + problem.n_rows:] = True
    return np.flatnonzero(keep)


def lp_relaxation(problem, method='auto'):
    """Exact optimum with x, y in [0, 1] and e in [0, M].

    'auto' takes the dense simplex up to DENSE_LIMIT variables and HiGHS
    beyond. The dense simplex drops rows the bound box already satisfies and
    refuses programs whose tableau would exceed TABLEAU_BYTES.
    """
    c = np.concatenate([problem.g, problem.w, np.full(problem.n_instances, problem.phi)])
    if c.size == 0:
        return LPResult(0.0, np.zeros(0), np.zeros(0), np.zeros(0), 'empty')
    A, b = relaxation_rows(problem)
    rows = binding_rows(problem, A, b)
    if method == 'auto':
        small = c.size <= DENSE_LIMIT and _tableau_bytes(rows.size, c.size) <= TABLEAU_BYTES
        method = 'simplex' if small else 'highs'
    if method == 'simplex':
        if rows.size < b.size:
            logger.debug("dense simplex: %d of %d rows can bind", rows.size, b.size)
        value, z = simplex_minimize(c, A[rows], b[rows])
    elif method == 'highs':
        result = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method='highs')
        if result.status != 0:
            raise SimplexError(f"HiGHS failed: {result.message}")
        value, z = float(result.fun), result.x
    else:
        raise ValueError(f"unknown LP method {method!r}")
    n_x, n_y = problem.n_x, problem.n_y
    return LPResult(value, z[:n_x], z[n_x:n_x + n_y], z[n_x + n_y:], method)
