"""Push-relabel maximum flow on integer capacities."""
from collections import deque
from dataclasses import dataclass

import numpy as np

from .models import CapacityOverflowError

CAPACITY_LIMIT = 2 ** 62


@dataclass(frozen=True, eq=False)
class MaxflowResult:
    value: int
    source_side: np.ndarray

    def cut_capacity(self, tails, heads, capacities):
        tails, heads = np.asarray(tails), np.asarray(heads)
        crossing = self.source_side[tails] & ~self.source_side[heads]
        return int(np.asarray(capacities, dtype=np.int64)[crossing].sum())


def _integer_capacities(capacities):
    capacities = np.asarray(capacities)
    if capacities.size and np.any(capacities < 0):
        raise ValueError("capacities must be non-negative")
    if float(np.sum(capacities, dtype=np.float64)) > CAPACITY_LIMIT:
        raise CapacityOverflowError("total capacity exceeds the integer range")
    if capacities.dtype.kind == 'f':
        if np.any(capacities != np.floor(capacities)):
            raise ValueError("capacities must be integers; scale and floor them first")
    return capacities.astype(np.int64)


def maxflow(num_nodes, tails, heads, capacities, source, sink):
    """Maximum source-sink flow and a minimum cut certifying it.

    FIFO push-relabel computing a maximum preflow, with periodic global
    relabelling. The source side of the cut is the set of nodes that cannot
    reach the sink in the final residual graph.
    """
    if source == sink:
        raise ValueError("source and sink must differ")
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    capacities = _integer_capacities(capacities)
    if not (tails.shape == heads.shape == capacities.shape):
        raise ValueError("tails, heads and capacities must have the same length")
    n = num_nodes

    # arc 2k is edge k, arc 2k+1 its reverse
    arc_tail = np.empty(2 * tails.size, dtype=np.int64)
    arc_tail[0::2], arc_tail[1::2] = tails, heads
    arc_head = np.empty_like(arc_tail)
    arc_head[0::2], arc_head[1::2] = heads, tails
    residual = np.zeros_like(arc_tail)
    residual[0::2] = capacities

    order = np.argsort(arc_tail, kind='stable')
    start = np.searchsorted(arc_tail[order], np.arange(n + 1)).tolist()
    arcs = order.tolist()
    head = arc_head.tolist()
    cap = residual.tolist()

    height = [0] * n
    excess = [0] * n

    def global_relabel():
        for v in range(n):
            height[v] = n
        height[sink] = 0
        queue = deque([sink])
        while queue:
            v = queue.popleft()
            for k in range(start[v], start[v + 1]):
                a = arcs[k]
                w = head[a]
                if cap[a ^ 1] > 0 and height[w] == n and w != source:
                    height[w] = height[v] + 1
                    queue.append(w)
        height[source] = n

    for k in range(start[source], start[source + 1]):
        a = arcs[k]
        v = head[a]
        if cap[a] > 0 and v != source:
            excess[v] += cap[a]
            excess[source] -= cap[a]
            cap[a ^ 1] += cap[a]
            cap[a] = 0

    global_relabel()
    current = start[:n]
    queued = [False] * n
    active = deque()
    for v in range(n):
        if v != source and v != sink and excess[v] > 0 and height[v] < n:
            active.append(v)
            queued[v] = True

    relabels = 0
    while active:
        u = active.popleft()
        queued[u] = False
        while excess[u] > 0 and height[u] < n:
            if current[u] == start[u + 1]:
                lowest = n
                for k in range(start[u], start[u + 1]):
                    a = arcs[k]
                    if cap[a] > 0 and height[head[a]] < lowest:
                        lowest = height[head[a]]
                height[u] = min(lowest + 1, n)
                current[u] = start[u]
                relabels += 1
                continue
            a = arcs[current[u]]
            v = head[a]
            if cap[a] > 0 and height[u] == height[v] + 1:
                delta = excess[u] if excess[u] < cap[a] else cap[a]
                cap[a] -= delta
                cap[a ^ 1] += delta
                excess[u] -= delta
                excess[v] += delta
                if v != source and v != sink and not queued[v]:
                    active.append(v)
                    queued[v] = True
            else:
                current[u] += 1
        if relabels > n:
            relabels = 0
            global_relabel()
            current = start[:n]
            for v in range(n):
                if not queued[v] and v != source and v != sink and excess[v] > 0 and height[v] < n:
                    active.append(v)
                    queued[v] = True

    # nodes that can still reach the sink form the sink side
    reaches_sink = np.zeros(n, dtype=bool)
    reaches_sink[sink] = True
    queue = deque([sink])
    while queue:
        v = queue.popleft()
        for k in range(start[v], start[v + 1]):
            a = arcs[k]
            w = head[a]
            if cap[a ^ 1] > 0 and not reaches_sink[w]:
                reaches_sink[w] = True
                queue.append(w)
    return MaxflowResult(value=int(excess[sink]), source_side=~reaches_sink)
