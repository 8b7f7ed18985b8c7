"""Exact min-cost-flow reference for the graph-restricted transport value.

This is the validation oracle: the restricted dual and the uncapacitated
min-cost flow on the same graph are a primal-dual LP pair, so their
values must agree. The transport algorithms never import this module.
"""

import numpy as np
from scipy.optimize import linear_sum_assignment


class FlowProblem:
    """Balanced supplies on the nodes of a neighbor graph."""

    def __init__(self, graph, supplies):
        supplies = np.asarray(supplies, dtype=float)
        if len(supplies) != graph.n:
            raise ValueError("one supply per graph node required")
        if abs(float(supplies.sum())) > 1e-9:
            raise ValueError(f"supplies must balance, sum is {supplies.sum():.3e}")
        self.graph = graph
        self.supplies = supplies


def min_cost_flow(p, tol=1e-12):
    """Minimum cost of shipping the supplies across the graph.

    Successive shortest augmenting paths on the residual network with
    Bellman-Ford distances. Uncapacitated, floating-point arithmetic;
    fine at the problem sizes the oracle is meant for (n <= a few
    hundred). Returns (value, flows) with flows keyed by directed edge.
    """
    g = p.graph
    surplus = p.supplies.copy()
    flows = {}
    cost_of = {}
    arcs = []  # directed base arcs (u, v, cost)
    for (a, b), c in zip(g.edges, g.costs):
        a, b = int(a), int(b)
        cost_of[(a, b)] = cost_of[(b, a)] = float(c)
        arcs.append((a, b, float(c)))
        arcs.append((b, a, float(c)))

    max_augment = 10 * g.n + 100
    for _ in range(max_augment):
        sources = np.nonzero(surplus > tol)[0]
        if len(sources) == 0:
            break
        src = int(sources[0])
        # Bellman-Ford over base arcs plus reverse arcs of current flow
        residual = list(arcs)
        for (u, v), f in flows.items():
            if f > tol:
                residual.append((v, u, -cost_of[(u, v)]))
        dist = np.full(g.n, np.inf)
        parent = {}
        dist[src] = 0.0
        for _ in range(g.n - 1):
            changed = False
            for u, v, c in residual:
                if dist[u] + c < dist[v] - 1e-15:
                    dist[v] = dist[u] + c
                    parent[v] = u
                    changed = True
            if not changed:
                break
        sinks = np.nonzero(surplus < -tol)[0]
        reachable = [t for t in sinks if np.isfinite(dist[t])]
        if not reachable:
            raise ValueError("infeasible: imbalance across disconnected components")
        t = int(min(reachable, key=lambda v: (dist[v], v)))
        # walk back to find the path and its reverse-arc capacity
        path = []
        v = t
        while v != src:
            u = parent[v]
            path.append((u, v))
            v = u
        amount = min(float(surplus[src]), float(-surplus[t]))
        for u, v in path:
            back = flows.get((v, u), 0.0)
            if back > tol:
                amount = min(amount, back)
        for u, v in path:
            back = flows.get((v, u), 0.0)
            cancel = min(amount, back)
            if cancel > 0:
                flows[(v, u)] = back - cancel
            if amount - cancel > 0:
                flows[(u, v)] = flows.get((u, v), 0.0) + amount - cancel
        surplus[src] -= amount
        surplus[t] += amount
    else:
        raise RuntimeError("augmenting-path loop failed to settle")

    value = sum(cost_of[e] * f for e, f in flows.items() if f > 0)
    flows = {e: f for e, f in flows.items() if f > tol}
    return float(value), flows


def discrete_ot_cost(src, dst, metric):
    """Optimal assignment cost between equal-size point sets.

    min over pairings of (1/N) sum_i c(src_i, dst_sigma(i)), solved
    exactly as an assignment problem.
    """
    src = np.atleast_2d(np.asarray(src, dtype=float))
    dst = np.atleast_2d(np.asarray(dst, dtype=float))
    if src.shape != dst.shape:
        raise ValueError(f"point sets differ in shape: {src.shape} vs {dst.shape}")
    diff = src[:, None, :] - dst[None, :, :]
    costs = metric.xi * np.sqrt((diff**2).sum(axis=2))
    rows, cols = linear_sum_assignment(costs)
    return float(costs[rows, cols].sum() / len(src))
