"""Voronoi ownership of the quadrature grid and the induced neighbor graph.

Ownership is raster Voronoi: every quadrature cell belongs to the
nearest site, ties to the lowest index. Two agents are neighbors when
their cells share a 4-adjacent cell boundary; the same structure serves
cell masses, adjacency, and the communication graph.
"""

import numpy as np


class Partition:
    """Voronoi ownership of quadrature cells by agent sites."""

    def __init__(self, sites, owner, q):
        self.sites = sites
        self.owner = owner
        self.q = q

    @property
    def n(self):
        return len(self.sites)


class NeighborGraph:
    """Undirected agent adjacency with positive edge costs.

    `edges` is an (E, 2) int array with i < j in lexicographic order;
    `active[i]` says whether agent i owns at least one cell.
    """

    def __init__(self, n, edges, costs, active=None):
        self.n = int(n)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.costs = np.asarray(costs, dtype=float).reshape(-1)
        if len(self.edges) != len(self.costs):
            raise ValueError("edges and costs must have equal length")
        self.active = (
            np.ones(self.n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
        )

    def neighbor_lists(self):
        """Per-node sorted neighbor index lists."""
        lists = [[] for _ in range(self.n)]
        for a, b in self.edges:
            lists[a].append(int(b))
            lists[b].append(int(a))
        return [sorted(l) for l in lists]

    def edge_dict(self):
        """Map (i, j) with i < j to the edge's position in the edge list."""
        return {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}


def build_partition(sites, metric, domain, q):
    """Assign every quadrature cell to its nearest site.

    Ties break to the lowest site index, so the scan order cannot change
    the result. Sites are clamped into the domain first. The conformal
    factor scales all distances alike and is irrelevant to the argmin.
    """
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    if sites.ndim != 2 or sites.shape[1] != 2:
        raise ValueError("sites must be an (N, 2) array")
    if len(sites) < 1:
        raise ValueError("need at least one site")
    sites = domain.clamp(sites)
    d2 = ((q.centers[None, :, :] - sites[:, None, :]) ** 2).sum(axis=2)
    owner = np.argmin(d2, axis=0).astype(np.int64)
    return Partition(sites, owner, q)


def neighbor_graph(p, metric, radius=None):
    """Edges between owners of 4-adjacent quadrature cells.

    `radius` optionally drops edges between agents farther apart than the
    communication range (measured in metric cost); the resulting graph
    may then be disconnected, which callers report rather than repair.
    """
    q = p.q
    own = p.owner.reshape(q.ny, q.nx)
    pairs = np.concatenate(
        [
            np.column_stack([own[:, :-1].ravel(), own[:, 1:].ravel()]),
            np.column_stack([own[:-1, :].ravel(), own[1:, :].ravel()]),
        ]
    )
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs):
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        edges = np.unique(np.column_stack([lo, hi]), axis=0)
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    diffs = p.sites[edges[:, 0]] - p.sites[edges[:, 1]] if len(edges) else np.empty((0, 2))
    costs = metric.xi * np.sqrt((diffs**2).sum(axis=1))
    if np.any(costs <= 0):
        raise ValueError("coincident sites share a cell boundary; perturb duplicates first")
    if radius is not None:
        keep = costs <= radius
        edges, costs = edges[keep], costs[keep]
    active = np.bincount(p.owner, minlength=p.n) > 0
    return NeighborGraph(p.n, edges, costs, active)


def is_connected(g):
    """Breadth-first reachability over the agents that own cells."""
    nodes = np.nonzero(g.active)[0]
    if len(nodes) <= 1:
        return True
    lists = g.neighbor_lists()
    seen = {int(nodes[0])}
    frontier = [int(nodes[0])]
    while frontier:
        nxt = []
        for u in frontier:
            for v in lists[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return all(int(v) in seen for v in nodes)
