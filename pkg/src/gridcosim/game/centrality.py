"""Current-flow betweenness on an outage-cost-weighted host graph."""
from __future__ import annotations

import warnings

import numpy as np

from .. import kernels


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        parent[find(u)] = find(v)
    comps = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    return list(comps.values())


def current_flow_betweenness(n: int, edges, conductance) -> np.ndarray:
    """Throughput of unit s-t currents at every node, averaged over ordered pairs.

    Potentials come from the pseudo-inverse of the weighted Laplacian;
    a node's throughput is half the absolute current on its incident edges,
    with source and sink excluded. Normalized by (n-1)(n-2). A disconnected
    graph is handled per component (with a warning).
    """
    edges = [(int(u), int(v)) for u, v in edges]
    g = np.asarray(conductance, dtype=float)
    if len(edges) != g.size:
        raise ValueError("one conductance per edge")
    if np.any(g <= 0):
        raise ValueError("conductances must be positive")
    out = np.zeros(n)
    comps = _components(n, edges)
    if len(comps) > 1:
        warnings.warn(f"graph has {len(comps)} components; centrality computed per component", RuntimeWarning, stacklevel=2)
    for comp in comps:
        k = len(comp)
        if k < 3:
            continue
        local = {v: i for i, v in enumerate(comp)}
        sel = [j for j, (u, v) in enumerate(edges) if u in local]
        eu = np.array([local[edges[j][0]] for j in sel], dtype=np.int64)
        ev = np.array([local[edges[j][1]] for j in sel], dtype=np.int64)
        gc = g[sel]
        L = np.zeros((k, k))
        np.add.at(L, (eu, eu), gc)
        np.add.at(L, (ev, ev), gc)
        np.add.at(L, (eu, ev), -gc)
        np.add.at(L, (ev, eu), -gc)
        P = np.linalg.pinv(L)
        total = kernels.cfb_throughput(P, eu, ev, gc)
        out[comp] = np.asarray(total) / ((k - 1) * (k - 2))
    return out


def outage_conductance(edges, costs) -> np.ndarray:
    """Edge resistance 1 / max(c_i, c_j), i.e. conductance max(c_i, c_j)."""
    c = np.asarray(costs, dtype=float)
    return np.array([max(c[u], c[v]) for u, v in edges], dtype=float)


def place_sensors(scores: dict[str, float], k: int, budget: float = float("inf"), cost: float = 10.0, existing=()):
    """Top-k nodes by score (ties to the lowest id) within budget.

    Returns (sensor set, spent, shortfall). Keeping an existing sensor is
    free; each newly placed sensor costs ``cost``.
    """
    if k < 0:
        raise ValueError("sensor count must be non-negative")
    if k > len(scores):
        raise ValueError("more sensors than nodes")
    ranked = sorted(scores, key=lambda v: (-scores[v], v))[:k]
    existing = set(existing)
    chosen, spent = set(), 0.0
    for v in ranked:
        if v in existing:
            chosen.add(v)
        elif spent + cost <= budget + 1e-12:
            chosen.add(v)
            spent += cost
    return chosen, spent, k - len(chosen)
