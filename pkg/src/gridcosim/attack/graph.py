"""Logical attack graph over (host, privilege) states."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .scenario import ItScenario, privilege_rank

Node = tuple[str, str]


def beta_ttc(t1: float, t2: float, p1: float, u: float) -> float:
    """Expected time to compromise: t1 on first-try success, t2 on the fallback path."""
    if not (0.0 <= p1 <= 1.0 and 0.0 <= u <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if t1 < 0 or t2 < 0:
        raise ValueError("times must be non-negative")
    return t1 * p1 + t2 * (1.0 - p1) * (1.0 - u)


@dataclass(frozen=True)
class AttackEdge:
    src: Node
    dst: Node
    vulnerability: str
    probability: float
    time: float
    cost: float
    complexity: float

    def to_dict(self) -> dict:
        return {
            "src": list(self.src),
            "dst": list(self.dst),
            "vulnerability": self.vulnerability,
            "probability": self.probability,
            "time": self.time,
            "cost": self.cost,
            "complexity": self.complexity,
        }


@dataclass
class AttackGraph:
    root: Node
    nodes: set[Node] = field(default_factory=set)
    edges: list[AttackEdge] = field(default_factory=list)

    def out_edges(self, node: Node) -> list[AttackEdge]:
        return [e for e in self.edges if e.src == node]

    def adjacency(self) -> dict[Node, list[AttackEdge]]:
        adj: dict[Node, list[AttackEdge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.src].append(e)
        return adj

    def hosts(self) -> set[str]:
        return {h for h, _ in self.nodes}

    def nodes_of(self, host: str) -> list[Node]:
        return sorted(n for n in self.nodes if n[0] == host)

    def to_dict(self) -> dict:
        return {
            "root": list(self.root),
            "nodes": [list(n) for n in sorted(self.nodes)],
            "edges": [e.to_dict() for e in self.edges],
        }


def generate_attack_graph(scenario: ItScenario, foothold: str | None = None, price_per_kwh: float = 0.3) -> AttackGraph:
    """States reachable from the foothold through permitted, exploitable hops.

    An edge (h, p) -> (h2, g) exists when the policy lets h's zone talk to
    h2's zone and h2 carries a vulnerability granting g. Edge annotations:
    base success probability, expected time to compromise, target outage cost.
    """
    foothold = foothold or scenario.c2
    host = scenario.hosts[foothold]
    if not host.compromised:
        raise ValueError(f"foothold {foothold} is not compromised")
    root = (foothold, host.privilege)
    g = AttackGraph(root, {root})
    seen_edges = set()
    queue = deque([root])
    targets = sorted(scenario.hosts)
    while queue:
        node = queue.popleft()
        h, _ = node
        for h2 in targets:
            if not scenario.can_reach(h, h2):
                continue
            for vid in sorted(scenario.hosts[h2].vulnerabilities):
                v = scenario.vulnerabilities[vid]
                dst = (h2, v.privilege)
                key = (node, dst, vid)
                if key in seen_edges:
                    continue
                seen_edges.add(key)
                g.edges.append(
                    AttackEdge(
                        node, dst, vid, v.probability,
                        beta_ttc(v.time, v.retry_time, v.probability, v.u),
                        scenario.outage_cost(h2, price_per_kwh), v.complexity,
                    )
                )
                if dst not in g.nodes:
                    g.nodes.add(dst)
                    queue.append(dst)
    return g


def privilege_monotone(graph: AttackGraph) -> bool:
    """No edge lowers the privilege held on the same host."""
    return all(e.src[0] != e.dst[0] or privilege_rank(e.dst[1]) >= privilege_rank(e.src[1]) for e in graph.edges)
