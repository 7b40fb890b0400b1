"""Round-based attacker/defender game on the attack graph."""
from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..attack.graph import AttackEdge, AttackGraph, generate_attack_graph
from ..attack.scenario import ItScenario
from .centrality import current_flow_betweenness, outage_conductance, place_sensors
from .formulas import AttackerState, SuccessHistory, defender_risk, edge_weight, skill_at

BUDGET_SCENARIOS = {"low": (100.0, 10.0), "medium": (500.0, 50.0), "high": (1000.0, 100.0)}
ROUND_SECONDS = 86400.0


class NoPath(Exception):
    pass


@dataclass
class GameConfig:
    rounds: int = 30
    sensors: int = 10
    capital: float = 500.0
    funds: float = 50.0
    skill_initial: float = 0.5
    skill_increment: float = 0.02
    seed: int = 0
    sensor_cost: float = 10.0
    hardening_cost: float = 25.0
    q_step: float = 0.1
    max_detections: int = 3
    resources: float = 20.0
    price_per_kwh: float = 0.3

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.sensors < 0:
            raise ValueError("sensor count must be non-negative")

    @classmethod
    def from_dict(cls, doc: dict) -> "GameConfig":
        doc = dict(doc)
        budget = doc.pop("budget", None)
        if isinstance(budget, str):
            doc["capital"], doc["funds"] = BUDGET_SCENARIOS[budget]
        elif budget is not None:
            doc["capital"], doc["funds"] = budget
        skill = doc.pop("skill", None)
        if skill is not None:
            doc["skill_initial"], doc["skill_increment"] = skill
        return cls(**doc)


@dataclass
class DefenderState:
    capital: float
    funds: float
    spent: float = 0.0
    sensors: set[str] = field(default_factory=set)
    q: dict[str, float] = field(default_factory=dict)
    hardened: set[tuple] = field(default_factory=set)
    detections: list[dict] = field(default_factory=list)
    rounds_funded: int = 0

    @property
    def available(self) -> float:
        return self.capital + max(self.rounds_funded - 1, 0) * self.funds - self.spent

    def learning(self, host: str) -> float:
        return self.q.get(host, 1.0)


@dataclass
class RoundRecord:
    round: int
    skill: float
    path: list[str]
    steps: list[dict]
    succeeded: bool
    outcome: str
    detections: int
    risk_before: float
    risk_after: float
    complexity: float | None
    sensors: list[str]
    alerts: list[dict]
    spent: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GameResult:
    records: list[RoundRecord]
    attacker: AttackerState
    defender: DefenderState
    graph: AttackGraph

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "skill", "succeeded", "outcome", "detections", "risk_before", "risk_after", "complexity"])
            for r in self.records:
                w.writerow([r.round, f"{r.skill:.4f}", int(r.succeeded), r.outcome, r.detections,
                            f"{r.risk_before:.6f}", f"{r.risk_after:.6f}", "" if r.complexity is None else f"{r.complexity:.6f}"])

    @property
    def alerts(self) -> list[dict]:
        return [a for r in self.records for a in r.alerts]


def _key(node) -> str:
    return f"{node[0]}|{node[1]}"


def _dijkstra(out, weight, source, targets):
    # out[u] lists (v, edge index); weight[edge index] may be inf (unusable)
    best = {source: (0.0, (source,))}
    heap = [(0.0, (source,), source, ())]
    done = set()
    while heap:
        d, seq, u, pay = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u in targets:
            return d, list(seq), list(pay)
        for v, j in out.get(u, ()):
            w = weight[j]
            if w == math.inf or v in done:
                continue
            nd = d + w
            nseq = seq + (v,)
            cur = best.get(v)
            if cur is None or (nd, nseq) < cur:
                best[v] = (nd, nseq)
                heapq.heappush(heap, (nd, nseq, v, pay + (j,)))
    raise NoPath("no goal reachable")


def shortest_path(adj, source, targets):
    """Dijkstra from ``source`` to the nearest of ``targets``.

    ``adj[u]`` lists ``(v, weight, payload)``. Equal-cost alternatives are
    settled by the lexicographically smaller node sequence. Returns
    ``(cost, nodes, payloads)``; raises NoPath when no target is reachable.
    """
    out, weight, payload = {}, [], []
    for u, items in adj.items():
        for v, w, p in items:
            out.setdefault(u, []).append((v, len(weight)))
            weight.append(float(w))
            payload.append(p)
    cost, seq, pay = _dijkstra(out, weight, source, set(targets))
    return cost, seq, [payload[j] for j in pay]


class _PlanIndex:
    """Static arrays over an attack graph; nodes numbered in lexicographic order."""

    def __init__(self, graph: AttackGraph):
        self.nodes = sorted(graph.nodes)
        self.pos = {n: i for i, n in enumerate(self.nodes)}
        self.hosts = sorted({n[0] for n in self.nodes})
        hpos = {h: i for i, h in enumerate(self.hosts)}
        self.edges = list(graph.edges)
        self.key = [(e.src, e.dst, e.vulnerability) for e in self.edges]
        self.time = np.array([e.time for e in self.edges], dtype=float)
        self.cost = np.array([e.cost for e in self.edges], dtype=float)
        self.dst_host = np.array([hpos[e.dst[0]] for e in self.edges], dtype=np.int64)
        self.index_of = {k: j for j, k in enumerate(self.key)}
        self.out: dict[int, list[tuple[int, int]]] = {}
        for j, e in enumerate(self.edges):
            self.out.setdefault(self.pos[e.src], []).append((self.pos[e.dst], j))
        self.size = len(graph.edges)


def _plan_index(graph: AttackGraph) -> _PlanIndex:
    idx = getattr(graph, "_plan_index", None)
    if idx is None or idx.size != len(graph.edges):
        idx = _PlanIndex(graph)
        graph._plan_index = idx
    return idx


def attacker_plan_path(graph: AttackGraph, attacker: AttackerState, start=None, goals=None, blocked=frozenset()):
    """Minimum total edge weight t / (C * P_est) from ``start`` to any goal state.

    Returns ``(cost, nodes, edges)``; ties go to the lexicographically
    smaller node sequence.
    """
    start = start or graph.root
    goals = set(goals if goals is not None else attacker.goal)
    ix = _plan_index(graph)
    est = np.array([attacker.estimate(h) for h in ix.hosts])
    p = est[ix.dst_host]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where((ix.cost > 0) & (p > 0), ix.time / (ix.cost * p), np.inf)
    for k in blocked:
        j = ix.index_of.get(k)
        if j is not None:
            w[j] = np.inf
    targets = {i for i, n in enumerate(ix.nodes) if n[0] in goals}
    cost, seq, pay = _dijkstra(ix.out, w.tolist(), ix.pos[start], targets)
    return cost, [ix.nodes[i] for i in seq], [ix.edges[j] for j in pay]


def attempt_compromise(attacker: AttackerState, edge: AttackEdge, rng, hardened: bool = False) -> bool:
    """Bernoulli(skill x base probability); updates the running success estimate."""
    p = min(1.0, attacker.skill * edge.probability)
    ok = bool(rng.random() < p)
    attacker.history.setdefault(edge.dst[0], SuccessHistory()).record(ok)
    attacker.resources -= 1.0
    return ok


def host_graph(scenario: ItScenario, price_per_kwh: float = 0.3):
    """Undirected host graph (permitted zone pairs) with outage costs, attacker hosts excluded."""
    hosts = sorted(h for h, v in scenario.hosts.items() if not v.attacker_controlled)
    idx = {h: i for i, h in enumerate(hosts)}
    edges = []
    for a in hosts:
        for b in hosts:
            if idx[a] < idx[b] and (scenario.can_reach(a, b) or scenario.can_reach(b, a)):
                edges.append((idx[a], idx[b]))
    costs = [scenario.outage_cost(h, price_per_kwh) for h in hosts]
    return hosts, edges, costs


def host_centrality(scenario: ItScenario, price_per_kwh: float = 0.3) -> dict[str, tuple[float, float]]:
    """(current-flow betweenness, outage cost) per host of the permitted-pair graph."""
    import warnings

    hosts, edges, costs = host_graph(scenario, price_per_kwh)
    if not edges:
        return {h: (0.0, c) for h, c in zip(hosts, costs)}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cb = current_flow_betweenness(len(hosts), edges, outage_conductance(edges, costs))
    return {h: (float(cb[i]), costs[i]) for i, h in enumerate(hosts)}


def sensor_scores(scenario: ItScenario, q: dict[str, float] | None = None, price_per_kwh: float = 0.3, centrality=None) -> dict[str, float]:
    """Centrality x outage cost (x learning rate) per host."""
    centrality = centrality or host_centrality(scenario, price_per_kwh)
    q = q or {}
    return {h: cb * c * q.get(h, 1.0) for h, (cb, c) in centrality.items()}


def _node_probability(graph: AttackGraph) -> dict[str, float]:
    p: dict[str, float] = {}
    for e in graph.edges:
        p[e.dst[0]] = max(p.get(e.dst[0], 0.0), e.probability)
    return p


def _risk(p, scenario, defender, price):
    hosts = sorted(p)
    return defender_risk(
        [p[h] for h in hosts], [scenario.outage_cost(h, price) for h in hosts], [defender.learning(h) for h in hosts]
    )


def run_game(config: GameConfig, scenario: ItScenario, emit=None) -> GameResult:
    """Play ``config.rounds`` rounds; ``emit(alert)`` receives every sensor alert."""
    rng = np.random.default_rng(config.seed)
    graph = generate_attack_graph(scenario, price_per_kwh=config.price_per_kwh)
    n_hosts = len([h for h in scenario.hosts.values() if not h.attacker_controlled])
    if config.sensors > n_hosts:
        raise ValueError("more sensors than hosts")
    attacker = AttackerState(config.skill_initial, resources=config.resources, goal=frozenset(scenario.goals))
    defender = DefenderState(config.capital, config.funds)
    usage: dict[tuple, int] = {}
    centrality = host_centrality(scenario, config.price_per_kwh)
    node_p = _node_probability(graph)
    records = []
    alert_id = 0
    for r in range(1, config.rounds + 1):
        attacker.skill = skill_at(r, config.skill_initial, config.skill_increment)
        attacker.resources = config.resources
        defender.rounds_funded = r
        # proactive: sensors by centrality x cost x learning, then harden the most often detected edge
        scores = sensor_scores(scenario, defender.q, config.price_per_kwh, centrality)
        sensors, spent, _ = place_sensors(scores, config.sensors, defender.available, config.sensor_cost, defender.sensors)
        defender.sensors = sensors
        defender.spent += spent
        for key in sorted(usage, key=lambda k: (-usage[k], _key(k[0]), _key(k[1]), k[2])):
            if key in defender.hardened:
                continue
            if defender.available + 1e-12 < config.hardening_cost:
                break
            defender.hardened.add(key)
            defender.spent += config.hardening_cost
            break  # one hardened edge per round
        assert defender.spent <= config.capital + r * config.funds + 1e-9

        risk_before = _risk(node_p, scenario, defender, config.price_per_kwh)
        blocked = set(defender.hardened)
        position = graph.root
        steps: list[dict] = []
        alerts: list[dict] = []
        path_taken = [position[0]]
        detections = 0
        t = 0.0
        outcome = ""
        while True:
            if position[0] in scenario.goals:
                outcome = "goal"
                break
            if detections >= config.max_detections:
                outcome = "detected"
                break
            if attacker.resources < 1.0:
                outcome = "exhausted"
                break
            try:
                _, _, plan = attacker_plan_path(graph, attacker, position, blocked=blocked)
            except NoPath:
                outcome = "no-path"
                break
            attacker.path = [e.dst[0] for e in plan]
            edge = plan[0]
            key = (edge.src, edge.dst, edge.vulnerability)
            moved = False
            replan = False
            for attempt in range(2):  # try, retry once, then replan
                if attacker.resources < 1.0:
                    break
                ok = attempt_compromise(attacker, edge, rng)
                v = scenario.vulnerabilities[edge.vulnerability]
                t += v.time if ok else v.retry_time
                detected = edge.dst[0] in defender.sensors
                steps.append({
                    "src": edge.src[0], "dst": edge.dst[0], "vulnerability": edge.vulnerability,
                    "complexity": edge.complexity, "success": ok, "detected": detected, "t": t,
                })
                if detected:
                    detections += 1
                    usage[key] = usage.get(key, 0) + 1  # defender only learns edges it saw
                    host = edge.dst[0]
                    defender.q[host] = defender.learning(host) + config.q_step
                    alert = {
                        "alert_id": alert_id, "round": r, "t": (r - 1) * ROUND_SECONDS + t, "sensor": host,
                        "src_host": edge.src[0], "dst_host": host, "vulnerability": edge.vulnerability,
                        "success": ok, "label": "attack",
                    }
                    alert_id += 1
                    alerts.append(alert)
                    defender.detections.append(alert)
                    if emit is not None:
                        emit(alert)
                    blocked.add(key)  # reactive block, free within the round
                    replan = True
                if ok:
                    position = edge.dst
                    path_taken.append(position[0])
                    moved = True
                    break
                if replan or detections >= config.max_detections:
                    break
        exploited = [s["complexity"] for s in steps if s["success"]]
        complexity = float(np.mean(exploited)) if exploited else None
        records.append(RoundRecord(
            r, attacker.skill, path_taken, steps, outcome == "goal", outcome, detections,
            risk_before, _risk(node_p, scenario, defender, config.price_per_kwh), complexity,
            sorted(defender.sensors), alerts, defender.spent,
        ))
    return GameResult(records, attacker, defender, graph)


def attack_complexity(record: RoundRecord) -> float | None:
    """Mean access complexity of the vulnerabilities exploited in the round."""
    return record.complexity


def complexity_interval(scores, confidence: float = 0.95) -> tuple[float, float, float]:
    """Mean and two-sided Student-t confidence interval over a run set."""
    x = np.asarray([s for s in scores if s is not None], dtype=float)
    if x.size < 2:
        raise ValueError("need at least two scores")
    m = float(x.mean())
    half = float(stats.t.ppf(0.5 + confidence / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))
    return m, m - half, m + half
