"""Multi-stage IT attack: subnet-by-subnet discovery, exploitation and C2."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .scenario import ItScenario

ACTION_KINDS = (
    "scan", "exploit-attempt", "exploit-success", "exploit-failure",
    "install", "c2-beacon", "c2-command", "abort", "goal-reached",
)
STAGE_OF = {
    "scan": "recon",
    "exploit-attempt": "exploit",
    "exploit-success": "exploit",
    "exploit-failure": "exploit",
    "install": "install",
    "c2-beacon": "c2",
    "c2-command": "act",
    "abort": "impact",
    "goal-reached": "impact",
}
SCAN_TIME = 1.0
INSTALL_TIME = 5.0
C2_TIME = 1.0
ATTEMPTS_PER_VULN = 2  # first try plus one retry, then replan


@dataclass
class TraceAction:
    t: float
    actor: str
    kind: str
    host: str
    vulnerability: str | None = None
    detected: bool = False
    stage: str = ""
    note: str = ""

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class AttackTrace:
    actions: list[TraceAction] = field(default_factory=list)

    def add(self, a: TraceAction) -> None:
        if a.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {a.kind!r}")
        if self.actions and a.t < self.actions[-1].t:
            raise ValueError("trace timestamps must be nondecreasing")
        self.actions.append(a)

    def of_kind(self, kind: str) -> list[TraceAction]:
        return [a for a in self.actions if a.kind == kind]

    def __len__(self) -> int:
        return len(self.actions)

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for a in self.actions:
                fh.write(json.dumps(a.to_dict(), sort_keys=True) + "\n")

    @property
    def elapsed(self) -> float:
        return self.actions[-1].t - self.actions[0].t if self.actions else 0.0


@dataclass
class PropagationResult:
    scenario: ItScenario
    trace: AttackTrace
    subnets_entered: list[str]
    interesting: list[str]
    goals_reached: list[str]
    aborted: bool
    reason: str = ""


@dataclass
class OutcomeReport:
    goals_met: list[str]
    all_goals_met: bool
    compromised: list[str]
    per_zone: dict[str, int]
    elapsed: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def propagate_attack(
    scenario: ItScenario,
    seed=0,
    skill: float = 1.0,
    sensors=(),
    t0: float = 0.0,
    copy: bool = True,
) -> PropagationResult:
    """Walk the subnets as sub-goals until the goals fall or nothing is left.

    Exploit success is Bernoulli(skill x base probability). A failed
    vulnerability is retried once, then the attacker replans to the next
    one on that host. A subnet is fully explored when every reachable host
    was scanned and attempted.
    """
    sc = scenario.copy() if copy else scenario
    rng = _rng(seed)
    skill = min(max(float(skill), 0.0), 1.0)
    sensors = set(sensors)
    trace = AttackTrace()
    state = {"t": float(t0)}
    attempted: set[str] = set()
    entered: list[str] = []
    interesting: list[str] = []
    reached: list[str] = []
    start_subnet = sc.hosts[sc.c2].subnet

    def emit(actor, kind, host, vuln=None, dt=0.0, stage=None, note=""):
        state["t"] += dt
        trace.add(TraceAction(state["t"], actor, kind, host, vuln, host in sensors, stage or STAGE_OF[kind], note))

    def open_targets(subnet):
        comp = [h for h in sc.hosts.values() if h.compromised]
        return [
            h.id for h in sc.hosts_in(subnet)
            if not h.compromised and h.id not in attempted and any(sc.can_reach(c.id, h.id) for c in comp)
        ]

    def actor_for(target):
        tsub = sc.hosts[target].subnet
        cands = [h.id for h in sc.hosts.values() if h.compromised and sc.can_reach(h.id, target)]
        return min(cands, key=lambda c: (sc.hosts[c].subnet != tsub, -sc.level_of(c), c))

    def goals_done():
        return all(sc.hosts[g].compromised for g in sc.goals)

    while not goals_done():
        cands = [s for s in sorted(sc.subnets) if open_targets(s)]
        if not cands:
            emit(sc.c2, "abort", sc.c2, note="unable to progress: no new sub-goals")
            return PropagationResult(sc, trace, entered, interesting, reached, True, "no new sub-goals")
        goal_subnets = {sc.hosts[g].subnet for g in sc.goals}
        subnet = min(cands, key=lambda s: (s not in goal_subnets, -sc.subnets[s].level, s))
        pivot = subnet != start_subnet and subnet not in entered
        entered.append(subnet)
        while not goals_done():
            targets = open_targets(subnet)
            if not targets:
                break
            target = targets[0]
            actor = actor_for(target)
            emit(actor, "scan", target, dt=SCAN_TIME, stage="pivot" if pivot else None)
            pivot = False
            host = sc.hosts[target]
            vulns = sorted(host.vulnerabilities, key=lambda v: (-sc.vulnerabilities[v].probability, v))
            won = None
            for vid in vulns:
                v = sc.vulnerabilities[vid]
                p = min(1.0, skill * v.probability)
                for _ in range(ATTEMPTS_PER_VULN):
                    emit(actor, "exploit-attempt", target, vid)
                    if rng.random() < p:
                        emit(actor, "exploit-success", target, vid, dt=v.time)
                        won = v
                        break
                    emit(actor, "exploit-failure", target, vid, dt=v.retry_time)
                if won is not None:
                    break
            attempted.add(target)
            if won is None:
                continue
            host.compromise(won.privilege)
            emit(actor, "install", target, won.id, dt=INSTALL_TIME)
            emit(sc.c2, "c2-beacon", target, dt=C2_TIME)
            emit(sc.c2, "c2-command", target, dt=C2_TIME)
            if target in sc.goals:
                reached.append(target)
                emit(sc.c2, "goal-reached", target)
        for h in sc.hosts_in(subnet):
            if h.compromised and h.id not in interesting and _is_interesting(sc, h.id):
                interesting.append(h.id)
    return PropagationResult(sc, trace, entered, interesting, reached, False, "goals reached")


def _is_interesting(sc: ItScenario, host_id: str) -> bool:
    """Host with a permitted path into another subnet or a link to an OT device."""
    h = sc.hosts[host_id]
    if h.comm_device or h.grid_device is not None:
        return True
    return any(o.subnet != h.subnet and sc.can_reach(host_id, o.id) for o in sc.hosts.values())


def evaluate_outcome(goals, scenario: ItScenario, trace: AttackTrace | None = None) -> OutcomeReport:
    goals = set(goals)
    comp = [h.id for h in sorted(scenario.hosts.values(), key=lambda h: h.id) if h.compromised and not h.attacker_controlled]
    per_zone: dict[str, int] = {}
    for hid in comp:
        z = scenario.zone_of(hid)
        per_zone[z] = per_zone.get(z, 0) + 1
    met = sorted(g for g in goals if scenario.hosts[g].compromised)
    return OutcomeReport(met, bool(goals) and len(met) == len(goals), comp, per_zone, trace.elapsed if trace else 0.0)


def lateral_moves(result: PropagationResult, zone: str | None = None) -> list[TraceAction]:
    """Successful exploits whose actor sits in the same zone as the victim."""
    sc = result.scenario
    out = []
    for a in result.trace.of_kind("exploit-success"):
        za, zh = sc.zone_of(a.actor), sc.zone_of(a.host)
        if za == zh and (zone is None or za == zone):
            out.append(a)
    return out
