"""Turn game alerts, attack traces and scenario traffic into alert events."""
from __future__ import annotations

from ..attack.scenario import ItScenario
from .emitter import SIGNATURES, AlertEvent


def host_addresses(scenario: ItScenario) -> dict[str, str]:
    """Deterministic IPv4 per host: 10.<subnet #>.0.<host #>, both 1-based in id order."""
    out = {}
    for si, sid in enumerate(sorted(scenario.subnets), start=1):
        for hi, h in enumerate(sorted(h.id for h in scenario.hosts_in(sid)), start=1):
            out[h] = f"10.{si}.{hi // 250}.{hi % 250 + 1}"
    return out


def sensor_numbers(scenario: ItScenario) -> dict[str, int]:
    return {h: i for i, h in enumerate(sorted(scenario.hosts), start=1)}


def subnet_vlan(scenario: ItScenario, host: str) -> int:
    return sorted(scenario.subnets).index(scenario.hosts[host].subnet) + 1


def legit_activity(scenario: ItScenario, addresses=None) -> list[tuple[str, str]]:
    """Permitted host pairs that carry ordinary traffic (attacker hosts excluded)."""
    addresses = addresses or host_addresses(scenario)
    hosts = sorted(h for h, v in scenario.hosts.items() if not v.attacker_controlled)
    return [(addresses[a], addresses[b]) for a in hosts for b in hosts if a != b and scenario.can_reach(a, b)]


def attacker_addresses(scenario: ItScenario, addresses=None) -> set[str]:
    addresses = addresses or host_addresses(scenario)
    return {addresses[h] for h, v in scenario.hosts.items() if v.attacker_controlled}


def game_events(alerts, scenario: ItScenario, addresses=None, t0: float = 0.0) -> list[AlertEvent]:
    """One attack event per game detection."""
    addresses = addresses or host_addresses(scenario)
    sensors = sensor_numbers(scenario)
    out = []
    for a in alerts:
        kind = "exploit-success" if a["success"] else "exploit-failure"
        out.append(AlertEvent(
            t0 + a["t"], sensors[a["sensor"]], addresses[a["src_host"]], addresses[a["dst_host"]],
            SIGNATURES[kind], "attack",
            {"source": "game", "round": a["round"], "action_id": a["alert_id"], "vulnerability": a["vulnerability"]},
            "tcp", 40000 + a["alert_id"] % 20000, 445, True, subnet_vlan(scenario, a["dst_host"]),
        ))
    return out


def trace_events(trace, scenario: ItScenario, addresses=None, round_index: int = 0, t0: float = 0.0) -> list[AlertEvent]:
    """One attack event per detected action of a propagation trace."""
    addresses = addresses or host_addresses(scenario)
    sensors = sensor_numbers(scenario)
    out = []
    for k, a in enumerate(trace.actions):
        if not a.detected or a.kind not in SIGNATURES:
            continue
        proto, dport = ("icmp", 0) if a.kind == "scan" else ("tcp", 443 if a.kind.startswith("c2") else 445)
        out.append(AlertEvent(
            t0 + a.t, sensors[a.host], addresses[a.actor], addresses[a.host], SIGNATURES[a.kind], "attack",
            {"source": "propagation", "round": round_index, "action_id": k, "kind": a.kind},
            proto, 8 if proto == "icmp" else 40000 + k % 20000, dport, False, subnet_vlan(scenario, a.host),
        ))
    return out
