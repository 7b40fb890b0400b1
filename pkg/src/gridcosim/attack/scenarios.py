"""Bundled zoned topologies for the four firewall constellations.

1: vertical only (hierarchical, no same-zone traffic), C2 on the internet.
2: as 1, but the SCADA zone has no internal access control.
3: flat station WAN with same-zone traffic, foothold on a station node.
4: as 3, but hierarchical and no same-zone traffic, foothold on an RTU.
"""
from __future__ import annotations

from .scenario import ItScenario, initialize_scenario

# catalog ids by rough complexity band; field devices carry the easiest ones
_V = {k: f"SYN-2024-{k:04d}" for k in range(1, 21)}


def _plant_hosts() -> tuple[list[dict], list[dict]]:
    subnets = [
        {"id": "internet", "zone": "internet"},
        {"id": "office", "zone": "enterprise"},
        {"id": "dmz", "zone": "DMZ"},
        {"id": "scada", "zone": "SCADA"},
        {"id": "ot", "zone": "OT"},
    ]
    hosts = [
        {"id": "ws1", "subnet": "office", "role": "workstation", "vulnerabilities": [_V[5], _V[10]], "peak_kw": 2.0},
        {"id": "ws2", "subnet": "office", "role": "workstation", "vulnerabilities": [_V[11]], "peak_kw": 2.0},
        {"id": "data1", "subnet": "dmz", "role": "server", "vulnerabilities": [_V[12], _V[14]], "peak_kw": 5.0},
        {"id": "hist1", "subnet": "dmz", "role": "historian", "vulnerabilities": [_V[16]], "peak_kw": 5.0},
        {"id": "scada-srv", "subnet": "scada", "role": "SCADA-server", "vulnerabilities": [_V[8], _V[15]], "peak_kw": 50.0},
        {"id": "hmi", "subnet": "scada", "role": "HMI", "vulnerabilities": [_V[9], _V[13]], "peak_kw": 40.0},
        {"id": "rtu1", "subnet": "ot", "role": "RTU", "vulnerabilities": [_V[1], _V[3]], "comm_device": "rtu1", "grid_device": 3, "peak_kw": 36.0},
        {"id": "rtu2", "subnet": "ot", "role": "RTU", "vulnerabilities": [_V[2], _V[4]], "comm_device": "rtu2", "grid_device": 4, "peak_kw": 36.0},
    ]
    return subnets, hosts


def _wan_hosts() -> tuple[list[dict], list[dict]]:
    subnets = [{"id": "scada", "zone": "SCADA"}]
    hosts = [{"id": "scada-srv", "subnet": "scada", "role": "SCADA-server", "vulnerabilities": [_V[8], _V[15]], "peak_kw": 50.0}]
    for k in (1, 2, 3):
        subnets.append({"id": f"station{k}", "zone": "OT"})
        subnets.append({"id": f"field{k}", "zone": "field"})
        hosts.append({"id": f"gw{k}", "subnet": f"station{k}", "role": "server", "vulnerabilities": [_V[4], _V[7]], "peak_kw": 20.0})
        hosts.append({
            "id": f"rtu{k}", "subnet": f"field{k}", "role": "RTU", "vulnerabilities": [_V[1], _V[3]],
            "comm_device": f"rtu{k}", "grid_device": k, "peak_kw": 36.0,
        })
    return subnets, hosts


def scenario_config(number: int) -> dict:
    if number in (1, 2):
        subnets, hosts = _plant_hosts()
        overrides = {"SCADA->SCADA": True} if number == 2 else {}
        return {
            "name": f"scenario-{number}",
            "subnets": subnets,
            "hosts": hosts,
            "firewall": {"hierarchical_only": True, "horizontal_allowed": False, "overrides": overrides},
            "goals": {"hosts": ["rtu1"], "disruption": "malicious RTU command"},
            "c2": {"subnet": "internet", "id": "c2"},
        }
    if number in (3, 4):
        subnets, hosts = _wan_hosts()
        if number == 3:
            subnets.append({"id": "wan-edge", "zone": "OT"})
            return {
                "name": "scenario-3",
                "subnets": subnets,
                "hosts": hosts,
                "firewall": {"hierarchical_only": False, "horizontal_allowed": True},
                "goals": {"hosts": ["rtu3", "scada-srv"]},
                "c2": {"subnet": "wan-edge", "id": "c2"},
            }
        return {
            "name": "scenario-4",
            "subnets": subnets,
            "hosts": hosts,
            "firewall": {"hierarchical_only": True, "horizontal_allowed": False},
            "goals": {"hosts": ["scada-srv"]},
            "c2": {"host": "rtu1"},
        }
    raise ValueError(f"no bundled scenario {number}")


def bundled_scenario(number: int) -> ItScenario:
    return initialize_scenario(scenario_config(number))


BENCHMARK_LAYOUT = (("enterprise", 3), ("DMZ", 2), ("SCADA", 3), ("OT", 6), ("field", 7))
_ROLE_BY_ZONE = {
    "enterprise": ("workstation", "workstation", "server"),
    "DMZ": ("server", "historian", "server"),
    "SCADA": ("SCADA-server", "HMI", "HMI"),
    "OT": ("server", "server", "HMI"),
    "field": ("RTU", "RTU", "RTU"),
}
_PEAK_KW = {"enterprise": 2.0, "DMZ": 5.0, "SCADA": 50.0, "OT": 20.0, "field": 36.0}


def benchmark_config(seed: int = 2024, hosts_per_subnet: int = 3) -> dict:
    """21 zoned subnets (3 enterprise, 2 DMZ, 3 SCADA, 6 OT, 7 field), C2 on the internet.

    Hierarchical with same-zone traffic allowed; the goal is an RTU in the
    last field subnet. Vulnerabilities are drawn deterministically from the
    catalog, two per host.
    """
    import numpy as np

    rng = np.random.default_rng(seed)
    subnets = [{"id": "internet", "zone": "internet"}]
    hosts = []
    rtu = 0
    for zone, count in BENCHMARK_LAYOUT:
        for s in range(1, count + 1):
            sid = f"{zone.lower()}{s}"
            subnets.append({"id": sid, "zone": zone})
            for k in range(hosts_per_subnet):
                role = _ROLE_BY_ZONE[zone][k % 3]
                picks = sorted(rng.choice(np.arange(1, 21), size=2, replace=False).tolist())
                h = {
                    "id": f"{sid}-h{k + 1}", "subnet": sid, "role": role,
                    "vulnerabilities": [_V[i] for i in picks], "peak_kw": _PEAK_KW[zone],
                }
                if zone == "field":
                    rtu += 1
                    h["comm_device"] = f"rtu{rtu}"
                    h["grid_device"] = rtu
                hosts.append(h)
    return {
        "name": "benchmark-21",
        "subnets": subnets,
        "hosts": hosts,
        "firewall": {"hierarchical_only": True, "horizontal_allowed": True},
        "goals": {"hosts": [f"field{BENCHMARK_LAYOUT[-1][1]}-h1"], "disruption": "malicious RTU command"},
        "c2": {"subnet": "internet", "id": "c2"},
    }


def benchmark_scenario(seed: int = 2024) -> ItScenario:
    return initialize_scenario(benchmark_config(seed))
