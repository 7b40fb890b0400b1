"""Regenerate the bundled scenario files under src/gridcosim/data/scenarios."""
import json
from pathlib import Path

from gridcosim.attack.scenarios import benchmark_config
from gridcosim.attack.scenario import initialize_scenario
from gridcosim.dataset.sources import host_addresses

ROOT = Path(__file__).resolve().parents[1] / "src" / "gridcosim" / "data"


def field_layout(grid: dict, fold_slack_into=None):
    """One RTU per bus reporting its injection, voltage, outgoing flows, breakers and transformer taps."""
    branches = grid["branches"] + grid.get("transformers", [])
    tr_ids = {t["id"] for t in grid.get("transformers", [])}
    slack = next(b["id"] for b in grid["buses"] if b.get("kind") == "slack")
    owner = {}
    for b in grid["buses"]:
        bid = b["id"]
        owner[bid] = f"rtu{fold_slack_into}" if bid == slack and fold_slack_into is not None else f"rtu{bid}"
    points = {}

    def add(dev, kind, el):
        lst = points.setdefault(dev, [])
        lst.append({"device": dev, "id": len(lst) + 1, "kind": kind, "element": el})

    for b in grid["buses"]:
        add(owner[b["id"]], "bus-p", b["id"])
        add(owner[b["id"]], "bus-vm", b["id"])
    for br in sorted(branches, key=lambda x: x["id"]):
        dev = owner[br["from_bus"]]
        add(dev, "branch-p", br["id"])
        if br["id"] in tr_ids:
            add(dev, "tap", br["id"])
        elif br.get("switchable", True):
            add(dev, "breaker", br["id"])
    rtus = sorted(points, key=lambda d: int(d[3:]))
    return rtus, [dp for d in rtus for dp in points[d]]


def comms(rtus, ips):
    devices = [
        {"id": "mtu", "role": "MTU", "ip": "192.168.0.10", "zone": "scada"},
        {"id": "sw-cc", "role": "switch", "zone": "scada"},
        {"id": "gw", "role": "router", "ip": "192.168.0.1", "zone": "scada"},
        {"id": "sw-field", "role": "switch", "zone": "field"},
    ]
    links = [{"a": "mtu", "b": "sw-cc"}, {"a": "sw-cc", "b": "gw"}, {"a": "gw", "b": "sw-field"}]
    for r in rtus:
        devices.append({"id": r, "role": "RTU", "ip": ips[r], "zone": "field"})
        links.append({"a": "sw-field", "b": r})
    return {"name": "scada-star", "devices": devices, "links": links}


def load(name):
    return json.loads((ROOT / "grids" / f"{name}.json").read_text())


def write(name, doc):
    path = ROOT / "scenarios" / f"{name}.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    print(path)


def main():
    (ROOT / "scenarios").mkdir(exist_ok=True)
    rtus, dps = field_layout(load("six_bus"))
    write("example", {
        "name": "example", "seed": 7, "grid": "six_bus",
        "comms": comms(rtus, {r: f"10.1.0.{int(r[3:]) + 10}" for r in rtus}), "mtu": "mtu", "datapoints": dps,
        "attacker": {"enabled": False},
        "operator": {"period": 1.0, "horizon": 60.0, "noise_fraction": 0.02},
        "dataset": {"formats": ["u2", "jsonl"]},
        "dss": {"tree": "bundled"},
    })
    rtus, dps = field_layout(load("ring15"), fold_slack_into=1)
    ips = {r: f"10.1.0.{int(r[3:]) + 10}" for r in rtus}
    target = {"kind": "branch-p", "element": 7}
    write("masking", {
        "name": "masking", "seed": 11, "grid": "ring15_heavy",
        "comms": comms(rtus, ips), "mtu": "mtu", "datapoints": dps,
        "attacker": {"enabled": True, "mode": "masking", "compromised": ["rtu6", "rtu7"], "start": 0.0,
                     "target": target, "delta_mw": -3.0},
        "operator": {"period": 1.0, "horizon": 300.0},
        "dataset": {"formats": ["u2", "jsonl"]},
    })
    write("feigning", {
        "name": "feigning", "seed": 12, "grid": "ring15",
        "comms": comms(rtus, ips), "mtu": "mtu", "datapoints": dps,
        "attacker": {"enabled": True, "mode": "feigning", "compromised": ["rtu6", "rtu7"], "start": 0.0,
                     "target": target, "delta_mw": 4.0},
        "operator": {"period": 1.0, "horizon": 300.0},
        "dataset": {"formats": ["u2", "jsonl"]},
    })
    it = benchmark_config(seed=2024)
    addr = host_addresses(initialize_scenario(it))
    rtu_ip = {h["comm_device"]: addr[h["id"]] for h in it["hosts"] if h.get("comm_device")}
    rtus, dps = field_layout(load("ring22"), fold_slack_into=1)
    write("benchmark", {
        "name": "benchmark", "seed": 2024, "grid": "ring22",
        "comms": comms(rtus, rtu_ip), "mtu": "mtu", "datapoints": dps,
        "it": it,
        "game": {"rounds": 30, "sensors": 10, "budget": "medium"},
        "dss": {"tree": "bundled"},
        "attacker": {"enabled": True, "mode": "ot", "access": "propagation", "lead": 60.0, "ot_budget": 200},
        "operator": {"period": 1.0, "horizon": 900.0},
        "dataset": {"formats": ["u2", "jsonl", "csv"]},
    })


if __name__ == "__main__":
    main()
