"""IT scenario: zoned subnets, hosts, vulnerabilities and firewall policy."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

# larger level = deeper in the plant hierarchy; "internet" hosts external C2 nodes
ZONE_LEVELS = {"internet": -1, "enterprise": 0, "DMZ": 1, "SCADA": 2, "OT": 3, "field": 4}
HOST_ROLES = ("workstation", "server", "HMI", "SCADA-server", "RTU", "historian")
PRIVILEGES = ("none", "user", "admin")
KILL_CHAIN = ("recon", "exploit", "install", "c2", "act", "pivot", "impact")
# outage-cost multiplier per zone (field 1, station 2, operation 4, enterprise 3)
LEVEL_MULTIPLIER = {"internet": 3.0, "enterprise": 3.0, "DMZ": 3.0, "SCADA": 4.0, "OT": 2.0, "field": 1.0}
OUTAGE_HOURS = 12.0


class ScenarioError(ValueError):
    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


def privilege_rank(p: str) -> int:
    return PRIVILEGES.index(p)


@dataclass(frozen=True)
class Vulnerability:
    id: str
    complexity: float
    probability: float
    time: float = 60.0
    retry_time: float = 120.0
    u: float = 0.0
    privilege: str = "user"

    def __post_init__(self):
        if not 0.0 <= self.complexity <= 10.0:
            raise ValueError(f"{self.id}: complexity must lie in [0, 10]")
        if not 0.0 < self.probability <= 1.0:
            raise ValueError(f"{self.id}: probability must lie in (0, 1]")
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"{self.id}: u must lie in [0, 1]")
        if self.time < 0 or self.retry_time < 0:
            raise ValueError(f"{self.id}: times must be non-negative")
        if self.privilege not in ("user", "admin"):
            raise ValueError(f"{self.id}: granted privilege must be user or admin")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Subnet:
    id: str
    zone: str

    def __post_init__(self):
        if self.zone not in ZONE_LEVELS:
            raise ValueError(f"subnet {self.id}: unknown zone {self.zone!r}")

    @property
    def level(self) -> int:
        return ZONE_LEVELS[self.zone]


@dataclass
class ItHost:
    id: str
    subnet: str
    role: str = "workstation"
    vulnerabilities: list[str] = field(default_factory=list)
    compromised: bool = False
    privilege: str = "none"
    comm_device: str | None = None
    grid_device: int | None = None
    peak_kw: float = 10.0
    attacker_controlled: bool = False

    def __post_init__(self):
        if self.role not in HOST_ROLES:
            raise ValueError(f"host {self.id}: unknown role {self.role!r}")
        if self.privilege not in PRIVILEGES:
            raise ValueError(f"host {self.id}: unknown privilege {self.privilege!r}")
        if self.compromised and self.privilege == "none":
            raise ValueError(f"host {self.id}: compromised host needs a privilege")
        if self.role == "RTU" and not self.comm_device:
            raise ValueError(f"host {self.id}: RTU hosts must link a comm device")
        if self.peak_kw <= 0:
            raise ValueError(f"host {self.id}: peak power must be positive")

    def compromise(self, privilege: str) -> None:
        self.compromised = True
        if privilege_rank(privilege) > privilege_rank(self.privilege):
            self.privilege = privilege


@dataclass
class FirewallPolicy:
    """Directed zone-pair permission matrix.

    The flags generate the matrix: ``hierarchical_only`` permits only
    connections from a zone to the next deeper level, otherwise every
    cross-zone pair is open; ``horizontal_allowed`` opens same-zone
    host-to-host traffic. ``overrides`` then sets individual pairs.
    """

    matrix: dict[tuple[str, str], bool]
    hierarchical_only: bool = False
    horizontal_allowed: bool = True

    @classmethod
    def from_flags(cls, hierarchical_only=False, horizontal_allowed=True, overrides=None, zones=None) -> "FirewallPolicy":
        zones = list(zones or ZONE_LEVELS)
        m = {}
        for a in zones:
            for b in zones:
                if a == b:
                    m[(a, b)] = bool(horizontal_allowed)
                elif hierarchical_only:
                    m[(a, b)] = ZONE_LEVELS[b] == ZONE_LEVELS[a] + 1
                else:
                    m[(a, b)] = True
        for key, val in (overrides or {}).items():
            pair = _pair(key)
            if pair not in m:
                raise ValueError(f"override for unknown zone pair {key!r}")
            m[pair] = bool(val)
        return cls(m, bool(hierarchical_only), bool(horizontal_allowed))

    @classmethod
    def deny_all(cls) -> "FirewallPolicy":
        return cls({(a, b): False for a in ZONE_LEVELS for b in ZONE_LEVELS}, True, False)

    def allows(self, src_zone: str, dst_zone: str) -> bool:
        return self.matrix[(src_zone, dst_zone)]

    def __call__(self, src_zone: str, dst_zone: str) -> bool:
        return self.allows(src_zone, dst_zone)

    def with_denied(self, pairs) -> "FirewallPolicy":
        m = dict(self.matrix)
        for p in pairs:
            m[_pair(p)] = False
        return FirewallPolicy(m, self.hierarchical_only, self.horizontal_allowed)

    def to_dict(self) -> dict:
        return {
            "hierarchical_only": self.hierarchical_only,
            "horizontal_allowed": self.horizontal_allowed,
            "matrix": {f"{a}->{b}": v for (a, b), v in sorted(self.matrix.items())},
        }


def _pair(key) -> tuple[str, str]:
    if isinstance(key, str):
        a, b = key.split("->")
        return a.strip(), b.strip()
    return tuple(key)


@dataclass
class ItScenario:
    subnets: dict[str, Subnet]
    hosts: dict[str, ItHost]
    vulnerabilities: dict[str, Vulnerability]
    policy: FirewallPolicy
    goals: set[str]
    c2: str
    kill_chain: tuple[str, ...] = KILL_CHAIN
    disruption: str = ""
    name: str = "scenario"

    def zone_of(self, host_id: str) -> str:
        return self.subnets[self.hosts[host_id].subnet].zone

    def level_of(self, host_id: str) -> int:
        return ZONE_LEVELS[self.zone_of(host_id)]

    def can_reach(self, src: str, dst: str) -> bool:
        return src != dst and self.policy.allows(self.zone_of(src), self.zone_of(dst))

    def hosts_in(self, subnet: str) -> list[ItHost]:
        return [h for h in sorted(self.hosts.values(), key=lambda h: h.id) if h.subnet == subnet]

    def compromised(self) -> list[str]:
        return sorted(h.id for h in self.hosts.values() if h.compromised)

    def outage_cost(self, host_id: str, price_per_kwh: float = 0.3) -> float:
        h = self.hosts[host_id]
        return h.peak_kw * price_per_kwh * OUTAGE_HOURS * LEVEL_MULTIPLIER[self.zone_of(host_id)]

    def copy(self) -> "ItScenario":
        return initialize_scenario(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "subnets": [{"id": s.id, "zone": s.zone} for s in self.subnets.values()],
            "hosts": [
                {
                    "id": h.id,
                    "subnet": h.subnet,
                    "role": h.role,
                    "vulnerabilities": list(h.vulnerabilities),
                    "compromised": h.compromised,
                    "privilege": h.privilege,
                    "comm_device": h.comm_device,
                    "grid_device": h.grid_device,
                    "peak_kw": h.peak_kw,
                    "attacker_controlled": h.attacker_controlled,
                }
                for h in self.hosts.values()
            ],
            "vulnerabilities": [v.to_dict() for v in self.vulnerabilities.values()],
            "firewall": self.policy.to_dict(),
            "goals": {"hosts": sorted(self.goals), "disruption": self.disruption},
            "c2": {"host": self.c2},
            "kill_chain": list(self.kill_chain),
        }


def load_catalog() -> dict[str, Vulnerability]:
    """Bundled synthetic vulnerability catalog (20 entries, complexity 1-9)."""
    text = resources.files("gridcosim.data").joinpath("vulnerabilities.json").read_text()
    return {d["id"]: Vulnerability(**d) for d in json.loads(text)}


def _policy_from(doc) -> FirewallPolicy:
    doc = doc or {}
    if "matrix" in doc:
        m = {_pair(k): bool(v) for k, v in doc["matrix"].items()}
        full = FirewallPolicy.from_flags(doc.get("hierarchical_only", False), doc.get("horizontal_allowed", True))
        missing = set(full.matrix) - set(m)
        if missing:
            raise ScenarioError([f"firewall.matrix missing pair {a}->{b}" for a, b in sorted(missing)])
        return FirewallPolicy(m, doc.get("hierarchical_only", False), doc.get("horizontal_allowed", True))
    return FirewallPolicy.from_flags(
        doc.get("hierarchical_only", False), doc.get("horizontal_allowed", True), doc.get("overrides")
    )


def initialize_scenario(config: dict) -> ItScenario:
    """Materialize subnets, hosts, policy, goals and the C2 foothold."""
    errors = []
    subnets = {}
    for s in config.get("subnets", []):
        if s["id"] in subnets:
            errors.append(f"subnets: duplicate id {s['id']}")
            continue
        try:
            subnets[s["id"]] = Subnet(s["id"], s["zone"])
        except ValueError as e:
            errors.append(f"subnets[{s['id']}]: {e}")
    if "vulnerabilities" in config and config["vulnerabilities"]:
        vulns = {}
        for v in config["vulnerabilities"]:
            try:
                vulns[v["id"]] = Vulnerability(**v)
            except (TypeError, ValueError) as e:
                errors.append(f"vulnerabilities[{v.get('id')}]: {e}")
    else:
        vulns = load_catalog()
    hosts = {}
    for h in config.get("hosts", []):
        hid = h.get("id")
        if hid in hosts:
            errors.append(f"hosts: duplicate id {hid}")
            continue
        if h.get("subnet") not in subnets:
            errors.append(f"hosts[{hid}].subnet: unknown subnet {h.get('subnet')}")
            continue
        for v in h.get("vulnerabilities", []):
            if v not in vulns:
                errors.append(f"hosts[{hid}].vulnerabilities: unknown {v}")
        try:
            hosts[hid] = ItHost(**h)
        except (TypeError, ValueError) as e:
            errors.append(f"hosts[{hid}]: {e}")
    try:
        policy = _policy_from(config.get("firewall"))
    except ScenarioError as e:
        errors.extend(e.errors)
        policy = FirewallPolicy.deny_all()
    except (ValueError, KeyError) as e:
        errors.append(f"firewall: {e}")
        policy = FirewallPolicy.deny_all()

    c2cfg = config.get("c2") or {}
    c2 = None
    if "host" in c2cfg:
        c2 = c2cfg["host"]
        if c2 not in hosts:
            errors.append(f"c2.host: unknown host {c2}")
    elif "subnet" in c2cfg:
        c2 = c2cfg.get("id", "c2")
        if c2cfg["subnet"] not in subnets:
            errors.append(f"c2.subnet: unknown subnet {c2cfg['subnet']}")
        elif c2 in hosts:
            errors.append(f"c2.id: duplicate host id {c2}")
        else:
            hosts[c2] = ItHost(c2, c2cfg["subnet"], "workstation")
    else:
        errors.append("c2: missing C2 placement")
    if c2 in hosts:
        h = hosts[c2]
        h.attacker_controlled = True
        h.compromise("admin")

    g = config.get("goals")
    if isinstance(g, dict):
        goal_hosts, disruption = set(g.get("hosts", [])), g.get("disruption", "")
    else:
        goal_hosts, disruption = set(g or []), ""
    if not goal_hosts:
        errors.append("goals: empty goal set")
    for gh in sorted(goal_hosts):
        if gh not in hosts:
            errors.append(f"goals: unknown host {gh}")
    if errors:
        raise ScenarioError(errors)
    return ItScenario(
        subnets, hosts, vulns, policy, goal_hosts, c2,
        tuple(config.get("kill_chain", KILL_CHAIN)), disruption, config.get("name", "scenario"),
    )
