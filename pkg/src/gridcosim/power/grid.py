"""Grid data model and its JSON representation."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from typing import Iterable


class GridError(ValueError):
    """Raised when a grid definition violates its structural invariants."""


@dataclass
class Bus:
    id: int
    kind: str = "pq"  # slack | pv | pq
    vn_pu: float = 1.0
    name: str = ""


@dataclass
class Branch:
    """A line or a two-winding transformer.

    Transformers carry an off-nominal tap on the from side; the voltage ratio
    is ``1 + tap * tap_step`` so raising the tap lowers the to-side voltage.
    """

    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    rating_mva: float = 100.0
    closed: bool = True
    kind: str = "line"  # line | transformer
    switchable: bool = True
    tap: int = 0
    tap_min: int = 0
    tap_max: int = 0
    tap_step: float = 0.0
    b: float = 0.0

    @property
    def ratio(self) -> float:
        if self.kind != "transformer":
            return 1.0
        return 1.0 + self.tap * self.tap_step


@dataclass
class Injection:
    id: int
    bus: int
    p_mw: float
    q_mvar: float = 0.0
    kind: str = "load"  # load | generator | der
    p_min: float = 0.0
    p_max: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0
    cost: float = 0.0
    in_service: bool = True
    cos_phi: float = 1.0


@dataclass
class OperationalLimits:
    v_min: float = 0.965
    v_max: float = 1.055
    loading_limit: float = 100.0
    temporary_limit: float = 130.0
    v_min_second: float = 0.90
    v_max_second: float = 1.10

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise GridError("voltage band lower bound must be below upper bound")
        if self.loading_limit > self.temporary_limit:
            raise GridError("loading limit exceeds temporary overload limit")
        if not (self.v_min_second <= self.v_min and self.v_max <= self.v_max_second):
            raise GridError("second voltage band must contain the first")


@dataclass
class GridNetwork:
    buses: list[Bus]
    branches: list[Branch]
    injections: list[Injection] = field(default_factory=list)
    base_mva: float = 100.0
    limits: OperationalLimits = field(default_factory=OperationalLimits)
    name: str = "grid"

    def __post_init__(self):
        self.validate()

    # -- lookups -------------------------------------------------------
    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.kind == "slack")

    def branch(self, branch_id: int) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(f"no branch {branch_id}")

    def injection(self, inj_id: int) -> Injection:
        for inj in self.injections:
            if inj.id == inj_id:
                return inj
        raise KeyError(f"no injection {inj_id}")

    @property
    def transformers(self) -> list[Branch]:
        return [br for br in self.branches if br.kind == "transformer"]

    def copy(self) -> "GridNetwork":
        return copy.deepcopy(self)

    # -- invariants ----------------------------------------------------
    def validate(self) -> None:
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise GridError("duplicate bus id")
        slacks = [b for b in self.buses if b.kind == "slack"]
        if len(slacks) != 1:
            raise GridError(f"expected exactly one slack bus, found {len(slacks)}")
        known = set(ids)
        br_ids = [br.id for br in self.branches]
        if len(set(br_ids)) != len(br_ids):
            raise GridError("duplicate branch id")
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise GridError(f"branch {br.id} references an unknown bus")
            if br.from_bus == br.to_bus:
                raise GridError(f"branch {br.id} is a self-loop")
            if br.x == 0.0 and br.r == 0.0:
                raise GridError(f"branch {br.id} has zero impedance")
            if br.kind == "transformer" and not br.tap_min <= br.tap <= br.tap_max:
                raise GridError(f"transformer {br.id} tap {br.tap} outside [{br.tap_min}, {br.tap_max}]")
        for inj in self.injections:
            if inj.bus not in known:
                raise GridError(f"injection {inj.id} references unknown bus {inj.bus}")
        if not _connected(ids, [(br.from_bus, br.to_bus) for br in self.branches]):
            raise GridError("grid is not connected with all switches closed")

    # -- topology helpers ----------------------------------------------
    def closed_branches(self) -> list[Branch]:
        return [br for br in self.branches if br.closed]

    def energized_buses(self) -> set[int]:
        """Buses reachable from the slack over closed branches."""
        adj = _adjacency(self.bus_ids, [(br.from_bus, br.to_bus) for br in self.closed_branches()])
        seen = {self.slack.id}
        stack = [self.slack.id]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def bus_load_mw(self) -> dict[int, float]:
        """Net consumption per bus (loads minus in-service generation)."""
        out = {b.id: 0.0 for b in self.buses}
        for inj in self.injections:
            if not inj.in_service:
                continue
            sign = 1.0 if inj.kind == "load" else -1.0
            out[inj.bus] += sign * inj.p_mw
        return out


def _adjacency(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {u: [] for u in nodes}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return adj


def _connected(nodes: list[int], edges: list[tuple[int, int]]) -> bool:
    if not nodes:
        return True
    adj = _adjacency(nodes, edges)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(nodes)


# -- JSON ----------------------------------------------------------------

def grid_from_dict(doc: dict) -> GridNetwork:
    """Build a grid from the documented JSON layout.

    ``transformers[]`` entries are merged into the branch list with
    ``kind="transformer"``; ``limits`` is optional.
    """
    buses = [Bus(**b) for b in doc["buses"]]
    branches = [Branch(**br) for br in doc.get("branches", [])]
    for tr in doc.get("transformers", []):
        tr = dict(tr)
        tr.setdefault("kind", "transformer")
        tr.setdefault("switchable", False)
        branches.append(Branch(**tr))
    injections = [Injection(**inj) for inj in doc.get("injections", [])]
    limits = OperationalLimits(**doc["limits"]) if "limits" in doc else OperationalLimits()
    return GridNetwork(
        buses=buses,
        branches=branches,
        injections=injections,
        base_mva=doc.get("base_mva", 100.0),
        limits=limits,
        name=doc.get("name", "grid"),
    )


def grid_to_dict(grid: GridNetwork) -> dict:
    return {
        "name": grid.name,
        "base_mva": grid.base_mva,
        "buses": [asdict(b) for b in grid.buses],
        "branches": [asdict(br) for br in grid.branches if br.kind != "transformer"],
        "transformers": [asdict(br) for br in grid.branches if br.kind == "transformer"],
        "injections": [asdict(inj) for inj in grid.injections],
        "limits": asdict(grid.limits),
    }
