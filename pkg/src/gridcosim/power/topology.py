"""Operator corrective actions: open-ring reconfiguration and tap control."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .grid import GridNetwork, OperationalLimits
from .operation import GridStateClass, Violation, check_operational_limits, classify_grid_state
from .powerflow import PowerFlowResult, run_power_flow


class ReconfigurationError(RuntimeError):
    """No radial configuration serves every load; ``best`` is the closest one found."""

    def __init__(self, message: str, best: GridNetwork | None):
        super().__init__(message)
        self.best = best


@dataclass
class ReconfigurationReport:
    grid: GridNetwork
    opened: list[int]
    closed: list[int]
    result: PowerFlowResult
    violations: list[Violation]
    state: GridStateClass

    @property
    def compliant(self) -> bool:
        return not self.violations

    @property
    def changed(self) -> bool:
        return bool(self.opened or self.closed)


@dataclass
class TapChange:
    iteration: int
    transformer: int
    old_tap: int
    new_tap: int
    bus: int
    kind: str


@dataclass
class TapReport:
    grid: GridNetwork
    changes: list[TapChange] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    saturated: bool = False
    iterations: int = 0


def solve_with_fallback(grid: GridNetwork) -> PowerFlowResult:
    """AC power flow, falling back to DC when Newton-Raphson diverges."""
    res = run_power_flow(grid, "AC", on_isolated_slack="blackout")
    if res.converged:
        return res
    return run_power_flow(grid, "DC", on_isolated_slack="blackout")


class _DisjointSet:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def reconfigure_topology(grid: GridNetwork, limits: OperationalLimits | None = None) -> ReconfigurationReport:
    """Restore open-ring operation with the least-loaded tie points open.

    All switches are closed and the meshed grid is solved. A maximum-loading
    spanning tree is grown with Kruskal's algorithm (fixed, non-switchable
    branches first); every switchable branch outside the tree is opened. Each
    opened branch is therefore the least-loaded branch of the cycle it closes,
    and the result is radial and connected.
    """
    limits = limits or grid.limits
    g = grid.copy()
    originally_open = {br.id for br in g.branches if not br.closed}
    for br in g.branches:
        if br.switchable:
            br.closed = True
    if any(not br.closed for br in g.branches):
        raise ReconfigurationError("a non-switchable branch is open; radial restoration cannot reach it", None)

    meshed = solve_with_fallback(g)
    loading = {bid: float(ld) for bid, ld in zip(meshed.branch_ids, meshed.loading_percent)}
    n_bus = len(g.buses)
    if len(g.branches) == n_bus - 1:
        res = meshed
        viol = check_operational_limits(res, limits) if res.converged else []
        return ReconfigurationReport(g, [], sorted(originally_open), res, viol, classify_grid_state(res, limits))

    ds = _DisjointSet(g.bus_ids)
    for br in g.branches:
        if not br.switchable and not ds.union(br.from_bus, br.to_bus):
            raise ReconfigurationError(f"fixed branches form a cycle through branch {br.id}", g)
    switchable = sorted((br for br in g.branches if br.switchable), key=lambda b: (-loading[b.id], b.id))
    opened = []
    for br in switchable:
        if not ds.union(br.from_bus, br.to_bus):
            br.closed = False
            opened.append(br.id)

    res = solve_with_fallback(g)
    if res.unserved_mw > 1e-9:
        raise ReconfigurationError("radial configuration leaves load unserved", g)
    viol = check_operational_limits(res, limits) if res.converged else []
    closed_now = sorted(originally_open - set(opened))
    return ReconfigurationReport(g, sorted(opened), closed_now, res, viol, classify_grid_state(res, limits))


def _branch_distance(grid: GridNetwork, start: int) -> dict[int, int]:
    adj: dict[int, list[int]] = {b: [] for b in grid.bus_ids}
    for br in grid.closed_branches():
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    dist = {start: 0}
    q = deque([start])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def _nearest_transformer(grid: GridNetwork, bus: int):
    dist = _branch_distance(grid, bus)
    best = None
    for tr in grid.transformers:
        if not tr.closed:
            continue
        d = min(dist.get(tr.from_bus, 10**9), dist.get(tr.to_bus, 10**9))
        if d >= 10**9:
            continue
        key = (d, tr.id)
        if best is None or key < best[0]:
            best = (key, tr)
    return None if best is None else best[1]


def _voltage_violations(grid: GridNetwork, res: PowerFlowResult, limits: OperationalLimits) -> list[Violation]:
    kinds = {b.id: b.kind for b in grid.buses}
    return [
        v
        for v in check_operational_limits(res, limits)
        if v.kind in ("undervoltage", "overvoltage") and kinds[v.element] == "pq"
    ]


def optimize_tap_position(grid: GridNetwork, limits: OperationalLimits | None = None, max_iterations: int = 20) -> TapReport:
    """Step transformer taps until the voltage band holds or no step is left.

    Each iteration takes the worst voltage violation at a load bus, picks the
    transformer with the fewest branches to it (lowest id on ties) and moves
    its tap by one step: up for overvoltage, down for undervoltage.
    """
    limits = limits or grid.limits
    g = grid.copy()
    report = TapReport(g)
    if not g.transformers:
        return report
    res = solve_with_fallback(g)
    viol = _voltage_violations(g, res, limits)
    it = 0
    while viol and it < max_iterations:
        worst = max(viol, key=lambda v: (v.magnitude, -v.element))
        tr = _nearest_transformer(g, worst.element)
        if tr is None:
            report.saturated = True
            break
        step = 1 if worst.kind == "overvoltage" else -1
        new_tap = tr.tap + step
        if not tr.tap_min <= new_tap <= tr.tap_max:
            report.saturated = True
            break
        it += 1
        report.changes.append(TapChange(it, tr.id, tr.tap, new_tap, worst.element, worst.kind))
        tr.tap = new_tap
        res = solve_with_fallback(g)
        viol = _voltage_violations(g, res, limits)
    report.iterations = it
    report.violations = viol
    return report
