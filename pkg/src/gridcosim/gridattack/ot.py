"""OT coordinator: grid-degrading actions through compromised devices."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ..power.grid import GridNetwork, OperationalLimits
from ..power.operation import GridStateClass, classify_grid_state
from ..power.powerflow import PowerFlowResult
from ..power.topology import solve_with_fallback

ACTION_KINDS = ("OpenBreaker", "SetDerOutputPercent", "SetCosPhi", "SetTapPosition")
LEVEL_PRIORITY = {"operation": 3, "station": 2, "field": 1, "enterprise": 0}
FEIGN_LOADING = 109.40
MASK_LOADING = 99.0


@dataclass(frozen=True)
class OtAction:
    kind: str
    target: int
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown OT action {self.kind!r}")
        if self.kind == "SetDerOutputPercent" and not 0.0 <= self.value <= 100.0:
            raise ValueError("DER output percent must lie in [0, 100]")
        if self.kind == "SetCosPhi" and not 0.8 <= self.value <= 1.0:
            raise ValueError("cos phi must lie in [0.8, 1.0]")
        if self.kind == "SetTapPosition" and float(self.value) != int(self.value):
            raise ValueError("tap position must be an integer")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target": self.target, "value": self.value}


@dataclass
class OtDevice:
    """A compromised device and the grid elements it can drive."""

    id: str
    level: str = "field"
    breakers: list[int] = field(default_factory=list)
    ders: list[int] = field(default_factory=list)
    transformers: list[int] = field(default_factory=list)

    @property
    def priority(self) -> int:
        return LEVEL_PRIORITY.get(self.level, 0)

    @property
    def has_linkage(self) -> bool:
        return bool(self.breakers or self.ders or self.transformers)

    def controls(self, action: OtAction) -> bool:
        if action.kind == "OpenBreaker":
            return action.target in self.breakers
        if action.kind in ("SetDerOutputPercent", "SetCosPhi"):
            return action.target in self.ders
        return action.target in self.transformers


@dataclass
class ActionPlan:
    actions: list[OtAction]
    predicted_class: GridStateClass
    baseline_class: GridStateClass
    devices: list[str]
    unserved_mw: float
    max_loading: float
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "actions": [a.to_dict() for a in self.actions],
            "predicted_class": self.predicted_class.name,
            "baseline_class": self.baseline_class.name,
            "devices": self.devices,
            "unserved_mw": self.unserved_mw,
            "max_loading": self.max_loading,
            "evaluations": self.evaluations,
        }


@dataclass
class NoLeverage:
    reason: str
    baseline_class: GridStateClass | None = None


def apply_actions(grid: GridNetwork, actions) -> GridNetwork:
    g = grid.copy()
    for act in actions:
        if act.kind == "OpenBreaker":
            g.branch(act.target).closed = False
        elif act.kind == "SetDerOutputPercent":
            inj = g.injection(act.target)
            inj.p_mw = inj.p_max * act.value / 100.0
            inj.q_mvar = inj.p_mw * math.tan(math.acos(inj.cos_phi))
        elif act.kind == "SetCosPhi":
            inj = g.injection(act.target)
            inj.cos_phi = act.value
            inj.q_mvar = inj.p_mw * math.tan(math.acos(act.value))
        else:
            tr = g.branch(act.target)
            tap = int(act.value)
            if not tr.tap_min <= tap <= tr.tap_max:
                raise ValueError(f"tap {tap} outside range of transformer {tr.id}")
            tr.tap = tap
    return g


def evaluate(grid: GridNetwork, limits: OperationalLimits):
    res = solve_with_fallback(grid)
    return classify_grid_state(res, limits), res


def _severity(cls: GridStateClass, res: PowerFlowResult) -> tuple:
    return (int(cls), round(res.unserved_mw, 9), round(res.max_loading, 9))


def device_area(grid: GridNetwork, device: OtDevice) -> set[int]:
    """Buses that lose supply or change voltage when the device acts.

    For a breaker or transformer this is the island cut off from the slack
    when the branch opens; for a DER it is its own bus.
    """
    area: set[int] = set()
    energized = grid.energized_buses()
    for bid in list(device.breakers) + list(device.transformers):
        g = grid.copy()
        g.branch(bid).closed = False
        area |= energized - g.energized_buses()
    for iid in device.ders:
        area.add(grid.injection(iid).bus)
    return area


def candidate_actions(grid: GridNetwork, device: OtDevice) -> list[OtAction]:
    out = []
    for bid in device.breakers:
        if grid.branch(bid).closed:
            out.append(OtAction("OpenBreaker", bid))
    for iid in device.ders:
        out.append(OtAction("SetDerOutputPercent", iid, 0.0))
        out.append(OtAction("SetDerOutputPercent", iid, 100.0))
        out.append(OtAction("SetCosPhi", iid, 0.8))
    for tid in device.transformers:
        tr = grid.branch(tid)
        for tap in sorted({tr.tap_min, tr.tap_max} - {tr.tap}):
            out.append(OtAction("SetTapPosition", tid, float(tap)))
    return out


def select_devices(grid: GridNetwork, devices: list[OtDevice]) -> list[OtDevice]:
    """Highest-priority devices first; a device is kept only if it reaches new buses."""
    linked = [d for d in devices if d.has_linkage]
    linked.sort(key=lambda d: (-d.priority, d.id))
    covered: set[int] = set()
    chosen = []
    for d in linked:
        area = device_area(grid, d)
        if not area or not area <= covered:
            chosen.append(d)
            covered |= area
    return chosen


def coordinate_ot_attack(
    grid: GridNetwork,
    devices: list[OtDevice],
    budget: int = 500,
    limits: OperationalLimits | None = None,
) -> ActionPlan | NoLeverage:
    """Greedy search for the action set that leaves the grid in the worst class.

    Every single action is evaluated first; the best is then extended one
    action at a time while the severity key (class, unserved load, maximum
    loading) keeps increasing and evaluations remain.
    """
    limits = limits or grid.limits
    chosen = select_devices(grid, devices)
    if not chosen:
        return NoLeverage("no compromised device controls a grid element")
    base_cls, base_res = evaluate(grid, limits)
    owner: dict[OtAction, str] = {}
    for d in chosen:
        for act in candidate_actions(grid, d):
            owner.setdefault(act, d.id)
    actions = list(owner)
    if not actions:
        return NoLeverage("no admissible action on controlled elements", base_cls)

    evals = 0
    best_plan: list[OtAction] = []
    best_key = _severity(base_cls, base_res)
    best_res = base_res
    best_cls = base_cls
    improved = True
    while improved and evals < budget:
        improved = False
        round_best = None
        used = {(a.kind, a.target) for a in best_plan}
        for act in actions:
            if (act.kind, act.target) in used:
                continue
            if evals >= budget:
                break
            evals += 1
            cls, res = evaluate(apply_actions(grid, best_plan + [act]), limits)
            key = _severity(cls, res)
            if key > best_key and (round_best is None or key > round_best[0]):
                round_best = (key, act, cls, res)
        if round_best is not None:
            best_key, act, best_cls, best_res = round_best
            best_plan = best_plan + [act]
            improved = True

    if best_cls <= base_cls:
        return NoLeverage("no action worsens the grid state class", base_cls)
    devs = sorted({owner[a] for a in best_plan})
    return ActionPlan(best_plan, best_cls, base_cls, devs, float(best_res.unserved_mw), best_res.max_loading, evals)


@dataclass
class FabricatedImage:
    image: PowerFlowResult
    achieved: GridStateClass
    reached: bool
    altered: dict = field(default_factory=dict)
    note: str = ""


def fabricate_monitoring(
    result: PowerFlowResult,
    target: GridStateClass,
    controlled_branches=(),
    controlled_buses=(),
    limits: OperationalLimits | None = None,
) -> FabricatedImage:
    """Falsified grid image whose class equals ``target`` where possible.

    Raising the class reports a controlled loading above the relevant limit;
    lowering it clamps violating controlled loadings to 99 % and voltages
    back inside the band. Unserved load cannot be hidden or invented through
    loading and voltage datapoints.
    """
    limits = limits or OperationalLimits()
    img = copy.deepcopy(result)
    altered: dict = {}
    controlled_branches = [b for b in controlled_branches if b in img.branch_ids]
    controlled_buses = [b for b in controlled_buses if b in img.bus_ids]
    current = classify_grid_state(img, limits)
    if not controlled_branches and not controlled_buses:
        return FabricatedImage(img, current, current == target, altered, "no controlled datapoints")

    if target < current:
        for bid in controlled_branches:
            k = img.branch_ids.index(bid)
            if img.loading_percent[k] > limits.loading_limit:
                altered[("loading", bid)] = MASK_LOADING
                img.loading_percent[k] = MASK_LOADING
        for bus in controlled_buses:
            k = img.bus_ids.index(bus)
            if not img.energized[k]:
                continue
            if img.vm[k] < limits.v_min or img.vm[k] > limits.v_max:
                v = float(np.clip(img.vm[k], limits.v_min + 0.001, limits.v_max - 0.001))
                altered[("voltage", bus)] = v
                img.vm[k] = v
    elif target > current:
        if target == GridStateClass.Class1:
            value = FEIGN_LOADING
        else:
            value = limits.temporary_limit + 10.0
        if target <= GridStateClass.Class2 and controlled_branches:
            bid = controlled_branches[0]
            k = img.branch_ids.index(bid)
            altered[("loading", bid)] = value
            img.loading_percent[k] = value
        elif target <= GridStateClass.Class2 and controlled_buses:
            bus = controlled_buses[0]
            k = img.bus_ids.index(bus)
            v = limits.v_min - 0.005 if target == GridStateClass.Class1 else limits.v_min_second - 0.01
            altered[("voltage", bus)] = v
            img.vm[k] = v
    achieved = classify_grid_state(img, limits)
    note = "" if achieved == target else f"controlled datapoints reach {achieved.name}, not {target.name}"
    return FabricatedImage(img, achieved, achieved == target, altered, note)
