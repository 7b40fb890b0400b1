"""Operational limits, grid-state classes and economic dispatch."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .grid import GridNetwork, OperationalLimits
from .powerflow import PowerFlowResult

UNSERVED_EPS_MW = 1e-9


class GridStateClass(IntEnum):
    Class0 = 0
    Class1 = 1
    Class2 = 2
    Class3 = 3


@dataclass(frozen=True)
class Violation:
    kind: str  # undervoltage | overvoltage | overload
    element: int
    magnitude: float


class PreconditionError(ValueError):
    pass


class DispatchInfeasible(ValueError):
    def __init__(self, message: str, shortfall_mw: float):
        super().__init__(message)
        self.shortfall_mw = shortfall_mw


def check_operational_limits(result: PowerFlowResult, limits: OperationalLimits) -> list[Violation]:
    """One violation per out-of-band bus and per overloaded branch."""
    if not result.converged:
        raise PreconditionError("limit check needs a converged power flow")
    out = []
    for bus, vm, en in zip(result.bus_ids, result.vm, result.energized):
        if not en:
            continue
        if vm < limits.v_min:
            out.append(Violation("undervoltage", bus, float(limits.v_min - vm)))
        elif vm > limits.v_max:
            out.append(Violation("overvoltage", bus, float(vm - limits.v_max)))
    for br, ld in zip(result.branch_ids, result.loading_percent):
        if ld > limits.loading_limit:
            out.append(Violation("overload", br, float(ld - limits.loading_limit)))
    return out


def classify_grid_state(result: PowerFlowResult, limits: OperationalLimits) -> GridStateClass:
    if result.unserved_mw > UNSERVED_EPS_MW:
        return GridStateClass.Class3
    vm = result.vm[result.energized]
    ld = result.loading_percent
    if (
        np.any(vm < limits.v_min_second)
        or np.any(vm > limits.v_max_second)
        or np.any(ld > limits.temporary_limit)
    ):
        return GridStateClass.Class2
    if np.any(vm < limits.v_min) or np.any(vm > limits.v_max) or np.any(ld > limits.loading_limit):
        return GridStateClass.Class1
    return GridStateClass.Class0


def economic_dispatch(grid: GridNetwork) -> dict[int, float]:
    """Minimize sum(c_i P_i^2) over dispatchable units subject to P bounds.

    Solved exactly as equal-marginal-cost waterfilling: the total output is
    piecewise linear in the marginal cost, so the balancing marginal cost is
    found on the breakpoint segment and interpolated.
    """
    energized = grid.energized_buses()
    gens = [
        g for g in grid.injections if g.in_service and g.kind in ("generator", "der") and g.bus in energized
    ]
    demand = sum(i.p_mw for i in grid.injections if i.in_service and i.kind == "load" and i.bus in energized)
    if not gens:
        raise DispatchInfeasible("no dispatchable generation", demand)
    lo = np.array([g.p_min for g in gens], dtype=float)
    hi = np.array([g.p_max for g in gens], dtype=float)
    cost = np.array([g.cost for g in gens], dtype=float)
    if np.any(cost < 0):
        raise ValueError("cost coefficients must be non-negative")
    if demand > hi.sum() + 1e-9:
        raise DispatchInfeasible(f"demand {demand:.3f} MW exceeds capability {hi.sum():.3f} MW", demand - hi.sum())
    if demand < lo.sum() - 1e-9:
        raise DispatchInfeasible(f"demand {demand:.3f} MW below minimum output {lo.sum():.3f} MW", demand - lo.sum())

    # zero-cost units run first; a tiny coefficient keeps the breakpoints finite
    cost = np.maximum(cost, 1e-12)

    def output(lam: float) -> np.ndarray:
        return np.clip(lam / (2.0 * cost), lo, hi)

    bps = np.unique(np.concatenate([2 * cost * lo, 2 * cost * hi, [0.0]]))
    totals = np.array([output(b).sum() for b in bps])
    k = int(np.searchsorted(totals, demand - 1e-12))
    if k == 0:
        lam = float(bps[0])
    else:
        k = min(k, len(bps) - 1)
        a, b = bps[k - 1], bps[k]
        ta, tb = totals[k - 1], totals[k]
        lam = float(b if tb == ta else a + (demand - ta) * (b - a) / (tb - ta))
    p = output(lam)
    return {g.id: float(v) for g, v in zip(gens, p)}
