"""AC (Newton-Raphson) and DC power flow on the energized island."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridNetwork

AC_TOLERANCE = 1e-8
AC_MAX_ITER = 30


class PowerFlowError(RuntimeError):
    """Structured power-flow failure; ``buses`` names the affected buses."""

    def __init__(self, message: str, buses: list[int] | None = None):
        super().__init__(message)
        self.buses = list(buses or [])


@dataclass
class PowerFlowResult:
    mode: str
    converged: bool
    iterations: int
    bus_ids: list[int]
    vm: np.ndarray
    va: np.ndarray
    energized: np.ndarray
    branch_ids: list[int]
    p_from_mw: np.ndarray
    q_from_mvar: np.ndarray
    p_to_mw: np.ndarray
    q_to_mvar: np.ndarray
    loading_percent: np.ndarray
    slack_p_mw: float
    unserved_mw: float
    max_mismatch: float = 0.0
    bus_p_mw: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def vm_of(self, bus_id: int) -> float:
        return float(self.vm[self.bus_ids.index(bus_id)])

    def va_of(self, bus_id: int) -> float:
        return float(self.va[self.bus_ids.index(bus_id)])

    def loading_of(self, branch_id: int) -> float:
        return float(self.loading_percent[self.branch_ids.index(branch_id)])

    def flow_of(self, branch_id: int) -> float:
        return float(self.p_from_mw[self.branch_ids.index(branch_id)])

    @property
    def max_loading(self) -> float:
        return float(self.loading_percent.max()) if self.loading_percent.size else 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "converged": self.converged,
            "iterations": self.iterations,
            "buses": [
                {"id": b, "vm_pu": float(v), "va_rad": float(a), "energized": bool(e)}
                for b, v, a, e in zip(self.bus_ids, self.vm, self.va, self.energized)
            ],
            "branches": [
                {
                    "id": i,
                    "p_from_mw": float(pf),
                    "q_from_mvar": float(qf),
                    "p_to_mw": float(pt),
                    "q_to_mvar": float(qt),
                    "loading_percent": float(ld),
                }
                for i, pf, qf, pt, qt, ld in zip(
                    self.branch_ids, self.p_from_mw, self.q_from_mvar, self.p_to_mw, self.q_to_mvar, self.loading_percent
                )
            ],
            "slack_p_mw": self.slack_p_mw,
            "unserved_mw": self.unserved_mw,
        }


def _specified_injections(grid: GridNetwork):
    """Per-bus specified (P, Q) in MW/MVAr, generation positive."""
    p = {b.id: 0.0 for b in grid.buses}
    q = {b.id: 0.0 for b in grid.buses}
    for inj in grid.injections:
        if not inj.in_service:
            continue
        if inj.kind == "load":
            p[inj.bus] -= inj.p_mw
            q[inj.bus] -= inj.q_mvar
        else:
            p[inj.bus] += inj.p_mw
            q[inj.bus] += inj.q_mvar
    return p, q


def _unserved(grid: GridNetwork, energized: set[int]) -> float:
    return float(
        sum(inj.p_mw for inj in grid.injections if inj.in_service and inj.kind == "load" and inj.bus not in energized and inj.p_mw > 0)
    )


def blackout_result(grid: GridNetwork, mode: str = "AC") -> PowerFlowResult:
    """Result for a grid whose slack feeds nothing: every load is unserved."""
    nb, nl = len(grid.buses), len(grid.branches)
    energized = np.array([b.kind == "slack" for b in grid.buses])
    vm = np.where(energized, grid.slack.vn_pu if mode == "AC" else 1.0, 0.0)
    z = np.zeros(nl)
    return PowerFlowResult(
        mode=mode,
        converged=True,
        iterations=0,
        bus_ids=grid.bus_ids,
        vm=vm,
        va=np.zeros(nb),
        energized=energized,
        branch_ids=[br.id for br in grid.branches],
        p_from_mw=z.copy(),
        q_from_mvar=z.copy(),
        p_to_mw=z.copy(),
        q_to_mvar=z.copy(),
        loading_percent=z.copy(),
        slack_p_mw=0.0,
        unserved_mw=_unserved(grid, {grid.slack.id}),
        bus_p_mw=np.zeros(nb),
    )


def build_ybus(grid: GridNetwork, island: list[int]) -> np.ndarray:
    """Complex bus admittance matrix (per unit) restricted to ``island``."""
    pos = {b: i for i, b in enumerate(island)}
    n = len(island)
    Y = np.zeros((n, n), dtype=complex)
    for br in grid.branches:
        if not br.closed or br.from_bus not in pos or br.to_bus not in pos:
            continue
        f, t = pos[br.from_bus], pos[br.to_bus]
        y = 1.0 / complex(br.r, br.x)
        sh = 0.5j * br.b
        tap = br.ratio
        Y[f, f] += (y + sh) / tap**2
        Y[t, t] += y + sh
        Y[f, t] -= y / tap
        Y[t, f] -= y / tap
    return Y


def run_power_flow(grid: GridNetwork, mode: str = "AC", on_isolated_slack: str = "raise") -> PowerFlowResult:
    """Solve the energized island of ``grid``.

    Parameters
    ----------
    mode
        ``"AC"`` for full Newton-Raphson from a flat start, ``"DC"`` for the
        linear angle model ``B' theta = P``.
    on_isolated_slack
        ``"raise"`` raises :class:`PowerFlowError` when the slack has no
        closed branch; ``"blackout"`` returns :func:`blackout_result`.
    """
    mode = mode.upper()
    if mode not in ("AC", "DC"):
        raise ValueError(f"unknown power-flow mode {mode!r}")
    energized = grid.energized_buses()
    if len(energized) == 1 and len(grid.buses) > 1:
        if on_isolated_slack == "blackout":
            return blackout_result(grid, mode)
        others = sorted(b for b in grid.bus_ids if b not in energized)
        raise PowerFlowError("slack bus is isolated; admittance matrix is singular", others)
    if mode == "DC":
        return _solve_dc(grid, energized)
    return _solve_ac(grid, energized)


def _solve_dc(grid: GridNetwork, energized: set[int]) -> PowerFlowResult:
    island = [b for b in grid.bus_ids if b in energized]
    pos = {b: i for i, b in enumerate(island)}
    n = len(island)
    slack = pos[grid.slack.id]
    B = np.zeros((n, n))
    for br in grid.branches:
        if br.closed and br.from_bus in pos and br.to_bus in pos:
            f, t = pos[br.from_bus], pos[br.to_bus]
            b = 1.0 / br.x
            B[f, f] += b
            B[t, t] += b
            B[f, t] -= b
            B[t, f] -= b
    p_spec, _ = _specified_injections(grid)
    P = np.array([p_spec[b] for b in island]) / grid.base_mva
    keep = [i for i in range(n) if i != slack]
    theta = np.zeros(n)
    if keep:
        theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], P[keep])
    p_calc = B @ theta
    nb = len(grid.buses)
    va = np.zeros(nb)
    vm = np.zeros(nb)
    en_mask = np.zeros(nb, dtype=bool)
    bus_p = np.zeros(nb)
    for i, b in enumerate(grid.bus_ids):
        if b in pos:
            va[i] = theta[pos[b]]
            vm[i] = 1.0
            en_mask[i] = True
            bus_p[i] = p_calc[pos[b]] * grid.base_mva
    nl = len(grid.branches)
    pf = np.zeros(nl)
    loading = np.zeros(nl)
    for k, br in enumerate(grid.branches):
        if br.closed and br.from_bus in pos and br.to_bus in pos:
            pf[k] = (theta[pos[br.from_bus]] - theta[pos[br.to_bus]]) / br.x * grid.base_mva
            loading[k] = abs(pf[k]) / br.rating_mva * 100.0
    mismatch = float(np.max(np.abs(p_calc[keep] - P[keep]))) if keep else 0.0
    return PowerFlowResult(
        mode="DC",
        converged=True,
        iterations=1,
        bus_ids=grid.bus_ids,
        vm=vm,
        va=va,
        energized=en_mask,
        branch_ids=[br.id for br in grid.branches],
        p_from_mw=pf,
        q_from_mvar=np.zeros(nl),
        p_to_mw=-pf,
        q_to_mvar=np.zeros(nl),
        loading_percent=loading,
        slack_p_mw=float(p_calc[slack] * grid.base_mva),
        unserved_mw=_unserved(grid, energized),
        max_mismatch=mismatch,
        bus_p_mw=bus_p,
    )


def _solve_ac(grid: GridNetwork, energized: set[int]) -> PowerFlowResult:
    island = [b for b in grid.bus_ids if b in energized]
    pos = {b: i for i, b in enumerate(island)}
    kinds = {b.id: b.kind for b in grid.buses}
    setpoint = {b.id: b.vn_pu for b in grid.buses}
    n = len(island)
    Y = build_ybus(grid, island)
    p_spec, q_spec = _specified_injections(grid)
    S_spec = np.array([complex(p_spec[b], q_spec[b]) for b in island]) / grid.base_mva

    slack = pos[grid.slack.id]
    pv = [pos[b] for b in island if kinds[b] == "pv"]
    pq = [pos[b] for b in island if kinds[b] == "pq"]
    pvpq = sorted(pv + pq)
    pq = sorted(pq)

    Vm = np.ones(n)
    Va = np.zeros(n)
    Vm[slack] = setpoint[grid.slack.id]
    for i in pv:
        Vm[i] = setpoint[island[i]]
    V = Vm * np.exp(1j * Va)

    def mismatch(V):
        S = V * np.conj(Y @ V)
        d = S - S_spec
        return np.concatenate([d.real[pvpq], d.imag[pq]])

    F = mismatch(V)
    it = 0
    converged = bool(np.max(np.abs(F), initial=0.0) < AC_TOLERANCE)
    while not converged and it < AC_MAX_ITER:
        it += 1
        Ibus = Y @ V
        dVm = V / np.abs(V)
        dS_dVa = 1j * np.diag(V) @ np.conj(np.diag(Ibus) - Y @ np.diag(V))
        dS_dVm = np.diag(V) @ np.conj(Y @ np.diag(dVm)) + np.conj(np.diag(Ibus)) @ np.diag(dVm)
        J = np.block(
            [
                [dS_dVa.real[np.ix_(pvpq, pvpq)], dS_dVm.real[np.ix_(pvpq, pq)]],
                [dS_dVa.imag[np.ix_(pq, pvpq)], dS_dVm.imag[np.ix_(pq, pq)]],
            ]
        )
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        Va[pvpq] += dx[: len(pvpq)]
        Vm[pq] += dx[len(pvpq):]
        V = Vm * np.exp(1j * Va)
        F = mismatch(V)
        if not np.all(np.isfinite(F)):
            break
        converged = bool(np.max(np.abs(F), initial=0.0) < AC_TOLERANCE)

    S_calc = V * np.conj(Y @ V)
    nb = len(grid.buses)
    vm = np.zeros(nb)
    va = np.zeros(nb)
    en_mask = np.zeros(nb, dtype=bool)
    bus_p = np.zeros(nb)
    for i, b in enumerate(grid.bus_ids):
        if b in pos:
            vm[i] = abs(V[pos[b]])
            va[i] = float(np.angle(V[pos[b]]))
            en_mask[i] = True
            bus_p[i] = S_calc[pos[b]].real * grid.base_mva

    nl = len(grid.branches)
    pf, qf, pt, qt, loading = (np.zeros(nl) for _ in range(5))
    for k, br in enumerate(grid.branches):
        if not (br.closed and br.from_bus in pos and br.to_bus in pos):
            continue
        f, t = pos[br.from_bus], pos[br.to_bus]
        y = 1.0 / complex(br.r, br.x)
        sh = 0.5j * br.b
        tap = br.ratio
        If = (y + sh) / tap**2 * V[f] - y / tap * V[t]
        It = -y / tap * V[f] + (y + sh) * V[t]
        Sf = V[f] * np.conj(If) * grid.base_mva
        St = V[t] * np.conj(It) * grid.base_mva
        pf[k], qf[k], pt[k], qt[k] = Sf.real, Sf.imag, St.real, St.imag
        loading[k] = max(abs(Sf), abs(St)) / br.rating_mva * 100.0

    max_mis = float(np.max(np.abs(F), initial=0.0)) if np.all(np.isfinite(F)) else math.inf
    return PowerFlowResult(
        mode="AC",
        converged=converged,
        iterations=it,
        bus_ids=grid.bus_ids,
        vm=vm,
        va=va,
        energized=en_mask,
        branch_ids=[br.id for br in grid.branches],
        p_from_mw=pf,
        q_from_mvar=qf,
        p_to_mw=pt,
        q_to_mvar=qt,
        loading_percent=loading,
        slack_p_mw=float(S_calc[slack].real * grid.base_mva),
        unserved_mw=_unserved(grid, energized),
        max_mismatch=max_mis,
        bus_p_mw=bus_p,
    )
