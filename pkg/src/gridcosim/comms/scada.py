"""Telecontrol application layer between RTUs and the MTU.

Polling is interrogation driven: every period the MTU sends an
``interrogate`` command, the RTU acknowledges it and answers with one
MeasurementReport per mapped datapoint. Commands travel over a reliable
transport (timeout, bounded retransmits); reports are fire-and-forget.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..power.grid import GridNetwork
from ..power.powerflow import PowerFlowResult
from .devices import CommDevice, Payload, SimMessage
from .network import CommNetwork

COMMAND_TIMEOUT = 0.2
MAX_RETRANSMITS = 3
DATAPOINT_KINDS = ("branch-p", "bus-vm", "bus-p", "breaker", "tap", "der")
COMMANDS = ("interrogate", "open-switch", "close-switch", "set-tap", "set-der")
_COMMAND_KIND = {"open-switch": "breaker", "close-switch": "breaker", "set-tap": "tap", "set-der": "der"}
_UNITS = {"branch-p": "MW", "bus-vm": "pu", "bus-p": "MW", "breaker": "state", "tap": "step", "der": "MW"}


@dataclass(frozen=True)
class Datapoint:
    id: int
    kind: str
    element: int

    def __post_init__(self):
        if self.kind not in DATAPOINT_KINDS:
            raise ValueError(f"unknown datapoint kind {self.kind!r}")

    @property
    def units(self) -> str:
        return _UNITS[self.kind]


def read_datapoint(dp: Datapoint, grid: GridNetwork, result: PowerFlowResult | None) -> float:
    if dp.kind == "branch-p":
        return result.flow_of(dp.element)
    if dp.kind == "bus-vm":
        return result.vm_of(dp.element)
    if dp.kind == "bus-p":
        return float(result.bus_p_mw[result.bus_ids.index(dp.element)])
    if dp.kind == "breaker":
        return 1.0 if grid.branch(dp.element).closed else 0.0
    if dp.kind == "tap":
        return float(grid.branch(dp.element).tap)
    inj = grid.injection(dp.element)
    return inj.p_mw if inj.in_service else 0.0


class RtuApp:
    """Field endpoint bound to grid elements through a datapoint map."""

    def __init__(self, device_id: str, grid: GridNetwork, result: PowerFlowResult | None, datapoints):
        self.device_id = device_id
        self.grid = grid
        self.result = result
        self.datapoints: dict[int, Datapoint] = {dp.id: dp for dp in datapoints}
        self.executed: dict[tuple[str, int], bool] = {}
        self.dirty = False
        self.reports_sent = 0

    def on_message(self, net: CommNetwork, dev: CommDevice, msg: SimMessage, t: float) -> None:
        p = msg.payload
        if p.kind != "ControlCommand":
            return
        key = (msg.src_ip, msg.seq)
        if key in self.executed:
            ok = self.executed[key]
        else:
            ok = self.execute(p)
            self.executed[key] = ok
        net.send(dev.id, msg.src_ip, Payload("Ack", datapoint=p.datapoint, command=p.command, ok=ok), t, seq=msg.seq)
        if p.command == "interrogate" and ok:
            for dp_id in sorted(self.datapoints):
                dp = self.datapoints[dp_id]
                value = read_datapoint(dp, self.grid, self.result)
                net.send(dev.id, msg.src_ip, Payload("MeasurementReport", datapoint=dp_id, value=value, units=dp.units), t, seq=msg.seq)
                self.reports_sent += 1

    def execute(self, p: Payload) -> bool:
        if p.command == "interrogate":
            return True
        dp = self.datapoints.get(p.datapoint)
        if dp is None or _COMMAND_KIND.get(p.command) != dp.kind:
            return False
        if p.command in ("open-switch", "close-switch"):
            self.grid.branch(dp.element).closed = p.command == "close-switch"
        elif p.command == "set-tap":
            br = self.grid.branch(dp.element)
            step = int(p.value)
            if not br.tap_min <= step <= br.tap_max:
                return False
            br.tap = step
        else:
            inj = self.grid.injection(dp.element)
            inj.p_mw = float(min(max(p.value, inj.p_min), inj.p_max)) if inj.p_max > inj.p_min else float(p.value)
        self.dirty = True
        return True


@dataclass
class CommandSession:
    id: int
    dst_ip: str
    payload: Payload
    started: float
    attempts: int = 0
    status: str = "pending"  # pending | acked | nacked | failed
    finished: float | None = None
    messages: list[int] = field(default_factory=list)


class MtuApp:
    """Control-centre endpoint: reliable command sessions and report store."""

    def __init__(self, device_id: str, timeout: float = COMMAND_TIMEOUT, retransmits: int = MAX_RETRANSMITS):
        self.device_id = device_id
        self.timeout = timeout
        self.retransmits = retransmits
        self.sessions: dict[int, CommandSession] = {}
        self.reports: list[tuple[float, str, int, float]] = []
        self.latest: dict[tuple[str, int], float] = {}
        self._next = 0

    def send_command(self, net: CommNetwork, dst_ip: str, payload: Payload, t: float) -> CommandSession:
        s = CommandSession(self._next, dst_ip, payload, t)
        self._next += 1
        self.sessions[s.id] = s
        self._attempt(t, net, s.id)
        return s

    def _attempt(self, t: float, net: CommNetwork, sid: int) -> None:
        s = self.sessions[sid]
        s.attempts += 1
        s.messages.append(net.send(self.device_id, s.dst_ip, s.payload, t, seq=sid))
        net.schedule(t + self.timeout, self._expire, net, sid, s.attempts)

    def _expire(self, t: float, net: CommNetwork, sid: int, attempt: int) -> None:
        s = self.sessions[sid]
        if s.status != "pending" or s.attempts != attempt:
            return
        if s.attempts <= self.retransmits:
            net.trace.add(t, self.device_id, "retransmit", session=sid, attempt=s.attempts + 1)
            self._attempt(t, net, sid)
        else:
            s.status = "failed"
            s.finished = t
            net.trace.add(t, self.device_id, "session-failed", session=sid, dst=s.dst_ip)

    def on_message(self, net: CommNetwork, dev: CommDevice, msg: SimMessage, t: float) -> None:
        p = msg.payload
        if p.kind == "Ack":
            s = self.sessions.get(msg.seq)
            if s is not None and s.status == "pending":
                s.status = "acked" if p.ok else "nacked"
                s.finished = t
        elif p.kind == "MeasurementReport":
            self.reports.append((t, msg.src_ip, p.datapoint, p.value))
            self.latest[(msg.src_ip, p.datapoint)] = p.value

    def reports_from(self, ip: str, since: float = 0.0, until: float = float("inf")) -> list[tuple[float, str, int, float]]:
        return [r for r in self.reports if r[1] == ip and since <= r[0] < until]


def bind_rtu(net: CommNetwork, rtu: str, grid: GridNetwork, result: PowerFlowResult | None, datapoints) -> RtuApp:
    app = RtuApp(rtu, grid, result, datapoints)
    net.apps[rtu] = app
    return app


def bind_mtu(net: CommNetwork, mtu: str) -> MtuApp:
    app = net.apps.get(mtu)
    if not isinstance(app, MtuApp):
        app = MtuApp(mtu)
        net.apps[mtu] = app
    return app


def rtu_poll_cycle(
    net: CommNetwork,
    rtu: str,
    mtu: str,
    grid: GridNetwork,
    result: PowerFlowResult | None,
    datapoints,
    period: float,
    cycles: int = 1,
    t0: float = 0.0,
) -> MtuApp:
    """Bind the endpoints and schedule ``cycles`` interrogations ``period`` apart."""
    if period <= 0:
        raise ValueError("poll period must be positive")
    rtu_app = net.apps.get(rtu)
    if isinstance(rtu_app, RtuApp):
        rtu_app.grid, rtu_app.result = grid, result
        rtu_app.datapoints = {dp.id: dp for dp in datapoints}
    else:
        bind_rtu(net, rtu, grid, result, datapoints)
    app = bind_mtu(net, mtu)
    ip = net.devices[rtu].ip
    for k in range(cycles):
        net.schedule(t0 + k * period, _interrogate, net, app, ip)
    return app


def _interrogate(t: float, net: CommNetwork, app: MtuApp, ip: str) -> None:
    app.send_command(net, ip, Payload("ControlCommand", command="interrogate"), t)
