"""Closed operating loop: grid physics, telecontrol, operator verification and the attacker.

Each cycle the grid is solved, RTUs answer an interrogation over the
simulated network, the operator runs state estimation with bad-data
detection, classifies the estimated grid and, on a violation, applies the
topology and tap algorithms through telecontrol commands. The attacker
gains RTU access (assumed or through IT propagation) and then falsifies
reports with a stealthy injection vector or drives grid elements directly.
"""
from __future__ import annotations

import copy
import csv
import json
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..attack.propagation import propagate_attack
from ..comms.devices import Payload
from ..comms.network import network_from_dict
from ..comms.scada import MtuApp, RtuApp, bind_mtu, rtu_poll_cycle
from ..dataset.emitter import SIGNATURES, AlertEmitter, AlertEvent, export, generate_benign_noise
from ..dataset.sources import attacker_addresses, game_events, host_addresses, legit_activity, sensor_numbers, trace_events
from ..dss.reports import write_reports
from ..game.engine import GameConfig, run_game
from ..gridattack.fdi import AttackVector, FdiInfeasible, FdiTarget, ProtectedSet, build_fdi_vector
from ..gridattack.ot import ActionPlan, OtDevice, apply_actions, coordinate_ot_attack
from ..power.estimation import (
    FLOW,
    INJECTION,
    BddUndefined,
    Measurement,
    MeasurementSet,
    UnobservableError,
    bad_data_detection,
    build_dc_jacobian,
    wls_state_estimation,
)
from ..power.grid import GridNetwork, Injection
from ..power.operation import GridStateClass, classify_grid_state
from ..power.powerflow import PowerFlowResult
from ..power.topology import ReconfigurationError, optimize_tap_position, reconfigure_topology, solve_with_fallback
from .scenario import FORMATS, Scenario

PHASES = ("solve", "report", "se-bdd", "verify", "respond")
OT_SIGNATURE = {"OpenBreaker": "ot-breaker", "SetTapPosition": "ot-tap", "SetDerOutputPercent": "ot-der", "SetCosPhi": "ot-der"}
COMM_SENSOR_BASE = 1000
_MEAS_KIND = {"branch-p": FLOW, "bus-p": INJECTION}


def substream(seed: int, name: str) -> np.random.Generator:
    """Per-module generator derived from the global seed and a stable module key."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


@dataclass
class OperatorAction:
    cycle: int
    t: float
    kind: str  # topology | tap
    operator_class: str
    true_class: str
    opened: list[int] = field(default_factory=list)
    closed: list[int] = field(default_factory=list)
    taps: dict[int, int] = field(default_factory=dict)
    commands: list[dict] = field(default_factory=list)
    phase_index: int = 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["taps"] = {str(k): v for k, v in self.taps.items()}
        return d


@dataclass
class RunReport:
    scenario: str
    seed: int
    scenario_hash: str
    campaign_offset: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)
    grid_states: list[dict] = field(default_factory=list)
    operator_actions: list[OperatorAction] = field(default_factory=list)
    attacker: dict = field(default_factory=dict)
    verification: list[dict] = field(default_factory=list)
    phases: list[tuple[int, str]] = field(default_factory=list)
    anomalies: list[dict] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)

    def true_classes(self) -> list[str]:
        return [s["true_class"] for s in self.grid_states]

    def summary(self) -> dict:
        classes = self.true_classes()
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "cycles": len(self.grid_states),
            "operator_actions": len(self.operator_actions),
            "true_class_counts": {c: classes.count(c) for c in sorted(set(classes))},
            "bdd_failures": sum(1 for v in self.verification if not v["bdd_passed"]),
            "anomalies": len(self.anomalies),
            "files": dict(self.files),
        }

    def to_dict(self) -> dict:
        """Everything except wall-clock timings, so the file is reproducible."""
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "scenario_hash": self.scenario_hash,
            "campaign_offset": self.campaign_offset,
            "grid_states": self.grid_states,
            "operator_actions": [a.to_dict() for a in self.operator_actions],
            "attacker": self.attacker,
            "verification": self.verification,
            "phases": [list(p) for p in self.phases],
            "anomalies": self.anomalies,
            "files": self.files,
        }


class _Timer:
    def __init__(self, into: dict):
        self.into = into

    def __call__(self, name):
        timer = self

        class _Span:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.into[name] = timer.into.get(name, 0.0) + time.perf_counter() - self.t

        return _Span()


# -- measurement layout -----------------------------------------------------

def _sigmas(grid: GridNetwork, nf: float) -> tuple[dict[int, float], dict[int, float]]:
    """Meter standard deviations: a fraction of full scale (branch rating, largest incident rating)."""
    rating_at = {b: 0.0 for b in grid.bus_ids}
    for br in grid.branches:
        rating_at[br.from_bus] = max(rating_at[br.from_bus], br.rating_mva)
        rating_at[br.to_bus] = max(rating_at[br.to_bus], br.rating_mva)
    return (
        {b: nf * max(r, 1.0) for b, r in rating_at.items()},
        {br.id: nf * max(br.rating_mva, 1.0) for br in grid.branches},
    )


def _layout(grid: GridNetwork, sc: Scenario) -> list[tuple[str, int, str]]:
    """(measurement kind, element, reporting device) for every reported injection and closed-branch flow."""
    energized = grid.energized_buses()
    rows = []
    for b in grid.bus_ids:
        dev = sc.reporter_of("bus-p", b)
        if b in energized and dev:
            rows.append((INJECTION, b, dev))
    for br in grid.branches:
        dev = sc.reporter_of("branch-p", br.id)
        if br.closed and br.from_bus in energized and br.to_bus in energized and dev:
            rows.append((FLOW, br.id, dev))
    return rows


def _image(res: PowerFlowResult) -> PowerFlowResult:
    img = copy.copy(res)
    img.p_from_mw = res.p_from_mw.copy()
    img.bus_p_mw = res.bus_p_mw.copy()
    img.vm = res.vm.copy()
    return img


def _noisy(res: PowerFlowResult, sig_bus, sig_br, nf: float, rng) -> PowerFlowResult:
    img = _image(res)
    if nf > 0:
        img.bus_p_mw = img.bus_p_mw + rng.normal(0.0, [sig_bus[b] for b in res.bus_ids])
        img.p_from_mw = img.p_from_mw + rng.normal(0.0, [sig_br[b] for b in res.branch_ids])
    return img


def _falsify(img: PowerFlowResult, layout, attack: AttackVector) -> PowerFlowResult:
    out = _image(img)
    for i, a in attack.sparse.items():
        kind, el, _ = layout[i]
        if kind == FLOW:
            out.p_from_mw[out.branch_ids.index(el)] += a
        else:  # injection rows count consumption, the datapoint reports net injection
            out.bus_p_mw[out.bus_ids.index(el)] -= a
    return out


# -- operator -----------------------------------------------------------------

def _operator_measurements(grid, sc, mtu: MtuApp, ips, sig_bus, sig_br) -> MeasurementSet:
    entries = []
    for kind, el, dev in _layout(grid, sc):
        dp_kind = "bus-p" if kind == INJECTION else "branch-p"
        key = (ips[dev], sc.datapoint_id(dev, dp_kind, el))
        if key not in mtu.latest:
            continue
        v = float(mtu.latest[key])
        if kind == INJECTION:
            entries.append(Measurement(INJECTION, el, -v, sig_bus[el]))
        else:
            entries.append(Measurement(FLOW, el, v, sig_br[el]))
    return MeasurementSet(entries)


def _estimate(grid, meas: MeasurementSet, significance: float, max_bad: int):
    """WLS with largest-normalized-residual removal; returns (estimate, bdd, removed)."""
    removed = []
    while True:
        H = build_dc_jacobian(grid, meas)
        est = wls_state_estimation(H, meas, significance)
        try:
            bdd = bad_data_detection(est, significance)
        except BddUndefined:
            return est, None, removed
        if bdd.passed or len(removed) >= max_bad:
            return est, bdd, removed
        m = meas.entries[bdd.flagged]
        removed.append({"kind": m.kind, "element": m.element, "value": m.value})
        meas = MeasurementSet([e for i, e in enumerate(meas.entries) if i != bdd.flagged])


def _operator_model(grid: GridNetwork, x_hat: np.ndarray) -> GridNetwork:
    """Grid whose loads reproduce the estimated net consumption at every energized bus.

    Generators stay as configured; each energized non-slack bus gets one load
    equal to the estimated consumption plus its scheduled generation.
    """
    energized = grid.energized_buses()
    slack = grid.slack.id
    buses = [b for b in grid.bus_ids if b in energized and b != slack]
    probe = MeasurementSet([Measurement(INJECTION, b, 0.0, 1.0) for b in buses])
    cons = dict(zip(buses, build_dc_jacobian(grid, probe).mw @ x_hat)) if buses else {}
    gen = {b: 0.0 for b in grid.bus_ids}
    q_load = {b: 0.0 for b in grid.bus_ids}
    for inj in grid.injections:
        if inj.in_service and inj.kind != "load":
            gen[inj.bus] += inj.p_mw
        elif inj.in_service:
            q_load[inj.bus] += inj.q_mvar
    g = grid.copy()
    kept = [inj for inj in g.injections if inj.kind != "load" or inj.bus not in cons]
    next_id = max((inj.id for inj in g.injections), default=0) + 1
    for b in buses:
        kept.append(Injection(next_id, b, float(cons[b]) + gen[b], q_load[b]))
        next_id += 1
    g.injections = kept
    return g


# -- the loop -----------------------------------------------------------------

class _Loop:
    def __init__(self, sc: Scenario, out: Path | None):
        self.sc = sc
        self.out = out
        self.report = RunReport(sc.name, sc.seed, sc.hash)
        self.timer = _Timer(self.report.timings)
        self.grid = sc.grid.copy()
        self.limits = self.grid.limits
        self.net = network_from_dict(sc.comms, trace=False)
        self.mtu = bind_mtu(self.net, sc.mtu)
        self.ips = {d["id"]: d.get("ip") for d in sc.comms["devices"]}
        self.rtus = sorted(sc.datapoints)
        op = sc.operator
        self.sig_bus, self.sig_br = _sigmas(self.grid, op.noise_fraction)
        self.rng_noise = substream(sc.seed, "measurement")
        self.rng_ids = substream(sc.seed, "ids")
        self.events: list[AlertEvent] = []
        self.access: dict[str, float] = {}
        self.attack_cache: dict = {}
        self.ot_done: set[frozenset] = set()
        self.fdi_cycles = 0
        self.res = None
        self.true_class = None
        self.dirty = True
        self.sensors = self._comm_sensors()

    # -- attacker preparation --------------------------------------------------
    def _comm_sensors(self) -> dict[str, int]:
        linked = {}
        if self.sc.it is not None:
            nums = sensor_numbers(self.sc.it)
            for h in sorted(self.sc.it.hosts.values(), key=lambda h: h.id):
                if h.comm_device and h.comm_device not in linked:
                    linked[h.comm_device] = nums[h.id]
        devs = sorted(self.ips)
        return {d: linked.get(d, COMM_SENSOR_BASE + k) for k, d in enumerate(devs)}

    def prepare_attacker(self) -> None:
        sc, att = self.sc, self.sc.attacker
        info: dict = {"enabled": att.enabled, "mode": att.mode, "access_mode": att.access}
        offset = 0.0
        if sc.it is not None:
            with self.timer("propagation"):
                ids = sorted(sc.it.hosts) if sc.dataset.ids_sensors == "all" else list(sc.dataset.ids_sensors)
                prop = propagate_attack(sc.it, seed=substream(sc.seed, "propagation"), sensors=ids)
            reached = {}
            for a in prop.trace.actions:
                host = prop.scenario.hosts[a.host]
                if a.kind == "install" and host.comm_device in self.ips:
                    reached.setdefault(host.comm_device, a.t)
            if att.enabled and att.access == "propagation" and reached:
                offset = max(0.0, min(reached.values()) - att.lead)
            self.trace_events = trace_events(prop.trace, sc.it, self.addresses)
            info["propagation"] = {
                "goals_reached": prop.goals_reached,
                "aborted": prop.aborted,
                "reason": prop.reason,
                "elapsed": prop.trace.elapsed,
                "actions": len(prop.trace),
                "rtu_access": {d: reached[d] for d in sorted(reached)},
            }
            if att.enabled and att.access == "propagation":
                self.access = {d: max(att.start, t - offset) for d, t in reached.items()}
        else:
            self.trace_events = []
        if att.enabled:
            for d in att.compromised:
                self.access[d] = min(self.access.get(d, att.start), att.start)
        info["access"] = {d: self.access[d] for d in sorted(self.access)}
        self.report.campaign_offset = offset
        self.report.attacker = info

    @property
    def addresses(self) -> dict[str, str]:
        if not hasattr(self, "_addresses"):
            self._addresses = host_addresses(self.sc.it) if self.sc.it is not None else {}
        return self._addresses

    def compromised_at(self, t: float) -> frozenset:
        if not self.sc.attacker.active:
            return frozenset()
        return frozenset(d for d, ta in self.access.items() if ta <= t + 1e-12)

    # -- FDI ---------------------------------------------------------------------
    def fdi_vector(self, owned: frozenset):
        """Stealthy vector for the current topology; rows of devices not owned are protected."""
        layout = _layout(self.grid, self.sc)
        topo = tuple(br.closed for br in self.grid.branches)
        key = (topo, owned)
        if key in self.attack_cache:
            return self.attack_cache[key]
        att = self.sc.attacker
        kind = _MEAS_KIND[att.target["kind"]]
        el = att.target["element"]
        idx = next((i for i, (k, e, _) in enumerate(layout) if k == kind and e == el), None)
        result = None
        if idx is None:
            result = (None, layout, "target measurement not in service")
        else:
            meas = MeasurementSet([Measurement(k, e, 0.0, 1.0) for k, e, _ in layout])
            H = build_dc_jacobian(self.grid, meas)
            protected = ProtectedSet(i for i, (_, _, dev) in enumerate(layout) if dev not in owned)
            try:
                vec = build_fdi_vector(H, FdiTarget(idx, float(att.delta_mw)), protected)
                result = (vec, layout, "")
            except FdiInfeasible as e:
                result = (None, layout, f"infeasible: blocked by {len(e.blocking)} protected measurements")
        self.attack_cache[key] = result
        return result

    # -- OT ----------------------------------------------------------------------
    def ot_strike(self, owned: frozenset, cycle: int, t: float) -> None:
        if not owned or owned in self.ot_done:
            return
        self.ot_done.add(owned)
        devices = []
        for d in sorted(owned):
            dps = self.sc.datapoints.get(d, [])
            devices.append(OtDevice(
                d, "field",
                breakers=[dp.element for dp in dps if dp.kind == "breaker"],
                ders=[dp.element for dp in dps if dp.kind == "der"],
                transformers=[dp.element for dp in dps if dp.kind == "tap"],
            ))
        plan = coordinate_ot_attack(self.grid, devices, self.sc.attacker.ot_budget, self.limits)
        entry = {"cycle": cycle, "t": t, "devices": sorted(owned)}
        if isinstance(plan, ActionPlan):
            self.grid = apply_actions(self.grid, plan.actions)
            self.dirty = True
            entry["plan"] = plan.to_dict()
            mtu_ip = self.ips[self.sc.mtu]
            for k, act in enumerate(plan.actions):
                dev = next(d.id for d in devices if d.controls(act))
                self.events.append(AlertEvent(
                    self.campaign(t) + 1e-3 * k, self.sensors[dev], mtu_ip, self.ips[dev],
                    SIGNATURES[OT_SIGNATURE[act.kind]], "attack",
                    {"source": "closed-loop", "cycle": cycle, "action": act.to_dict(), "device": dev},
                    "tcp", 49152, 2404,
                ))
        else:
            entry["no_leverage"] = plan.reason
        self.report.attacker.setdefault("ot", []).append(entry)

    def campaign(self, t: float) -> float:
        return self.report.campaign_offset + t

    # -- one cycle -----------------------------------------------------------------
    def phase(self, cycle: int, name: str) -> int:
        self.report.phases.append((cycle, name))
        return len(self.report.phases) - 1

    def cycle(self, k: int) -> None:
        sc, op = self.sc, self.sc.operator
        t = k * op.period
        t_cmd = t + op.poll_window * op.period
        owned = self.compromised_at(t)
        mode = sc.attacker.mode
        if mode == "ot" and owned:
            self.ot_strike(owned, k, t)

        with self.timer("solve"):
            self.phase(k, "solve")
            if self.dirty:
                self.res = solve_with_fallback(self.grid)
                self.true_class = classify_grid_state(self.res, self.limits)
                self.dirty = False

        with self.timer("report"):
            self.phase(k, "report")
            honest = _noisy(self.res, self.sig_bus, self.sig_br, op.noise_fraction, self.rng_noise)
            falsified, vec = None, None
            if mode in ("masking", "feigning") and owned:
                vec, layout, reason = self.fdi_vector(owned)
                if vec is not None:
                    falsified = _falsify(honest, layout, vec)
                    self.fdi_cycles += 1
                    self.report.attacker["fdi"] = {"vector": vec.to_dict(), "support": [
                        {"kind": layout[i][0], "element": layout[i][1], "device": layout[i][2], "a": a}
                        for i, a in vec.sparse.items()]}
                else:
                    gaps = self.report.attacker.setdefault("fdi_unavailable", [])
                    if not gaps or gaps[-1]["reason"] != reason:
                        gaps.append({"cycle": k, "reason": reason})
            touched = set()
            if vec is not None:
                touched = {layout[i][2] for i in vec.support}
            for dev in self.rtus:
                img = falsified if dev in touched else honest
                rtu_poll_cycle(self.net, dev, sc.mtu, self.grid, img, sc.datapoints[dev], op.period, 1, t0=t)
            self.net.run(until=t_cmd)
            for dev in sorted(touched):
                draw = self.rng_ids.random()
                if draw < sc.dataset.fdi_detection:
                    self.events.append(AlertEvent(
                        self.campaign(t) + 1e-3, self.sensors[dev], self.ips[dev], self.ips[sc.mtu],
                        SIGNATURES["fdi-injection"], "attack",
                        {"source": "closed-loop", "cycle": k, "device": dev, "alpha": vec.alpha},
                        "tcp", 2404, 49152,
                    ))

        state = {"cycle": k, "t": t, "true_class": self.true_class.name, "true_max_loading": round(float(self.res.max_loading), 6)}
        if k % op.verify_interval == 0:
            self.verify_and_respond(k, t, t_cmd, state)
        else:
            state["operator_class"] = None
        self.report.grid_states.append(state)
        self.net.run(until=t + op.period)
        for dev in self.rtus:
            app = self.net.apps.get(dev)
            if isinstance(app, RtuApp) and app.dirty:
                app.dirty = False
                self.dirty = True

    def verify_and_respond(self, k: int, t: float, t_cmd: float, state: dict) -> None:
        sc, op = self.sc, self.sc.operator
        with self.timer("se-bdd"):
            self.phase(k, "se-bdd")
            meas = _operator_measurements(self.grid, sc, self.mtu, self.ips, self.sig_bus, self.sig_br)
            try:
                est, bdd, removed = _estimate(self.grid, meas, op.significance, op.max_bad_data)
            except UnobservableError as e:
                self.report.anomalies.append({"cycle": k, "t": t, "phase": "se-bdd", "error": str(e)})
                state["operator_class"] = None
                return
        with self.timer("verify"):
            self.phase(k, "verify")
            model = _operator_model(self.grid, est.x_hat)
            op_res = solve_with_fallback(model)
            op_class = classify_grid_state(op_res, self.limits)
            state["operator_class"] = op_class.name
            self.report.verification.append({
                "cycle": k,
                "t": t,
                "bdd_passed": bool(bdd is None or bdd.passed),
                "statistic": None if bdd is None else round(float(bdd.statistic), 9),
                "threshold": None if bdd is None else round(float(bdd.threshold), 9),
                "removed": removed,
                "operator_class": op_class.name,
                "operator_max_loading": round(float(op_res.max_loading), 6),
            })
        if op_class >= GridStateClass.Class1:
            with self.timer("respond"):
                self.respond(k, t, t_cmd, model, op_class)

    def respond(self, k, t, t_cmd, model: GridNetwork, op_class) -> None:
        after = model
        try:
            rep = reconfigure_topology(model, self.limits)
            after = rep.grid
        except ReconfigurationError as e:
            self.report.anomalies.append({"cycle": k, "t": t, "phase": "respond", "error": str(e)})
            rep = None
        if rep is not None:
            to_close = sorted(br.id for br in rep.grid.branches if br.closed and not self.grid.branch(br.id).closed)
            to_open = sorted(br.id for br in rep.grid.branches if not br.closed and self.grid.branch(br.id).closed)
            if to_close or to_open:
                idx = self.phase(k, "respond")
                cmds = [self.command("breaker", b, "close-switch", None, t_cmd) for b in to_close]
                cmds += [self.command("breaker", b, "open-switch", None, t_cmd + 1e-3) for b in to_open]
                self.report.operator_actions.append(OperatorAction(
                    k, t, "topology", op_class.name, self.true_class.name, to_open, to_close, {}, cmds, idx))
        tap = optimize_tap_position(after, self.limits)
        if tap.changes:
            new = {tr.id: tr.tap for tr in tap.grid.transformers if tr.tap != self.grid.branch(tr.id).tap}
            if new:
                idx = self.phase(k, "respond")
                cmds = [self.command("tap", tid, "set-tap", pos, t_cmd + 2e-3) for tid, pos in sorted(new.items())]
                self.report.operator_actions.append(OperatorAction(
                    k, t, "tap", op_class.name, self.true_class.name, [], [], new, cmds, idx))

    def command(self, dp_kind: str, element: int, command: str, value, t: float) -> dict:
        dev = self.sc.reporter_of(dp_kind, element)
        if dev is None:
            br = self.grid.branch(element)
            if command == "set-tap":
                br.tap = int(value)
            else:
                br.closed = command == "close-switch"
            self.dirty = True
            return {"command": command, "element": element, "value": value, "via": "manual"}
        dp_id = self.sc.datapoint_id(dev, dp_kind, element)
        payload = Payload("ControlCommand", datapoint=dp_id, value=value, command=command)
        s = self.mtu.send_command(self.net, self.ips[dev], payload, t)
        return {"command": command, "element": element, "value": value, "via": "telecontrol", "device": dev, "session": s.id}

    # -- dataset and files -----------------------------------------------------------
    def finish_commands(self) -> None:
        for a in self.report.operator_actions:
            for c in a.commands:
                if "session" in c:
                    c["status"] = self.mtu.sessions[c["session"]].status

    def game_and_dataset(self) -> None:
        sc = self.sc
        events = list(self.trace_events) + list(self.events)
        if sc.game is not None and sc.it is not None:
            with self.timer("game"):
                doc = dict(sc.game)
                doc.setdefault("seed", int(substream(sc.seed, "game").integers(2**31)))
                res = run_game(GameConfig.from_dict(doc), sc.it)
            outcomes = [r.outcome for r in res.records]
            cx = [r.complexity for r in res.records if r.complexity is not None]
            self.report.attacker["game"] = {
                "rounds": len(res.records),
                "outcomes": {o: outcomes.count(o) for o in sorted(set(outcomes))},
                "mean_complexity": float(np.mean(cx)) if cx else None,
                "alerts": len(res.alerts),
            }
            events += game_events(res.alerts, sc.it, self.addresses)
            if self.out is not None:
                gdir = self.out / "game"
                gdir.mkdir(parents=True, exist_ok=True)
                res.to_jsonl(gdir / "rounds.jsonl")
                self.report.files["game_rounds"] = str(gdir / "rounds.jsonl")
        with self.timer("dataset"):
            mtu_ip = self.ips[sc.mtu]
            activity = []
            excluded = set()
            sensors = sorted(set(self.sensors.values()))
            if sc.it is not None:
                activity += legit_activity(sc.it, self.addresses)
                excluded = attacker_addresses(sc.it, self.addresses)
                sensors = sorted(set(sensors) | set(sensor_numbers(sc.it).values()))
            for dev in self.rtus:
                activity += [(mtu_ip, self.ips[dev]), (self.ips[dev], mtu_ip)]
            duration = self.report.campaign_offset + sc.operator.horizon
            events += generate_benign_noise(
                activity, sc.dataset.benign_rate, duration, substream(sc.seed, "benign"), sensors=sensors, excluded=excluded,
            )
            ds = AlertEmitter(seed=sc.seed, scenario_hash=sc.hash).emit_all(events)
            self.report.attacker["alerts"] = ds.counts()
            if self.out is not None:
                formats = [FORMATS[f] for f in sc.dataset.formats]
                paths = export(ds, self.out / "dataset", sc.dataset.stem, formats)
                for k2, p in sorted(paths.items()):
                    self.report.files[f"dataset_{k2}"] = str(p)
        if sc.dss is not None and self.out is not None:
            with self.timer("dss"):
                for k2, p in sorted(write_reports(sc.dss, self.out / "dss").items()):
                    self.report.files[f"dss_{k2}"] = str(p)

    def write(self) -> None:
        out = self.out
        states = out / "grid_states.csv"
        with open(states, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", "t", "true_class", "operator_class", "true_max_loading"])
            for s in self.report.grid_states:
                w.writerow([s["cycle"], s["t"], s["true_class"], s["operator_class"] or "", s["true_max_loading"]])
        self.report.files["grid_states"] = str(states)
        path = out / "report.json"
        self.report.files["report"] = str(path)
        doc = self.report.to_dict()
        # paths relative to the output directory so reruns elsewhere stay byte-identical
        doc["files"] = {k: Path(v).relative_to(out).as_posix() for k, v in sorted(self.report.files.items())}
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def run_closed_loop(scenario: Scenario, out_dir=None) -> RunReport:
    """Run the operating loop over the scenario horizon; outputs go under ``out_dir`` when given."""
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    loop = _Loop(scenario, out)
    loop.prepare_attacker()
    for k in range(scenario.operator.cycles):
        loop.cycle(k)
    loop.finish_commands()
    loop.report.attacker["fdi_cycles"] = loop.fdi_cycles
    loop.game_and_dataset()
    if out is not None:
        loop.write()
        missing = [p for p in loop.report.files.values() if not Path(p).exists()]
        if missing:
            raise RuntimeError(f"report lists missing files: {missing}")
    loop.report.timings["total"] = time.perf_counter() - t0
    return loop.report


def _batch_one(args):
    path, out = args
    from .scenario import load_scenario

    return run_closed_loop(load_scenario(path), out).summary()


def run_batch(paths, out_dir, workers: int = 2) -> list[dict]:
    """Independent scenarios on a process pool, each in its own output directory."""
    jobs = [(str(p), str(Path(out_dir) / Path(p).stem)) for p in paths]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_batch_one, jobs))
