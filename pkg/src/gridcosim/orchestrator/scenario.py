"""Scenario files: schema, cross-reference validation and loading."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..attack.scenario import ItScenario, ScenarioError, initialize_scenario
from ..comms.devices import ROLES
from ..comms.scada import DATAPOINT_KINDS, Datapoint
from ..dataset.emitter import scenario_hash
from ..dss.adt import AdtError, AttackDefenseTree, bundled_adt, load_adt
from ..game.engine import GameConfig
from ..power.grid import GridError, GridNetwork, grid_from_dict

ATTACK_MODES = ("none", "masking", "feigning", "ot")
ACCESS_MODES = ("assumed", "propagation")
FORMATS = {"u2": "unified2-binary", "jsonl": "jsonl", "csv": "csv"}
FIELD_ROLES = ("RTU", "IED")
TOP_KEYS = ("name", "seed", "grid", "comms", "mtu", "datapoints", "it", "game", "dss", "attacker", "operator", "dataset")


class ScenarioValidationError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class AttackerConfig:
    enabled: bool = False
    mode: str = "none"
    access: str = "assumed"
    compromised: list[str] = field(default_factory=list)
    start: float = 0.0
    target: dict | None = None
    delta_mw: float = 0.0
    lead: float = 60.0
    ot_budget: int = 200

    @property
    def active(self) -> bool:
        return self.enabled and self.mode != "none"


@dataclass
class OperatorConfig:
    period: float = 1.0
    horizon: float = 900.0
    verify_interval: int = 1
    noise_fraction: float = 0.01
    significance: float = 0.01
    max_bad_data: int = 3
    poll_window: float = 0.5  # fraction of the period reserved for polling

    @property
    def cycles(self) -> int:
        return int(round(self.horizon / self.period))


@dataclass
class DatasetConfig:
    stem: str = "alerts"
    formats: list[str] = field(default_factory=lambda: ["u2", "jsonl"])
    benign_rate: float = 0.02
    fdi_detection: float = 0.05
    ids_sensors: object = "all"


@dataclass
class Scenario:
    name: str
    seed: int
    grid: GridNetwork
    comms: dict
    mtu: str
    datapoints: dict[str, list[Datapoint]]
    it: ItScenario | None
    game: dict | None
    dss: AttackDefenseTree | None
    attacker: AttackerConfig
    operator: OperatorConfig
    dataset: DatasetConfig
    doc: dict
    source: str = ""

    @property
    def hash(self) -> str:
        return scenario_hash(self.doc)

    def device_ip(self, device: str) -> str:
        return next(d["ip"] for d in self.comms["devices"] if d["id"] == device)

    def reporter_of(self, kind: str, element: int) -> str | None:
        """Device that reports datapoint (kind, element), if any."""
        for dev, dps in self.datapoints.items():
            if any(dp.kind == kind and dp.element == element for dp in dps):
                return dev
        return None

    def datapoint_id(self, device: str, kind: str, element: int) -> int | None:
        for dp in self.datapoints.get(device, []):
            if dp.kind == kind and dp.element == element:
                return dp.id
        return None


def bundled_path(kind: str, name: str) -> Path:
    """Path of a bundled grid or scenario file (``kind`` is grids or scenarios)."""
    return Path(str(resources.files("gridcosim.data").joinpath(kind, name.replace("-", "_") + ".json")))


def bundled_scenarios() -> list[str]:
    root = Path(str(resources.files("gridcosim.data").joinpath("scenarios")))
    return sorted(p.stem for p in root.glob("*.json"))


def _resolve(ref, kind: str | None, base: Path | None):
    """Inline dict, bundled name (when ``kind`` is given), or JSON path relative to the scenario file."""
    if isinstance(ref, dict):
        return ref
    p = bundled_path(kind, ref) if kind else None
    if p is None or not p.exists():
        p = Path(ref)
        if not p.is_absolute() and base is not None:
            p = base / p
    with open(p, encoding="utf-8") as fh:
        return json.load(fh)


def _element_ok(kind: str, element, grid: GridNetwork) -> bool:
    if kind in ("bus-p", "bus-vm"):
        return element in grid.bus_ids
    if kind in ("branch-p", "breaker"):
        return any(br.id == element for br in grid.branches)
    if kind == "tap":
        return any(br.id == element for br in grid.transformers)
    return any(inj.id == element for inj in grid.injections)


def _number(doc, key, path, errors, lo=None, positive=False, integer=False):
    if key not in doc:
        return
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
        errors.append(f"{path}.{key}: expected a {'integer' if integer else 'number'}")
    elif positive and not v > 0:
        errors.append(f"{path}.{key}: must be positive")
    elif lo is not None and v < lo:
        errors.append(f"{path}.{key}: must be at least {lo}")


def _check(doc: dict, base: Path | None):
    """All schema and cross-reference errors plus whatever objects could be built."""
    errors: list[str] = []
    built: dict = {}
    if not isinstance(doc, dict):
        return ["$: scenario must be a JSON object"], built
    for key in sorted(set(doc) - set(TOP_KEYS)):
        errors.append(f"$.{key}: unknown key")
    for key in ("seed", "grid", "comms", "mtu", "datapoints"):
        if key not in doc:
            errors.append(f"$.{key}: required")
    if "seed" in doc and (isinstance(doc["seed"], bool) or not isinstance(doc["seed"], int) or doc["seed"] < 0):
        errors.append("$.seed: must be a non-negative integer")

    grid = None
    if "grid" in doc:
        try:
            grid = grid_from_dict(_resolve(doc["grid"], "grids", base))
        except (OSError, json.JSONDecodeError) as e:
            errors.append(f"$.grid: cannot read ({e})")
        except (GridError, KeyError, TypeError) as e:
            errors.append(f"$.grid: {e}")
    built["grid"] = grid

    devices: dict[str, dict] = {}
    comms = doc.get("comms")
    if "comms" in doc and not (isinstance(comms, dict) and isinstance(comms.get("devices"), list)):
        errors.append("$.comms.devices: required list")
        comms = None
    if comms:
        ips = {}
        for i, d in enumerate(comms["devices"]):
            p = f"$.comms.devices[{i}]"
            did = d.get("id")
            if not did:
                errors.append(f"{p}.id: required")
                continue
            if did in devices:
                errors.append(f"{p}.id: duplicate device {did}")
            devices[did] = d
            if d.get("role") not in ROLES:
                errors.append(f"{p}.role: {d.get('role')!r} not in {ROLES}")
            if d.get("role") != "switch":
                if not d.get("ip"):
                    errors.append(f"{p}.ip: required for {d.get('role')}")
                elif d["ip"] in ips:
                    errors.append(f"{p}.ip: {d['ip']} already used by {ips[d['ip']]}")
                else:
                    ips[d["ip"]] = did
        for i, link in enumerate(comms.get("links", [])):
            for end in ("a", "b"):
                if link.get(end) not in devices:
                    errors.append(f"$.comms.links[{i}].{end}: unknown device {link.get(end)}")

    mtu = doc.get("mtu")
    if "mtu" in doc and comms:
        if mtu not in devices:
            errors.append(f"$.mtu: unknown device {mtu}")
        elif devices[mtu].get("role") != "MTU":
            errors.append(f"$.mtu: device {mtu} is not an MTU")

    datapoints: dict[str, list[Datapoint]] = {}
    seen_ids, seen_meas = set(), {}
    for i, e in enumerate(doc.get("datapoints") or []):
        p = f"$.datapoints[{i}]"
        dev, kind, el = e.get("device"), e.get("kind"), e.get("element")
        if comms and dev not in devices:
            errors.append(f"{p}.device: unknown device {dev}")
            continue
        if comms and devices[dev].get("role") not in FIELD_ROLES:
            errors.append(f"{p}.device: {dev} is not a field device")
            continue
        if kind not in DATAPOINT_KINDS:
            errors.append(f"{p}.kind: {kind!r} not in {DATAPOINT_KINDS}")
            continue
        if (dev, e.get("id")) in seen_ids:
            errors.append(f"{p}.id: duplicate datapoint id {e.get('id')} on {dev}")
            continue
        seen_ids.add((dev, e.get("id")))
        if grid is not None and not _element_ok(kind, el, grid):
            errors.append(f"{p}.element: {kind} datapoint references unknown grid element {el}")
            continue
        if (kind, el) in seen_meas:
            errors.append(f"{p}: {kind} {el} already reported by {seen_meas[(kind, el)]}")
            continue
        seen_meas[(kind, el)] = dev
        datapoints.setdefault(dev, []).append(Datapoint(e.get("id"), kind, el))
    for did, d in devices.items():
        if d.get("role") in FIELD_ROLES and did not in datapoints:
            errors.append(f"$.comms.devices[{list(devices).index(did)}]: field device {did} has no datapoints")
    built["datapoints"] = datapoints

    it = None
    if doc.get("it") is not None:
        try:
            it_doc = _resolve(doc["it"], None, base)
            it = initialize_scenario(it_doc)
        except ScenarioError as e:
            errors.extend(f"$.it: {m}" for m in e.errors)
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            errors.append(f"$.it: {e}")
        if it is not None:
            for k, h in enumerate(it_doc.get("hosts", [])):
                p = f"$.it.hosts[{k}]"
                cd = h.get("comm_device")
                if cd is not None and comms:
                    if cd not in devices:
                        errors.append(f"{p}.comm_device: unknown comm device {cd}")
                    elif h.get("role") == "RTU" and devices[cd].get("role") not in FIELD_ROLES:
                        errors.append(f"{p}.comm_device: RTU host linked to non-field device {cd}")
                gd = h.get("grid_device")
                if gd is not None and grid is not None and gd not in grid.bus_ids:
                    errors.append(f"{p}.grid_device: unknown bus {gd}")
    built["it"] = it

    if doc.get("game") is not None:
        if it is None:
            errors.append("$.game: needs an it scenario")
        try:
            GameConfig.from_dict(doc["game"])
        except (TypeError, ValueError, KeyError) as e:
            errors.append(f"$.game: {e}")

    tree = None
    if doc.get("dss") is not None:
        ref = (doc["dss"] or {}).get("tree", "bundled")
        try:
            tree = bundled_adt() if ref == "bundled" else load_adt(_resolve(ref, None, base))
        except AdtError as e:
            errors.extend(f"$.dss.tree: {m}" for m in e.errors)
        except (OSError, json.JSONDecodeError) as e:
            errors.append(f"$.dss.tree: cannot read ({e})")
    built["dss"] = tree

    att = doc.get("attacker") or {}
    unknown = set(att) - set(AttackerConfig.__dataclass_fields__)
    errors.extend(f"$.attacker.{k}: unknown key" for k in sorted(unknown))
    if att.get("mode", "none") not in ATTACK_MODES:
        errors.append(f"$.attacker.mode: {att.get('mode')!r} not in {ATTACK_MODES}")
    if att.get("access", "assumed") not in ACCESS_MODES:
        errors.append(f"$.attacker.access: {att.get('access')!r} not in {ACCESS_MODES}")
    if att.get("access") == "propagation" and it is None:
        errors.append("$.attacker.access: propagation needs an it scenario")
    for k, dev in enumerate(att.get("compromised", [])):
        if comms and dev not in devices:
            errors.append(f"$.attacker.compromised[{k}]: unknown device {dev}")
        elif comms and devices[dev].get("role") not in FIELD_ROLES:
            errors.append(f"$.attacker.compromised[{k}]: {dev} is not a field device")
    if att.get("enabled") and att.get("mode") in ("masking", "feigning"):
        tgt = att.get("target") or {}
        if tgt.get("kind") not in ("branch-p", "bus-p"):
            errors.append("$.attacker.target.kind: must be branch-p or bus-p")
        elif (tgt["kind"], tgt.get("element")) not in seen_meas:
            errors.append(f"$.attacker.target: no datapoint reports {tgt['kind']} {tgt.get('element')}")
        if not att.get("delta_mw"):
            errors.append("$.attacker.delta_mw: must be non-zero")
    _number(att, "start", "$.attacker", errors, lo=0.0)
    _number(att, "lead", "$.attacker", errors, lo=0.0)
    _number(att, "ot_budget", "$.attacker", errors, positive=True, integer=True)

    op = doc.get("operator") or {}
    errors.extend(f"$.operator.{k}: unknown key" for k in sorted(set(op) - set(OperatorConfig.__dataclass_fields__)))
    _number(op, "period", "$.operator", errors, positive=True)
    _number(op, "horizon", "$.operator", errors, positive=True)
    _number(op, "verify_interval", "$.operator", errors, positive=True, integer=True)
    _number(op, "noise_fraction", "$.operator", errors, lo=0.0)
    _number(op, "significance", "$.operator", errors, positive=True)
    _number(op, "max_bad_data", "$.operator", errors, lo=0, integer=True)
    if "poll_window" in op and not (isinstance(op["poll_window"], (int, float)) and 0 < op["poll_window"] < 1):
        errors.append("$.operator.poll_window: must lie in (0, 1)")

    ds = doc.get("dataset") or {}
    errors.extend(f"$.dataset.{k}: unknown key" for k in sorted(set(ds) - set(DatasetConfig.__dataclass_fields__)))
    for k, f in enumerate(ds.get("formats", [])):
        if f not in FORMATS:
            errors.append(f"$.dataset.formats[{k}]: {f!r} not in {tuple(FORMATS)}")
    _number(ds, "benign_rate", "$.dataset", errors, lo=0.0)
    if "fdi_detection" in ds and not (isinstance(ds["fdi_detection"], (int, float)) and 0 <= ds["fdi_detection"] <= 1):
        errors.append("$.dataset.fdi_detection: must lie in [0, 1]")
    sensors = ds.get("ids_sensors", "all")
    if sensors != "all":
        if not isinstance(sensors, list):
            errors.append("$.dataset.ids_sensors: must be \"all\" or a list of IT hosts")
        elif it is not None:
            for k, h in enumerate(sensors):
                if h not in it.hosts:
                    errors.append(f"$.dataset.ids_sensors[{k}]: unknown IT host {h}")
    return errors, built


def _read(path_or_doc):
    if isinstance(path_or_doc, dict):
        return path_or_doc, None, ""
    p = Path(path_or_doc)
    with open(p, encoding="utf-8") as fh:
        return json.load(fh), p.parent, str(p)


def validate_scenario(path_or_doc) -> list[str]:
    """Schema and cross-reference errors, each prefixed by its JSON path; empty when valid."""
    try:
        doc, base, _ = _read(path_or_doc)
    except OSError as e:
        return [f"$: cannot read scenario ({e})"]
    except json.JSONDecodeError as e:
        return [f"$: invalid JSON ({e})"]
    return _check(doc, base)[0]


def load_scenario(path_or_doc, seed: int | None = None) -> Scenario:
    """Validate and build; raises ScenarioValidationError listing every problem."""
    try:
        doc, base, source = _read(path_or_doc)
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioValidationError([f"$: cannot read scenario ({e})"]) from e
    errors, built = _check(doc, base)
    if errors:
        raise ScenarioValidationError(errors)
    doc = dict(doc)
    if seed is not None:
        doc["seed"] = int(seed)
    ds = dict(doc.get("dataset") or {})
    return Scenario(
        name=doc.get("name", "scenario"),
        seed=int(doc["seed"]),
        grid=built["grid"],
        comms=doc["comms"],
        mtu=doc["mtu"],
        datapoints=built["datapoints"],
        it=built["it"],
        game=doc.get("game"),
        dss=built["dss"],
        attacker=AttackerConfig(**(doc.get("attacker") or {})),
        operator=OperatorConfig(**(doc.get("operator") or {})),
        dataset=DatasetConfig(**ds),
        doc=doc,
        source=source,
    )
