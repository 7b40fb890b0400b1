"""Labeled alert datasets: attack detections plus benign noise, exported as binary and JSON lines."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .unified2 import FIELDS, RECORD_SIZE, AlertRecord, ip_bytes, ip_text, serialize_record

# signature namespace: 1000-1999 benign, 2000-2999 attack propagation, 3000-3999 FDI/OT
SIGNATURES = {
    "benign-ping": 1001,
    "benign-retransmit": 1002,
    "benign-login-failure": 1003,
    "scan": 2001,
    "exploit-attempt": 2002,
    "exploit-success": 2003,
    "exploit-failure": 2004,
    "install": 2005,
    "c2-beacon": 2006,
    "c2-command": 2007,
    "fdi-injection": 3001,
    "ot-breaker": 3002,
    "ot-tap": 3003,
    "ot-der": 3004,
}
CLASSIFICATION = {"benign": 3, "recon": 1, "exploit": 2, "c2": 4, "grid": 5}
PROTOCOLS = {"icmp": 1, "tcp": 6, "udp": 17}
GENERATOR_ID = 1
DEFAULT_EPOCH = 1_704_067_200  # 2024-01-01T00:00:00Z
BENIGN_KINDS = (("benign-ping", "icmp", 8, 0), ("benign-retransmit", "tcp", 49152, 2404), ("benign-login-failure", "tcp", 49153, 22))


class AlertValidationError(ValueError):
    pass


def _class_of(signature: int) -> int:
    if signature < 2000:
        return CLASSIFICATION["benign"]
    if signature == SIGNATURES["scan"]:
        return CLASSIFICATION["recon"]
    if signature in (SIGNATURES["c2-beacon"], SIGNATURES["c2-command"], SIGNATURES["install"]):
        return CLASSIFICATION["c2"]
    if signature >= 3000:
        return CLASSIFICATION["grid"]
    return CLASSIFICATION["exploit"]


@dataclass
class AlertEvent:
    """Anything an IDS sensor raises: endpoints, signature, time and ground truth."""

    t: float
    sensor: int
    src_ip: str | None
    dst_ip: str | None
    signature_id: int
    label: str = "attack"
    provenance: dict = field(default_factory=dict)
    protocol: str = "tcp"
    sport: int = 0
    dport: int = 0
    blocked: bool = False
    vlan: int = 0
    priority: int | None = None


@dataclass
class LabeledDataset:
    records: list[AlertRecord] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    provenance: list[dict] = field(default_factory=list)
    seed: int = 0
    scenario_hash: str = ""
    sealed: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def counts(self) -> dict[str, int]:
        return {lab: self.labels.count(lab) for lab in ("attack", "benign")}

    def seal(self) -> "LabeledDataset":
        self.sealed = True
        return self


class AlertEmitter:
    """Append-only sink: per-sensor event ids and strictly increasing timestamps."""

    def __init__(self, seed: int = 0, scenario_hash: str = "", epoch: int = DEFAULT_EPOCH):
        self.epoch = int(epoch)
        self.dataset = LabeledDataset(seed=seed, scenario_hash=scenario_hash)
        self._next_id: dict[int, int] = {}
        self._last: dict[int, tuple[int, int]] = {}  # sensor -> (raw, emitted) microseconds

    def emit_alert(self, event: AlertEvent) -> AlertRecord:
        if self.dataset.sealed:
            raise AlertValidationError("dataset is sealed")
        if not event.src_ip or not event.dst_ip:
            raise AlertValidationError("alert event needs both source and destination endpoints")
        if event.label not in ("attack", "benign"):
            raise AlertValidationError(f"unknown label {event.label!r}")
        if event.t < 0 or not math.isfinite(event.t):
            raise AlertValidationError("event time must be finite and non-negative")
        raw = self.epoch * 1_000_000 + int(round(event.t * 1e6))
        stamp = raw
        if event.sensor in self._last:
            last_raw, last_stamp = self._last[event.sensor]
            if raw < last_raw:
                raise AlertValidationError(f"sensor {event.sensor}: event at {event.t} precedes the previous alert")
            stamp = max(raw, last_stamp + 1)  # same clock tick: keep order with the next microsecond
        self._last[event.sensor] = (raw, stamp)
        sec, usec = divmod(stamp, 1_000_000)
        eid = self._next_id.get(event.sensor, 1)
        self._next_id[event.sensor] = eid + 1
        rec = AlertRecord(
            sensor_id=event.sensor,
            event_id=eid,
            event_second=sec,
            event_microsecond=usec,
            signature_id=event.signature_id,
            generator_id=GENERATOR_ID,
            signature_revision=1,
            classification_id=_class_of(event.signature_id),
            priority_id=event.priority or (1 if event.label == "attack" else 3),
            ip_source=ip_bytes(event.src_ip),
            ip_destination=ip_bytes(event.dst_ip),
            sport_itype=event.sport,
            dport_icode=event.dport,
            protocol=PROTOCOLS[event.protocol],
            impact_flag=int(event.label == "attack"),
            impact=int(event.label == "attack"),
            blocked=int(event.blocked),
            vlan_id=event.vlan,
        )
        self.dataset.records.append(rec)
        self.dataset.labels.append(event.label)
        self.dataset.provenance.append(dict(event.provenance))
        return rec

    def emit_all(self, events) -> LabeledDataset:
        """Emit events in time order (ties by sensor, then input order) and seal."""
        order = sorted(range(len(events)), key=lambda i: (events[i].t, events[i].sensor, i))
        for i in order:
            self.emit_alert(events[i])
        return self.dataset.seal()


def generate_benign_noise(activity, rate: float, duration: float, rng, sensors=(0,), t0: float = 0.0, excluded=()) -> list[AlertEvent]:
    """Poisson stream of benign alerts on legitimate endpoint pairs.

    ``activity`` lists (src_ip, dst_ip) pairs of ordinary traffic; pairs
    touching an ``excluded`` address (attacker hosts) are never used.
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    excluded = set(excluded)
    pairs = [p for p in activity if p[0] not in excluded and p[1] not in excluded]
    sensors = list(sensors)
    if rate == 0 or duration <= 0 or not pairs or not sensors:
        return []
    n = int(rng.poisson(rate * duration))
    times = np.sort(rng.uniform(t0, t0 + duration, n))
    kinds = rng.integers(0, len(BENIGN_KINDS), n)
    which = rng.integers(0, len(pairs), n)
    where = rng.integers(0, len(sensors), n)
    out = []
    for k in range(n):
        sig, proto, sport, dport = BENIGN_KINDS[int(kinds[k])]
        src, dst = pairs[int(which[k])]
        out.append(AlertEvent(
            float(times[k]), int(sensors[int(where[k])]), src, dst, SIGNATURES[sig], "benign",
            {"generator": "benign-noise", "noise_id": k}, proto, sport, dport,
        ))
    return out


def scenario_hash(doc) -> str:
    """SHA-256 of the canonical JSON form."""
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def export(dataset: LabeledDataset, out_dir, stem: str = "alerts", formats=("unified2-binary", "jsonl")) -> dict[str, Path]:
    """Write <stem>.u2 (84-byte records), <stem>.jsonl, <stem>.csv and <stem>.meta.json as requested."""
    if not dataset.sealed:
        raise ValueError("dataset must be sealed before export")
    out = Path(out_dir)
    paths: dict[str, Path] = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "unified2-binary" in formats:
            p = out / f"{stem}.u2"
            p.write_bytes(b"".join(serialize_record(r) for r in dataset.records))
            paths["unified2-binary"] = p
        if "jsonl" in formats:
            p = out / f"{stem}.jsonl"
            with open(p, "w", encoding="utf-8", newline="\n") as fh:
                for rec, lab, prov in zip(dataset.records, dataset.labels, dataset.provenance):
                    fh.write(json.dumps({**rec.to_dict(), "label": lab, "provenance": prov}, sort_keys=True) + "\n")
            paths["jsonl"] = p
        if "csv" in formats:
            p = out / f"{stem}.csv"
            with open(p, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                names = [f[0] for f in FIELDS]
                w.writerow(names + ["label"])
                for rec, lab in zip(dataset.records, dataset.labels):
                    row = [getattr(rec, f) for f in names]
                    row = [ip_text(v) if isinstance(v, bytes) else v for v in row]
                    w.writerow(row + [lab])
            paths["csv"] = p
        meta = {
            "seed": dataset.seed,
            "scenario_hash": dataset.scenario_hash,
            "records": len(dataset),
            "counts": dataset.counts(),
            "record_size": RECORD_SIZE,
            "formats": sorted(paths),
        }
        p = out / f"{stem}.meta.json"
        p.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        paths["meta"] = p
    except OSError as e:
        raise OSError(f"export to {out} failed: {e}") from e
    return paths
