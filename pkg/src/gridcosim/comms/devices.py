"""Devices, interfaces, links and the layered message envelope."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

ROLES = ("switch", "router", "firewall", "RTU", "MTU", "IED", "workstation", "server")
L3_ROLES = tuple(r for r in ROLES if r != "switch")
FORWARDING_ROLES = ("router", "firewall")

# per-hop processing seconds; switch/host values are fitted by calibration
DEFAULT_PROCESSING = {
    "switch": 85.75e-6,
    "router": 100e-6,
    "firewall": 150e-6,
    "RTU": 282.75e-6,
    "MTU": 85.75e-6,
    "IED": 282.75e-6,
    "workstation": 85.75e-6,
    "server": 85.75e-6,
}
DEFAULT_BUFFER = 64
DEFAULT_BANDWIDTH = 941e6
DEFAULT_TTL = 64
BROADCAST = "ff:ff:ff:ff:ff:ff"

PAYLOAD_KINDS = ("MeasurementReport", "ControlCommand", "Ack", "Ping", "PingReply", "FloodNoise")
PAYLOAD_BYTES = {
    "MeasurementReport": 96,
    "ControlCommand": 64,
    "Ack": 40,
    "Ping": 125,
    "PingReply": 125,
    "FloodNoise": 64,
}


@dataclass
class Interface:
    index: int
    mac: str
    link: int | None = None


@dataclass
class CommDevice:
    id: str
    role: str
    zone: str = "scada"
    ip: str | None = None
    buffer_capacity: int = DEFAULT_BUFFER
    processing_delay: float | None = None
    attacker: bool = False
    interfaces: list[Interface] = field(default_factory=list)
    mac_table: dict[str, int] = field(default_factory=dict)
    arp_table: dict[str, str] = field(default_factory=dict)
    routing_table: dict[str, str] = field(default_factory=dict)
    last_departure: float = 0.0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown device role {self.role!r}")
        if self.role != "switch" and not self.ip:
            raise ValueError(f"device {self.id} ({self.role}) needs an IP address")
        if self.buffer_capacity < 1:
            raise ValueError("buffer capacity must be positive")

    @property
    def is_switch(self) -> bool:
        return self.role == "switch"

    @property
    def macs(self) -> set[str]:
        return {i.mac for i in self.interfaces}

    def delay(self) -> float:
        return DEFAULT_PROCESSING[self.role] if self.processing_delay is None else self.processing_delay

    def occupancy(self, t: float) -> int:
        """Packets in the device (queued or in service) at time ``t``."""
        d = self.delay()
        if self.last_departure <= t or d <= 0:
            return 0
        return int(math.ceil((self.last_departure - t) / d - 1e-9))


@dataclass
class NetLink:
    id: int
    a: tuple[str, int]
    b: tuple[str, int]
    bandwidth: float = DEFAULT_BANDWIDTH
    latency: float = 0.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("link bandwidth must be positive")
        if self.latency < 0:
            raise ValueError("link latency must be non-negative")

    def other(self, dev: str, iface: int) -> tuple[str, int]:
        return self.b if (dev, iface) == self.a else self.a

    def transfer_time(self, bits: float) -> float:
        return self.latency + bits / self.bandwidth


@dataclass(frozen=True)
class Payload:
    kind: str
    datapoint: int | None = None
    value: Any = None
    units: str = ""
    command: str = ""
    size_bytes: int | None = None
    ok: bool = True

    def __post_init__(self):
        if self.kind not in PAYLOAD_KINDS:
            raise ValueError(f"unknown payload kind {self.kind!r}")
        if self.kind == "MeasurementReport" and self.datapoint is None:
            raise ValueError("a measurement report needs a datapoint")
        if self.kind == "ControlCommand" and not self.command:
            raise ValueError("a control command needs a command name")

    @property
    def bits(self) -> int:
        return 8 * (PAYLOAD_BYTES[self.kind] if self.size_bytes is None else self.size_bytes)


@dataclass
class SimMessage:
    """Frame, packet, segment and application payload in one envelope."""

    msg_id: int
    src_mac: str
    dst_mac: str
    src_ip: str
    dst_ip: str
    ttl: int
    sport: int
    dport: int
    seq: int
    payload: Payload
    created: float
    path_latency: float = 0.0
    hops: int = 0

    def __post_init__(self):
        if self.ttl < 0:
            raise ValueError("TTL must be non-negative")

    def summary(self) -> dict:
        return {
            "id": self.msg_id,
            "payload": self.payload.kind,
            "src": self.src_ip,
            "dst": self.dst_ip,
            "seq": self.seq,
            "ttl": self.ttl,
            "dp": self.payload.datapoint,
        }
