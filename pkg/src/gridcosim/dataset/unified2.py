"""Fixed-width 84-byte IDS alert record (Unified2-style event, big-endian)."""
from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, fields

# (name, width in bytes, struct code); application id and sequence number are not serialized
FIELDS = (
    ("sensor_id", 4, "I"),
    ("event_id", 4, "I"),
    ("event_second", 4, "I"),
    ("event_microsecond", 4, "I"),
    ("signature_id", 4, "I"),
    ("generator_id", 4, "I"),
    ("signature_revision", 4, "I"),
    ("classification_id", 4, "I"),
    ("priority_id", 4, "I"),
    ("ip_source", 16, "16s"),
    ("ip_destination", 16, "16s"),
    ("sport_itype", 2, "H"),
    ("dport_icode", 2, "H"),
    ("protocol", 1, "B"),
    ("impact_flag", 1, "B"),
    ("impact", 1, "B"),
    ("blocked", 1, "B"),
    ("mpls_label", 4, "I"),
    ("vlan_id", 2, "H"),
    ("padding", 2, "H"),
)
RECORD_FORMAT = ">" + "".join(code for _, _, code in FIELDS)
RECORD_SIZE = struct.calcsize(RECORD_FORMAT)
OFFSETS: dict[str, int] = {}
_off = 0
for _name, _width, _ in FIELDS:
    OFFSETS[_name] = _off
    _off += _width
assert RECORD_SIZE == _off == 84
_STRUCT = struct.Struct(RECORD_FORMAT)
_INT_LIMIT = {"I": 2**32, "H": 2**16, "B": 2**8}


class FormatError(ValueError):
    pass


def ip_bytes(addr: str) -> bytes:
    """16-byte address; IPv4 is stored IPv4-mapped (::ffff:a.b.c.d)."""
    ip = ipaddress.ip_address(addr)
    if ip.version == 4:
        ip = ipaddress.IPv6Address(b"\x00" * 10 + b"\xff\xff" + ip.packed)
    return ip.packed


def ip_text(raw: bytes) -> str:
    ip = ipaddress.IPv6Address(raw)
    return str(ip.ipv4_mapped) if ip.ipv4_mapped is not None else str(ip)


@dataclass(frozen=True)
class AlertRecord:
    sensor_id: int = 0
    event_id: int = 0
    event_second: int = 0
    event_microsecond: int = 0
    signature_id: int = 0
    generator_id: int = 0
    signature_revision: int = 0
    classification_id: int = 0
    priority_id: int = 0
    ip_source: bytes = b"\x00" * 16
    ip_destination: bytes = b"\x00" * 16
    sport_itype: int = 0
    dport_icode: int = 0
    protocol: int = 0
    impact_flag: int = 0
    impact: int = 0
    blocked: int = 0
    mpls_label: int = 0
    vlan_id: int = 0
    padding: int = 0

    def __post_init__(self):
        for name, width, code in FIELDS:
            v = getattr(self, name)
            if code == "16s":
                if not isinstance(v, bytes) or len(v) != 16:
                    raise FormatError(f"{name} must be 16 bytes")
            elif not (isinstance(v, int) and 0 <= v < _INT_LIMIT[code]):
                raise FormatError(f"{name}={v!r} does not fit {width} bytes")
        if self.padding != 0:
            raise FormatError("padding must be zero")

    @property
    def timestamp(self) -> tuple[int, int]:
        return self.event_second, self.event_microsecond

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["ip_source"] = ip_text(self.ip_source)
        d["ip_destination"] = ip_text(self.ip_destination)
        return d


def serialize_record(record: AlertRecord) -> bytes:
    return _STRUCT.pack(*(getattr(record, name) for name, _, _ in FIELDS))


def parse_record(raw: bytes) -> AlertRecord:
    if len(raw) != RECORD_SIZE:
        raise FormatError(f"record must be {RECORD_SIZE} bytes, got {len(raw)}")
    values = _STRUCT.unpack(raw)
    if values[-1] != 0:
        raise FormatError("nonzero padding")
    return AlertRecord(*values)


def parse_stream(raw: bytes) -> list[AlertRecord]:
    if len(raw) % RECORD_SIZE:
        raise FormatError(f"stream length {len(raw)} is not a multiple of {RECORD_SIZE}")
    return [parse_record(raw[i:i + RECORD_SIZE]) for i in range(0, len(raw), RECORD_SIZE)]
