"""Fit per-role processing delays to measured ping round-trip times.

Host pair across one switch: RTT = 4 link transfers + 4 x d0 (switch,
receiver, switch, sender). Control centre to field unit across one switch:
RTT = 4 link transfers + 3 x d0 + d_field.
"""
from __future__ import annotations

from dataclasses import dataclass

from .devices import DEFAULT_BANDWIDTH, PAYLOAD_BYTES, CommDevice
from .network import CommNetwork

HOST_RTT_TARGET = 343e-6
FIELD_RTT_TARGET = 540e-6
FAST_ROLES = ("switch", "workstation", "MTU", "server")
FIELD_ROLES = ("RTU", "IED")


@dataclass
class Calibration:
    delays: dict[str, float]
    host_rtt: float
    field_rtt: float

    def to_dict(self) -> dict:
        return {"delays": dict(self.delays), "host_rtt": self.host_rtt, "field_rtt": self.field_rtt}


def fit_delays(host_rtt=HOST_RTT_TARGET, field_rtt=FIELD_RTT_TARGET, bandwidth=DEFAULT_BANDWIDTH, latency=0.0, ping_bytes=PAYLOAD_BYTES["Ping"]) -> dict[str, float]:
    link = latency + 8 * ping_bytes / bandwidth
    d0 = (host_rtt - 4 * link) / 4
    d_field = field_rtt - 4 * link - 3 * d0
    if d0 <= 0 or d_field <= 0:
        raise ValueError("RTT targets are below the link transfer floor")
    out = {r: d0 for r in FAST_ROLES}
    out.update({r: d_field for r in FIELD_ROLES})
    return out


def apply_delays(net: CommNetwork, delays: dict[str, float]) -> None:
    for dev in net.devices.values():
        if dev.role in delays:
            dev.processing_delay = delays[dev.role]


def lab_pair(far_role: str, delays: dict[str, float] | None = None, bandwidth=DEFAULT_BANDWIDTH, latency=0.0) -> CommNetwork:
    """Two endpoints joined through one switch, as in the lab bench."""
    near_role = "MTU" if far_role in FIELD_ROLES else "workstation"
    net = CommNetwork("lab")
    net.add_device(CommDevice("a", near_role, ip="10.0.0.1"))
    net.add_device(CommDevice("sw", "switch"))
    net.add_device(CommDevice("b", far_role, ip="10.0.0.2"))
    net.connect("a", "sw", bandwidth, latency)
    net.connect("sw", "b", bandwidth, latency)
    net.finalize()
    if delays:
        apply_delays(net, delays)
    return net


def measure_rtt(net: CommNetwork, src: str, dst: str, count: int = 10, spacing: float = 0.01) -> float:
    ids = [net.ping(src, dst, k * spacing) for k in range(count)]
    net.run()
    rtts = [net.rtts[i] for i in ids if i in net.rtts]
    if not rtts:
        raise RuntimeError(f"no ping reply from {dst}")
    return sum(rtts) / len(rtts)


def calibrate(host_rtt=HOST_RTT_TARGET, field_rtt=FIELD_RTT_TARGET, bandwidth=DEFAULT_BANDWIDTH, latency=0.0) -> Calibration:
    delays = fit_delays(host_rtt, field_rtt, bandwidth, latency)
    h = measure_rtt(lab_pair("workstation", delays, bandwidth, latency), "a", "b")
    f = measure_rtt(lab_pair("RTU", delays, bandwidth, latency), "a", "b")
    return Calibration(delays, h, f)
