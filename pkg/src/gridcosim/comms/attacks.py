"""Network-level attack effects: ARP cache poisoning and packet floods."""
from __future__ import annotations

import numpy as np

from .network import CommNetwork, FloodStats, FloodStream


def inject_arp_spoof(net: CommNetwork, attacker: str, victim_ip: str, target: str, t: float = 0.0) -> bool:
    """Point ``target``'s ARP entry for ``victim_ip`` at the attacker's MAC.

    Only works when attacker and target share an L2 segment; otherwise the
    attempt is inert and a warning event is traced.
    """
    net._ensure()
    att, tgt = net.devices[attacker], net.devices[target]
    shared = None
    for iface in att.interfaces:
        seg = net._segment[(attacker, iface.index)]
        if any(net._segment[(target, j.index)] == seg for j in tgt.interfaces):
            shared = iface
            break
    if shared is None:
        net.trace.add(t, attacker, "arp-spoof-inert", victim=victim_ip, target=target)
        return False
    old = tgt.arp_table.get(victim_ip)
    tgt.arp_table[victim_ip] = shared.mac
    net.trace.add(t, attacker, "arp-spoof", victim=victim_ip, target=target, old=old, new=shared.mac)
    return True


def flood_target(
    net: CommNetwork,
    attacker: str,
    target: str,
    rate: float,
    duration: float,
    t0: float = 0.0,
    seed: int | np.random.Generator = 0,
    size_bytes: int = 64,
) -> FloodStream:
    """Start a Poisson flood of ``rate`` packets/s; read results via ``flood_stats``."""
    if rate < 0 or duration < 0:
        raise ValueError("flood rate and duration must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    stream = net.add_flood(attacker, target, rate, t0, duration, rng, size_bytes)
    net.trace.add(t0, attacker, "flood-start", target=target, rate=rate, duration=duration)
    return stream


def flood_stats(net: CommNetwork, stream: FloodStream) -> FloodStats:
    return net.flood_stats(stream)
