"""Discrete-event model of a switched and routed SCADA network.

Frames cross links with ``latency + bits / bandwidth``; every receiving
device holds the frame in a drop-tail FIFO with a deterministic service
time equal to its processing delay. Switches learn MAC addresses and
flood unknown destinations; L3 devices resolve next hops from Dijkstra
routing tables and static ARP tables.
"""
from __future__ import annotations

import dataclasses
import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import kernels
from .devices import (
    BROADCAST,
    DEFAULT_BANDWIDTH,
    DEFAULT_TTL,
    FORWARDING_ROLES,
    CommDevice,
    Interface,
    NetLink,
    Payload,
    SimMessage,
)
from .events import EventQueue, Trace


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class ForwardAction:
    kind: str  # unicast | flood | drop
    ports: tuple[int, ...] = ()
    reason: str = ""


def switch_forward(device: CommDevice, in_port: int, frame: SimMessage) -> ForwardAction:
    """Learn the source MAC, then unicast to a known port or flood."""
    if not device.is_switch:
        raise ValueError(f"{device.id} is not a switch")
    device.mac_table[frame.src_mac] = in_port
    out = device.mac_table.get(frame.dst_mac)
    if out is not None and frame.dst_mac != BROADCAST:
        if out == in_port:
            return ForwardAction("drop", (), "same-port")
        return ForwardAction("unicast", (out,))
    ports = tuple(i.index for i in device.interfaces if i.index != in_port and i.link is not None)
    return ForwardAction("flood", ports)


def route_packet(
    device: CommDevice,
    packet: SimMessage,
    policy: Callable[[str, str], bool] | None = None,
    zone_of: Callable[[str], str | None] | None = None,
) -> ForwardAction:
    """Forwarding decision at a router or firewall; decrements the TTL."""
    packet.ttl -= 1
    if packet.ttl <= 0:
        return ForwardAction("drop", (), "ttl-expired")
    if device.role == "firewall" and policy is not None and zone_of is not None:
        sz, dz = zone_of(packet.src_ip), zone_of(packet.dst_ip)
        if sz is not None and dz is not None and not policy(sz, dz):
            return ForwardAction("drop", (), "policy-deny")
    if packet.dst_ip not in device.routing_table:
        return ForwardAction("drop", (), "no-route")
    return ForwardAction("unicast", ())


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def add(self, a):
        self.parent.setdefault(a, a)

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb, key=repr)] = min(ra, rb, key=repr)
        return True


class FloodStream:
    """Poisson packet stream from an attacker along a fixed device path.

    Arrivals are materialized lazily: a hop is advanced to time ``t`` only
    when a legitimate frame needs that device's queue state, and the
    admitted packets' departures become the next hop's arrivals.
    """

    def __init__(self, net: "CommNetwork", path: list[str], hop_delays: list[float], rate: float, t0: float, t1: float, rng):
        self.net = net
        self.path = path
        self.hop_delays = hop_delays
        self.rate = float(rate)
        self.t0 = t0
        self.t1 = t1
        self.rng = rng
        self.next_send = t0 + (rng.exponential(1.0 / rate) if rate > 0 else math.inf)
        self.pending = [np.empty(0) for _ in path]
        self.sent = 0
        self.dropped = [0] * len(path)
        self.admitted = [0] * len(path)

    def _generate(self, horizon: float) -> np.ndarray:
        out = []
        limit = min(horizon, self.t1)
        while self.next_send <= limit:
            chunk = max(16, int(self.rate * (limit - self.next_send) * 1.1) + 1)
            gaps = self.rng.exponential(1.0 / self.rate, size=chunk)
            times = self.next_send + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
            keep = times[times <= limit]
            out.append(keep)
            if keep.size < times.size:
                self.next_send = float(times[keep.size])
            else:
                self.next_send = float(times[-1] + gaps[-1])
        if not out:
            return np.empty(0)
        arr = np.concatenate(out)
        self.sent += arr.size
        return arr

    def advance(self, hop: int, t: float) -> None:
        if hop == 0:
            sends = self._generate(t - self.hop_delays[0])
            if sends.size:
                self.pending[0] = np.concatenate([self.pending[0], sends + self.hop_delays[0]])
        else:
            self.advance(hop - 1, t)
        pend = self.pending[hop]
        if not pend.size:
            return
        cut = int(np.searchsorted(pend, t, side="right"))
        arr, self.pending[hop] = pend[:cut], pend[cut:]
        if not arr.size:
            return
        dev = self.net.devices[self.path[hop]]
        s = dev.delay()
        start = dev.last_departure
        mask, last = kernels.queue_admit(arr, start, s, dev.buffer_capacity)
        mask = mask.astype(bool)
        adm = arr[mask]
        self.admitted[hop] += int(adm.size)
        self.dropped[hop] += int(arr.size - adm.size)
        dev.last_departure = float(last)
        if hop + 1 < len(self.path) and adm.size:
            k = np.arange(1, adm.size + 1)
            deps = k * s + np.maximum(start, np.maximum.accumulate(adm - (k - 1) * s))
            self.pending[hop + 1] = np.concatenate([self.pending[hop + 1], deps + self.hop_delays[hop + 1]])


@dataclass
class FloodStats:
    sent: int
    dropped: int
    dropped_at_target: int
    arrived_at_target: int
    legit_arrivals: int
    legit_drops: int

    @property
    def loss_fraction(self) -> float:
        """Fraction of flood packets reaching the target that it discarded."""
        return self.dropped_at_target / self.arrived_at_target if self.arrived_at_target else 0.0

    @property
    def legit_loss_fraction(self) -> float:
        return self.legit_drops / self.legit_arrivals if self.legit_arrivals else 0.0


class CommNetwork:
    def __init__(self, name: str = "comms", trace: bool = True):
        self.name = name
        self.devices: dict[str, CommDevice] = {}
        self.links: list[NetLink] = []
        self.queue = EventQueue()
        self.trace = Trace(trace)
        self.policy: Callable[[str, str], bool] | None = None
        self.apps: dict[str, object] = {}
        self.unreachable: dict[str, set[str]] = {}
        self.outcomes: dict[int, str] = {}
        self.messages: dict[int, SimMessage] = {}
        self.rtts: dict[int, float] = {}
        self.deliveries: list[tuple[float, str, SimMessage]] = []
        self.counters: dict[str, dict[str, int]] = {}
        self.floods: list[FloodStream] = []
        self._flood_at: dict[str, list[tuple[FloodStream, int]]] = {}
        self._copies: dict[int, int] = {}
        self._reasons: dict[int, list[str]] = {}
        self._mac_owner: dict[str, tuple[str, int]] = {}
        self._segment: dict[tuple[str, int], object] = {}
        self._ip_owner: dict[str, str] = {}
        self._overlay: dict[str, dict[str, float]] = {}
        self._next_msg = 0
        self._next_mac = 0
        self.finalized = False

    # -- construction ----------------------------------------------------
    def add_device(self, device: CommDevice) -> CommDevice:
        if device.id in self.devices:
            raise TopologyError(f"duplicate device id {device.id}")
        if device.ip:
            if device.ip in self._ip_owner:
                raise TopologyError(f"duplicate IP {device.ip}")
            self._ip_owner[device.ip] = device.id
        self.devices[device.id] = device
        self.counters[device.id] = {"arrivals": 0, "drops": 0}
        self.finalized = False
        return device

    def _new_mac(self) -> str:
        self._next_mac += 1
        k = self._next_mac
        return "02:00:00:%02x:%02x:%02x" % ((k >> 16) & 255, (k >> 8) & 255, k & 255)

    def connect(self, a: str, b: str, bandwidth: float = DEFAULT_BANDWIDTH, latency: float = 0.0) -> NetLink:
        if a == b:
            raise TopologyError("a link needs two distinct devices")
        ends = []
        for d in (a, b):
            dev = self.devices[d]
            iface = Interface(len(dev.interfaces), self._new_mac(), len(self.links))
            dev.interfaces.append(iface)
            self._mac_owner[iface.mac] = (d, iface.index)
            ends.append((d, iface.index))
        link = NetLink(len(self.links), ends[0], ends[1], bandwidth, latency)
        self.links.append(link)
        self.finalized = False
        return link

    def device_by_ip(self, ip: str) -> CommDevice | None:
        d = self._ip_owner.get(ip)
        return self.devices[d] if d else None

    def zone_of_ip(self, ip: str) -> str | None:
        dev = self.device_by_ip(ip)
        return dev.zone if dev else None

    def finalize(self) -> None:
        self._build_segments()
        self._build_arp()
        self.build_routing_tables()
        self.finalized = True

    def _build_segments(self) -> None:
        uf = _UnionFind()
        node_of = {}
        for dev in self.devices.values():
            for iface in dev.interfaces:
                key = ("sw", dev.id) if dev.is_switch else ("if", dev.id, iface.index)
                node_of[(dev.id, iface.index)] = key
                uf.add(key)
        self._l2_adj: dict = {n: [] for n in uf.parent}
        for link in self.links:
            na, nb = node_of[link.a], node_of[link.b]
            if not uf.union(na, nb):
                raise TopologyError(f"layer-2 loop through link {link.id}")
            self._l2_adj[na].append((nb, link.latency))
            self._l2_adj[nb].append((na, link.latency))
        self._node_of = node_of
        self._segment = {k: uf.find(v) for k, v in node_of.items()}
        macs = [i.mac for d in self.devices.values() for i in d.interfaces]
        if len(set(macs)) != len(macs):
            raise TopologyError("duplicate MAC address")

    def _l2_distances(self, start) -> dict:
        dist = {start: 0.0}
        stack = [start]
        while stack:
            u = stack.pop()
            for v, w in self._l2_adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + w
                    stack.append(v)
        return dist

    def _build_arp(self) -> None:
        members: dict[object, list[tuple[str, int]]] = {}
        for (d, i), seg in self._segment.items():
            if not self.devices[d].is_switch:
                members.setdefault(seg, []).append((d, i))
        self._overlay = {d: {} for d, dev in self.devices.items() if not dev.is_switch}
        for seg, ends in members.items():
            for d, i in ends:
                dev = self.devices[d]
                dist = self._l2_distances(self._node_of[(d, i)])
                for d2, i2 in ends:
                    if d2 == d:
                        continue
                    other = self.devices[d2]
                    w = dist[self._node_of[(d2, i2)]]
                    prev = self._overlay[d].get(d2)
                    # parallel segments: keep the cheapest for both cost and ARP
                    if prev is None or w < prev:
                        self._overlay[d][d2] = w
                        dev.arp_table[other.ip] = other.interfaces[i2].mac

    def build_routing_tables(self) -> dict[str, dict[str, str]]:
        """Dijkstra from every destination over the L3 adjacency.

        Only routers and firewalls may be intermediate hops. Each device's
        next hop is the neighbour minimizing link cost plus remaining
        distance, ties to the lowest device id.
        """
        if not self._overlay:
            self._build_segments()
            self._build_arp()
        l3 = sorted(self._overlay)
        self.unreachable = {d: set() for d in l3}
        self.distances: dict[tuple[str, str], float] = {}
        for dev in l3:
            self.devices[dev].routing_table = {}
        for dst in l3:
            dist = self._dijkstra_to(dst)
            dst_ip = self.devices[dst].ip
            for u in l3:
                if u == dst:
                    continue
                best = None
                for v, w in sorted(self._overlay[u].items()):
                    if v not in dist:
                        continue
                    if v != dst and self.devices[v].role not in FORWARDING_ROLES:
                        continue
                    cost = w + dist[v]
                    if best is None or cost < best[0] - 1e-15 * max(1.0, abs(cost)):
                        best = (cost, v)
                if best is None:
                    self.unreachable[u].add(dst_ip)
                else:
                    self.devices[u].routing_table[dst_ip] = best[1]
                    self.distances[(u, dst)] = best[0]
        return {d: dict(self.devices[d].routing_table) for d in l3}

    def _dijkstra_to(self, dst: str) -> dict[str, float]:
        dist = {dst: 0.0}
        heap = [(0.0, dst)]
        done = set()
        while heap:
            du, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u != dst and self.devices[u].role not in FORWARDING_ROLES:
                continue
            for v, w in self._overlay[u].items():
                nd = du + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return dist

    def same_segment(self, a: str, b: str) -> bool:
        sa = {self._segment[(a, i.index)] for i in self.devices[a].interfaces}
        sb = {self._segment[(b, i.index)] for i in self.devices[b].interfaces}
        return bool(sa & sb)

    def segment_of_mac(self, mac: str):
        owner = self._mac_owner.get(mac)
        return None if owner is None else self._segment[owner]

    def path(self, src: str, dst: str) -> list[str] | None:
        """L3 device path following the routing tables."""
        out = [src]
        ip = self.devices[dst].ip
        cur = src
        while cur != dst:
            nxt = self.devices[cur].routing_table.get(ip)
            if nxt is None or len(out) > len(self.devices):
                return None
            out.append(nxt)
            cur = nxt
        return out

    def l2_path(self, src: str, dst: str) -> list[str] | None:
        """Every device (switches included) a frame visits after ``src``."""
        l3 = self.path(src, dst)
        if l3 is None:
            return None
        out = []
        for a, b in zip(l3, l3[1:]):
            out.extend(self._segment_walk(a, b))
        return out

    def _segment_walk(self, a: str, b: str) -> list[str]:
        mac = self.devices[a].arp_table[self.devices[b].ip]
        goal = self._node_of[self._mac_owner[mac]]
        seg = self.segment_of_mac(mac)
        start = next(self._node_of[(a, i.index)] for i in self.devices[a].interfaces if self._segment[(a, i.index)] == seg)
        prev = {start: None}
        stack = [start]
        while stack:
            u = stack.pop()
            for v, _ in self._l2_adj[u]:
                if v not in prev:
                    prev[v] = u
                    stack.append(v)
        nodes = []
        cur = goal
        while cur is not None and cur != start:
            nodes.append(cur[1])
            cur = prev[cur]
        return list(reversed(nodes))

    # -- simulation -------------------------------------------------------
    def _ensure(self):
        if not self.finalized:
            self.finalize()

    def send(self, src: str, dst_ip: str, payload: Payload, t0: float, sport: int = 0, dport: int = 0, seq: int = 0, ttl: int = DEFAULT_TTL) -> int:
        """Schedule an application message; returns its message id."""
        self._ensure()
        dev = self.devices[src]
        msg_id = self._next_msg
        self._next_msg += 1
        msg = SimMessage(msg_id, "", "", dev.ip, dst_ip, ttl, sport, dport, seq, payload, t0)
        self.messages[msg_id] = msg
        self.outcomes[msg_id] = "in-flight"
        self._copies[msg_id] = 1
        self._reasons[msg_id] = []
        self.queue.push(t0, self._originate, src, msg)
        return msg_id

    def ping(self, src: str, dst: str, t0: float, size_bytes: int | None = None) -> int:
        return self.send(src, self.devices[dst].ip, Payload("Ping", size_bytes=size_bytes), t0)

    def schedule(self, t: float, fn: Callable, *args) -> None:
        self.queue.push(t, fn, *args)

    def run(self, until: float | None = None) -> None:
        self._ensure()
        while len(self.queue):
            nt = self.queue.peek_time()
            if until is not None and nt > until:
                break
            t, fn, args = self.queue.pop()
            fn(t, *args)
        if until is not None:
            for stream in self.floods:
                stream.advance(len(stream.path) - 1, until)
            self.queue.now = max(self.queue.now, until)

    @property
    def now(self) -> float:
        return self.queue.now

    def _originate(self, t: float, src: str, msg: SimMessage) -> None:
        self.trace.add(t, src, "send", **msg.summary())
        self._route_out(t, self.devices[src], msg)

    def _route_out(self, t: float, dev: CommDevice, msg: SimMessage) -> None:
        if msg.dst_ip == dev.ip:
            self._deliver(t, dev, msg)
            return
        nh = dev.routing_table.get(msg.dst_ip)
        if nh is None:
            self._copy_gone(t, dev.id, msg, "no-route")
            return
        mac = dev.arp_table.get(self.devices[nh].ip)
        if mac is None:
            self._copy_gone(t, dev.id, msg, "arp-miss")
            return
        seg = self.segment_of_mac(mac)
        out = next((i for i in dev.interfaces if self._segment[(dev.id, i.index)] == seg), None)
        if out is None:
            self._copy_gone(t, dev.id, msg, "arp-unreachable")
            return
        msg.src_mac = out.mac
        msg.dst_mac = mac
        self._transmit(t, dev.id, out.index, msg)

    def _transmit(self, t: float, dev_id: str, port: int, msg: SimMessage) -> None:
        iface = self.devices[dev_id].interfaces[port]
        link = self.links[iface.link]
        odev, oport = link.other(dev_id, port)
        msg.path_latency += link.latency
        self.queue.push(t + link.transfer_time(msg.payload.bits), self._arrive, odev, oport, msg)

    def _advance_floods(self, dev_id: str, t: float) -> None:
        for stream, hop in self._flood_at.get(dev_id, ()):
            stream.advance(hop, t)

    def _arrive(self, t: float, dev_id: str, port: int, msg: SimMessage) -> None:
        dev = self.devices[dev_id]
        if not dev.is_switch and msg.dst_mac != BROADCAST and msg.dst_mac not in dev.macs:
            self.trace.add(t, dev_id, "filtered", id=msg.msg_id)
            self._copy_gone(t, dev_id, msg, None)
            return
        self._advance_floods(dev_id, t)
        self.counters[dev_id]["arrivals"] += 1
        if dev.occupancy(t) >= dev.buffer_capacity:
            self.counters[dev_id]["drops"] += 1
            self.trace.add(t, dev_id, "loss", id=msg.msg_id, reason="buffer-overflow")
            self._copy_gone(t, dev_id, msg, "buffer-overflow")
            return
        dep = max(t, dev.last_departure) + dev.delay()
        dev.last_departure = dep
        self.queue.push(dep, self._processed, dev_id, port, msg)

    def _processed(self, t: float, dev_id: str, port: int, msg: SimMessage) -> None:
        dev = self.devices[dev_id]
        if dev.is_switch:
            act = switch_forward(dev, port, msg)
            if act.kind == "drop" or not act.ports:
                self._copy_gone(t, dev_id, msg, act.reason or "no-port")
                return
            if act.kind == "flood":
                self.trace.add(t, dev_id, "flood", id=msg.msg_id, ports=list(act.ports))
                self._copies[msg.msg_id] += len(act.ports) - 1
            for k, p in enumerate(act.ports):
                self._transmit(t, dev_id, p, msg if k == 0 else dataclasses.replace(msg))
            return
        if msg.dst_ip == dev.ip:
            self._deliver(t, dev, msg)
            return
        if dev.attacker:
            self.trace.add(t, dev_id, "intercepted", **msg.summary())
            self._copy_gone(t, dev_id, msg, "intercepted")
            return
        if dev.role not in FORWARDING_ROLES:
            self._copy_gone(t, dev_id, msg, "not-for-me")
            return
        act = route_packet(dev, msg, self.policy, self.zone_of_ip)
        if act.kind == "drop":
            self._copy_gone(t, dev_id, msg, act.reason)
            return
        msg.hops += 1
        self.trace.add(t, dev_id, "forward", id=msg.msg_id, ttl=msg.ttl)
        self._route_out(t, dev, msg)

    def _copy_gone(self, t: float, dev_id: str, msg: SimMessage, reason: str | None) -> None:
        mid = msg.msg_id
        self._copies[mid] -= 1
        if reason:
            self._reasons[mid].append(reason)
        if self._copies[mid] <= 0 and self.outcomes[mid] == "in-flight":
            why = self._reasons[mid][0] if self._reasons[mid] else "no-receiver"
            self.outcomes[mid] = "dropped:" + why
            self.trace.add(t, dev_id, "drop", reason=why, **msg.summary())

    def _deliver(self, t: float, dev: CommDevice, msg: SimMessage) -> None:
        mid = msg.msg_id
        self._copies[mid] -= 1
        if self.outcomes[mid] != "in-flight":
            return
        self.outcomes[mid] = "delivered"
        self.trace.add(t, dev.id, "deliver", delay=t - msg.created, **msg.summary())
        self.deliveries.append((t, dev.id, msg))
        kind = msg.payload.kind
        if kind == "Ping":
            self.send(dev.id, msg.src_ip, Payload("PingReply", size_bytes=msg.payload.size_bytes), t, seq=mid)
        elif kind == "PingReply":
            self.rtts[msg.seq] = t - self.messages[msg.seq].created
        app = self.apps.get(dev.id)
        if app is not None:
            app.on_message(self, dev, msg, t)

    # -- attacks -----------------------------------------------------------
    def add_flood(self, attacker: str, target: str, rate: float, t0: float, duration: float, rng, size_bytes: int = 64) -> FloodStream:
        self._ensure()
        hops = self.l2_path(attacker, target)
        if hops is None:
            raise TopologyError(f"no route from {attacker} to {target}")
        bits = 8 * size_bytes
        chain = [attacker] + hops
        delays = []
        for a, b in zip(chain, chain[1:]):
            delays.append(min(link.transfer_time(bits) for link in self.links if {link.a[0], link.b[0]} == {a, b}))
        stream = FloodStream(self, hops, delays, rate, t0, t0 + duration, rng)
        self.floods.append(stream)
        for k, d in enumerate(hops):
            self._flood_at.setdefault(d, []).append((stream, k))
        return stream

    def flood_stats(self, stream: FloodStream) -> FloodStats:
        target = stream.path[-1]
        c = self.counters[target]
        arrived = stream.admitted[-1] + stream.dropped[-1]
        return FloodStats(stream.sent, sum(stream.dropped), stream.dropped[-1], arrived, c["arrivals"], c["drops"])

    # -- export ------------------------------------------------------------
    def outcome_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.outcomes.values():
            key = v.split(":")[0]
            out[key] = out.get(key, 0) + 1
        return out


def network_from_dict(doc: dict, trace: bool = True) -> CommNetwork:
    """Build a network from ``devices[]`` and ``links[]`` of a scenario topology."""
    net = CommNetwork(doc.get("name", "comms"), trace=trace)
    for d in doc["devices"]:
        net.add_device(
            CommDevice(
                id=d["id"],
                role=d["role"],
                zone=d.get("zone", "scada"),
                ip=d.get("ip"),
                buffer_capacity=d.get("buffer_capacity", 64),
                processing_delay=d.get("processing_delay"),
                attacker=d.get("attacker", False),
            )
        )
    for link in doc.get("links", []):
        net.connect(link["a"], link["b"], link.get("bandwidth", DEFAULT_BANDWIDTH), link.get("latency", 0.0))
    net.finalize()
    return net
