"""Discrete-event communication network: switching, routing, telecontrol and attacks."""
from .attacks import flood_stats, flood_target, inject_arp_spoof
from .calibrate import Calibration, apply_delays, calibrate, fit_delays, lab_pair, measure_rtt
from .devices import (
    BROADCAST,
    DEFAULT_BANDWIDTH,
    DEFAULT_BUFFER,
    DEFAULT_PROCESSING,
    DEFAULT_TTL,
    PAYLOAD_BYTES,
    ROLES,
    CommDevice,
    Interface,
    NetLink,
    Payload,
    SimMessage,
)
from .events import EventQueue, Trace, TraceEvent
from .network import (
    CommNetwork,
    FloodStats,
    FloodStream,
    ForwardAction,
    TopologyError,
    network_from_dict,
    route_packet,
    switch_forward,
)
from .scada import (
    COMMAND_TIMEOUT,
    MAX_RETRANSMITS,
    CommandSession,
    Datapoint,
    MtuApp,
    RtuApp,
    bind_mtu,
    bind_rtu,
    read_datapoint,
    rtu_poll_cycle,
)
