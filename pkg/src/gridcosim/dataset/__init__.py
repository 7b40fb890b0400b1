"""Labeled IDS alert datasets in a fixed-width Unified2-style format."""
from .emitter import (
    SIGNATURES,
    AlertEmitter,
    AlertEvent,
    AlertValidationError,
    LabeledDataset,
    export,
    generate_benign_noise,
    scenario_hash,
)
from .sources import attacker_addresses, game_events, host_addresses, legit_activity, sensor_numbers, trace_events
from .unified2 import (
    FIELDS,
    OFFSETS,
    RECORD_FORMAT,
    RECORD_SIZE,
    AlertRecord,
    FormatError,
    ip_bytes,
    ip_text,
    parse_record,
    parse_stream,
    serialize_record,
)
