"""Deterministic event queue and the JSON-lines event trace."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable


class EventQueue:
    """Min-heap on (time, insertion sequence)."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0

    def push(self, t: float, fn: Callable, *args) -> None:
        if t < self.now:
            raise ValueError(f"cannot schedule at {t} before current time {self.now}")
        heapq.heappush(self._heap, (t, self._seq, fn, args))
        self._seq += 1

    def pop(self):
        t, _, fn, args = heapq.heappop(self._heap)
        self.now = t
        return t, fn, args

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class TraceEvent:
    t: float
    device: str
    kind: str
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t": self.t, "device": self.device, "kind": self.kind, **self.info}


class Trace:
    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.events: list[TraceEvent] = []

    def add(self, t: float, device: str, kind: str, **info: Any) -> None:
        if self.enabled:
            self.events.append(TraceEvent(t, device, kind, info))

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.events:
                fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self.events)
