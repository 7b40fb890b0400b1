"""Closed-form pieces of the attacker/defender game."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..attack.graph import beta_ttc

INFINITE_WEIGHT = math.inf


def edge_weight(t: float, cost: float, probability: float) -> float:
    """Attacker edge weight t / (C * P); unusable edges get an infinite weight."""
    if cost <= 0 or probability <= 0:
        return INFINITE_WEIGHT
    return t / (cost * probability)


def defender_risk(p, c, q=None) -> float:
    """Sum of P_i * C_i * Q_i; with every Q_i = 1 this is plain expected outage cost."""
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    q = np.ones_like(p) if q is None else np.asarray(q, dtype=float)
    if not (p.shape == c.shape == q.shape):
        raise ValueError("P, C and Q must have equal length")
    return float(np.sum(p * c * q))


def skill_at(round_index: int, initial: float = 0.5, increment: float = 0.02) -> float:
    """Skill in 1-based round ``r``: initial + r * increment, capped at 1."""
    return min(1.0, initial + increment * round_index)


@dataclass
class SuccessHistory:
    """Running success estimate (1 + successes) / (1 + attempts), prior 1."""

    successes: int = 0
    attempts: int = 0

    @property
    def estimate(self) -> float:
        return (1.0 + self.successes) / (1.0 + self.attempts)

    def record(self, success: bool) -> None:
        self.attempts += 1
        self.successes += int(bool(success))


@dataclass
class AttackerState:
    skill: float = 0.5
    history: dict[str, SuccessHistory] = field(default_factory=dict)
    resources: float = 20.0
    path: list = field(default_factory=list)
    goal: frozenset = frozenset()

    def __post_init__(self):
        self.skill = min(max(self.skill, 0.0), 1.0)

    def estimate(self, node: str) -> float:
        h = self.history.get(node)
        return 1.0 if h is None else h.estimate


__all__ = ["beta_ttc", "edge_weight", "defender_risk", "skill_at", "SuccessHistory", "AttackerState", "INFINITE_WEIGHT"]
