"""Repeated attacker/defender game with centrality-guided sensor placement."""
from .centrality import current_flow_betweenness, outage_conductance, place_sensors
from .engine import (
    BUDGET_SCENARIOS,
    DefenderState,
    GameConfig,
    GameResult,
    NoPath,
    RoundRecord,
    attack_complexity,
    attacker_plan_path,
    attempt_compromise,
    complexity_interval,
    host_graph,
    run_game,
    sensor_scores,
    shortest_path,
)
from .formulas import INFINITE_WEIGHT, AttackerState, SuccessHistory, beta_ttc, defender_risk, edge_weight, skill_at

__all__ = [
    "current_flow_betweenness", "outage_conductance", "place_sensors",
    "BUDGET_SCENARIOS", "DefenderState", "GameConfig", "GameResult", "NoPath", "RoundRecord",
    "attack_complexity", "attacker_plan_path", "attempt_compromise", "complexity_interval",
    "host_graph", "run_game", "sensor_scores", "shortest_path",
    "INFINITE_WEIGHT", "AttackerState", "SuccessHistory", "beta_ttc", "defender_risk", "edge_weight", "skill_at",
]
