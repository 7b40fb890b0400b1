"""IT attack propagation: zoned scenarios, firewall policy, attack graphs and traces."""
from .graph import AttackEdge, AttackGraph, beta_ttc, generate_attack_graph, privilege_monotone
from .propagation import (
    ACTION_KINDS,
    AttackTrace,
    OutcomeReport,
    PropagationResult,
    TraceAction,
    evaluate_outcome,
    lateral_moves,
    propagate_attack,
)
from .scenario import (
    HOST_ROLES,
    KILL_CHAIN,
    PRIVILEGES,
    ZONE_LEVELS,
    FirewallPolicy,
    ItHost,
    ItScenario,
    ScenarioError,
    Subnet,
    Vulnerability,
    initialize_scenario,
    load_catalog,
)
from .scenarios import BENCHMARK_LAYOUT, benchmark_config, benchmark_scenario, bundled_scenario, scenario_config
