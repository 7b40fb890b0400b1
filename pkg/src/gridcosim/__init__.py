"""Smart-grid cyber attack/defense co-simulation.

Subpackages
-----------
power
    Grid model, power flow, state estimation, bad-data detection and the
    operator's corrective algorithms.
comms
    Discrete-event model of the layered SCADA network.
attack
    Multi-stage IT attack propagation and attack-graph generation.
gridattack
    Stealthy false-data injection and the OT action coordinator.
game
    Attacker/defender rounds, sensor placement and complexity scoring.
dataset
    Unified2-style alert records and labeled dataset export.
dss
    Attack-defense tree decision support.
orchestrator
    Scenario loading, the closed operating loop and the CLI.
"""
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
