"""Final-stage grid attacks: stealthy FDI and the OT action coordinator."""
from .fdi import (
    AttackVector,
    FdiInfeasible,
    FdiTarget,
    ProtectedSet,
    StealthReport,
    apply_fdi,
    build_fdi_vector,
    verify_stealth,
)
from .ot import (
    ActionPlan,
    FabricatedImage,
    NoLeverage,
    OtAction,
    OtDevice,
    apply_actions,
    coordinate_ot_attack,
    fabricate_monitoring,
)

__all__ = [name for name in dir() if not name.startswith("_")]
