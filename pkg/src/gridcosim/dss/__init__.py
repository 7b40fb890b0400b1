"""Attack-defense tree decision support: risk propagation, sensitivity, mincuts and countermeasures."""
from .adt import (
    COMBINATORS,
    QUADRANTS,
    AdtError,
    AdtNode,
    Assessment,
    AttackDefenseTree,
    MatrixEntry,
    RelationalMatrix,
    annotate_risk,
    bundled_adt,
    load_adt,
    propagate_bottom_up,
    risk_quadrant,
)
from .cuts import EXACT_LIMIT, Selection, cover_targets, cut_blocks_root, mincuts, select_countermeasures
from .reports import load_reference, node_table, quadrant_table, write_reports
from .sobol import DEFAULT_SAMPLES, SobolResult, sobol_first_order, tree_model
