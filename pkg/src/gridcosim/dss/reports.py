"""Plot-ready CSV tables and the selected-countermeasure JSON."""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

from .adt import AttackDefenseTree, propagate_bottom_up, risk_quadrant
from .cuts import mincuts, select_countermeasures


def load_reference() -> list[dict]:
    """Reference risk vectors for the bundled tree's thirteen attacks.

    Each row keeps the listed risks next to the P*I values recomputed from the
    row's own probability and impact (the listed risks do not follow P*I).
    """
    doc = json.loads(resources.files("gridcosim.data").joinpath("adt_reference.json").read_text())
    rows = []
    for r in doc["attacks"]:
        rows.append({
            **r,
            "risk": round(r["P"] * r["I"], 10),
            "risk_updated": round(r["P_updated"] * r["I_updated"], 10),
        })
    return rows


def node_table(tree: AttackDefenseTree, mode: str = "PI", active="all") -> list[dict]:
    before = propagate_bottom_up(tree, mode)
    after = propagate_bottom_up(tree, mode, active)
    rows = []
    for nid in tree.attacks():
        rows.append({
            "id": nid,
            "label": tree.nodes[nid].label,
            "P": float(before.P[nid]),
            "I": float(before.I[nid]),
            "R": float(before.R[nid]),
            "P_after": float(after.P[nid]),
            "I_after": float(after.I[nid]),
            "R_after": float(after.R[nid]),
        })
    return rows


def quadrant_table(rows, p_star: float = 0.5, i_star: float = 5.0) -> list[dict]:
    return [
        {
            "id": r["id"],
            "P": r["P"], "I": r["I"], "quadrant": risk_quadrant(r["P"], r["I"], p_star, i_star),
            "P_after": r["P_after"], "I_after": r["I_after"],
            "quadrant_after": risk_quadrant(r["P_after"], r["I_after"], p_star, i_star),
        }
        for r in rows
    ]


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_reports(tree: AttackDefenseTree, out_dir, mode: str = "PI", p_star: float = 0.5, i_star: float = 5.0) -> dict[str, Path]:
    """node_risk.csv, quadrants.csv and countermeasures.json in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = node_table(tree, mode)
    quads = quadrant_table(rows, p_star, i_star)
    cuts = mincuts(tree)
    sel = select_countermeasures(tree, cuts=cuts)
    paths = {"node_risk": out / "node_risk.csv", "quadrants": out / "quadrants.csv", "countermeasures": out / "countermeasures.json"}
    _write_csv(paths["node_risk"], rows)
    _write_csv(paths["quadrants"], quads)
    doc = {"selection": sel.to_dict(), "mincuts": [sorted(c) for c in cuts]}
    paths["countermeasures"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
