"""Attack-defense trees: risk attributes, bottom-up aggregation and countermeasures."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

KINDS = ("attack", "defense")
COMBINATORS = ("AND", "OR")
QUADRANTS = ("Critical", "HighProbLowImpact", "LowProbHighImpact", "Minor")
DEFAULT_IMPACT_REDUCTION = 0.5


class AdtError(ValueError):
    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class AdtNode:
    id: str
    label: str = ""
    kind: str = "attack"
    combinator: str | None = None
    children: list[str] = field(default_factory=list)
    P: float | None = None
    I: float | None = None
    C: float | None = None
    effectiveness: float | None = None  # defense default when the matrix has no entry
    impact_reduction: float = DEFAULT_IMPACT_REDUCTION
    cost: float | None = None  # defense deployment cost


@dataclass(frozen=True)
class MatrixEntry:
    attack: str
    defense: str
    covers: bool = True
    effectiveness: float = 0.0
    impact_reduction: float = DEFAULT_IMPACT_REDUCTION
    cost: float = 1.0


@dataclass
class RelationalMatrix:
    """attack x defense x (coverage flag, effectiveness, cost)."""

    entries: dict[tuple[str, str], MatrixEntry] = field(default_factory=dict)

    def add(self, e: MatrixEntry) -> None:
        if not 0.0 <= e.effectiveness <= 1.0:
            raise AdtError(f"matrix[{e.attack},{e.defense}]: effectiveness outside [0, 1]")
        if not 0.0 <= e.impact_reduction <= 1.0:
            raise AdtError(f"matrix[{e.attack},{e.defense}]: impact reduction outside [0, 1]")
        if e.cost < 0:
            raise AdtError(f"matrix[{e.attack},{e.defense}]: negative cost")
        self.entries[(e.attack, e.defense)] = e

    def get(self, attack: str, defense: str) -> MatrixEntry | None:
        return self.entries.get((attack, defense))

    def defenses(self) -> list[str]:
        return sorted({d for _, d in self.entries})

    def attacks(self) -> list[str]:
        return sorted({a for a, _ in self.entries})

    def covers(self, defense: str) -> set[str]:
        return {a for (a, d), e in self.entries.items() if d == defense and e.covers}

    def cost_of(self, defense: str) -> float:
        return max(e.cost for (_, d), e in self.entries.items() if d == defense)

    def to_list(self) -> list[dict]:
        return [dict(e.__dict__) for _, e in sorted(self.entries.items())]


@dataclass
class AttackDefenseTree:
    nodes: dict[str, AdtNode]
    root: str
    matrix: RelationalMatrix = field(default_factory=RelationalMatrix)
    name: str = ""

    def attack_children(self, nid: str) -> list[str]:
        return [c for c in self.nodes[nid].children if self.nodes[c].kind == "attack"]

    def defenses_of(self, nid: str) -> list[str]:
        return [c for c in self.nodes[nid].children if self.nodes[c].kind == "defense"]

    def is_leaf(self, nid: str) -> bool:
        return self.nodes[nid].kind == "attack" and not self.attack_children(nid)

    def leaves(self) -> list[str]:
        return [n for n in self.postorder() if self.is_leaf(n)]

    def attacks(self) -> list[str]:
        return [n for n in self.postorder() if self.nodes[n].kind == "attack"]

    def postorder(self) -> list[str]:
        out, stack = [], [(self.root, False)]
        while stack:
            nid, done = stack.pop()
            if done:
                out.append(nid)
                continue
            stack.append((nid, True))
            for c in reversed(self.attack_children(nid)):
                stack.append((c, False))
        return out

    def effect(self, attack: str, defense: str) -> tuple[float, float]:
        """(probability effectiveness, impact reduction) of a defense on an attack."""
        e = self.matrix.get(attack, defense)
        if e is not None:
            return e.effectiveness, e.impact_reduction
        d = self.nodes[defense]
        return d.effectiveness or 0.0, d.impact_reduction

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes.values():
            d = {k: v for k, v in n.__dict__.items() if v is not None and v != [] and k != "impact_reduction"}
            if n.kind == "defense":
                d["impact_reduction"] = n.impact_reduction
            nodes.append(d)
        return {"name": self.name, "root": self.root, "nodes": nodes, "matrix": self.matrix.to_list()}


def _validate(tree: AttackDefenseTree) -> list[str]:
    errors = []
    if tree.root not in tree.nodes:
        return [f"root: unknown node {tree.root}"]
    parent: dict[str, str] = {}
    for n in tree.nodes.values():
        if n.kind not in KINDS:
            errors.append(f"nodes[{n.id}].kind: {n.kind!r} not in {KINDS}")
        for c in n.children:
            if c not in tree.nodes:
                errors.append(f"nodes[{n.id}].children: unknown node {c}")
                continue
            if c in parent and tree.nodes[c].kind == "attack":
                errors.append(f"nodes[{c}]: more than one parent ({parent[c]}, {n.id})")
            parent.setdefault(c, n.id)
            if n.kind == "defense":
                errors.append(f"nodes[{n.id}]: defense nodes cannot have children")
    if tree.root in parent:
        errors.append(f"root {tree.root} has a parent")
    if tree.nodes[tree.root].kind != "attack":
        errors.append("root must be an attack node")
    # reachability and cycles (a defense may guard several attack nodes)
    seen, stack = set(), [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            if tree.nodes[nid].kind == "defense":
                continue
            errors.append(f"cycle through {nid}")
            break
        seen.add(nid)
        stack.extend(c for c in tree.nodes[nid].children if c in tree.nodes)
    for nid in sorted(set(tree.nodes) - seen):
        errors.append(f"nodes[{nid}]: not reachable from root")
    if errors:
        return errors
    for nid in tree.postorder():
        n = tree.nodes[nid]
        if tree.is_leaf(nid):
            for attr in ("P", "I"):
                if getattr(n, attr) is None:
                    errors.append(f"nodes[{nid}].{attr}: leaf attribute missing")
            if n.P is not None and not 0.0 <= n.P <= 1.0:
                errors.append(f"nodes[{nid}].P: outside [0, 1]")
            if n.I is not None and not 0.0 <= n.I <= 10.0:
                errors.append(f"nodes[{nid}].I: outside [0, 10]")
            if n.C is not None and n.C <= 0:
                errors.append(f"nodes[{nid}].C: must be positive")
        elif n.combinator not in COMBINATORS:
            errors.append(f"nodes[{nid}].combinator: {n.combinator!r} not in {COMBINATORS}")
    for (a, d) in tree.matrix.entries:
        for ref in (a, d):
            if ref not in tree.nodes:
                errors.append(f"matrix: unknown node {ref}")
    return errors


def load_adt(doc) -> AttackDefenseTree:
    """Build a tree from a dict or JSON path; all problems are reported together."""
    if not isinstance(doc, dict):
        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    errors = []
    nodes = {}
    for raw in doc.get("nodes", []):
        try:
            n = AdtNode(**raw)
        except TypeError as e:
            errors.append(f"nodes[{raw.get('id')}]: {e}")
            continue
        if n.id in nodes:
            errors.append(f"nodes: duplicate id {n.id}")
        nodes[n.id] = n
    matrix = RelationalMatrix()
    for raw in doc.get("matrix", []):
        try:
            matrix.add(MatrixEntry(**raw))
        except (TypeError, AdtError) as e:
            errors.append(str(e))
    if errors:
        raise AdtError(errors)
    tree = AttackDefenseTree(nodes, doc.get("root", ""), matrix, doc.get("name", ""))
    errors = _validate(tree)
    if errors:
        raise AdtError(errors)
    return tree


def bundled_adt() -> AttackDefenseTree:
    """Power-grid compromise tree with thirteen attack techniques and their countermeasures."""
    return load_adt(json.loads(resources.files("gridcosim.data").joinpath("adt.json").read_text()))


def annotate_risk(P, I, C=None, mode: str = "PI"):
    """R = P * I, or P * I / C in PI_over_C mode."""
    if mode == "PI":
        return P * I
    if mode == "PI_over_C":
        if C is None or np.any(np.asarray(C) == 0):
            raise ValueError("cost must be nonzero in PI_over_C mode")
        return P * I / C
    raise ValueError(f"unknown risk mode {mode!r}")


@dataclass
class Assessment:
    P: dict[str, object]
    I: dict[str, object]
    C: dict[str, object]
    R: dict[str, object]
    root: str
    mode: str

    @property
    def root_risk(self):
        return self.R[self.root]

    @property
    def root_probability(self):
        return self.P[self.root]


def propagate_bottom_up(
    tree: AttackDefenseTree,
    mode: str = "PI",
    active=None,
    overrides: dict | None = None,
    disabled=(),
) -> Assessment:
    """Aggregate leaf attributes to the root.

    OR: P = 1 - prod(1 - P_c); AND: P = prod(P_c); I = max over children;
    C = min over OR children, sum over AND children. Each active defense on a
    node multiplies its P by (1 - effectiveness) and its I by
    (1 - impact reduction). ``active=None`` applies no defenses; pass
    "all" for every attached defense. ``overrides`` maps leaf -> {attr: value or
    array} (arrays evaluate many attribute vectors at once). Leaves in
    ``disabled`` have P = 0.
    """
    overrides = overrides or {}
    disabled = set(disabled)
    if active == "all":
        active = {n for n, v in tree.nodes.items() if v.kind == "defense"}
    active = set(active or ())
    P, I, C, R = {}, {}, {}, {}
    for nid in tree.postorder():
        n = tree.nodes[nid]
        if tree.is_leaf(nid):
            o = overrides.get(nid, {})
            p = o.get("P", n.P)
            i = o.get("I", n.I)
            c = o.get("C", n.C if n.C is not None else 1.0)
            if nid in disabled:
                p = 0.0 * np.asarray(p) if np.ndim(p) else 0.0
        else:
            kids = tree.attack_children(nid)
            ps = [P[k] for k in kids]
            if n.combinator == "OR":
                q = 1.0
                for x in ps:
                    q = q * (1.0 - x)
                p = 1.0 - q
                c = _reduce(np.minimum, [C[k] for k in kids])
            else:
                p = 1.0
                for x in ps:
                    p = p * x
                c = sum(C[k] for k in kids)
            i = _reduce(np.maximum, [I[k] for k in kids])
        for d in tree.defenses_of(nid):
            if d in active:
                eff, red = tree.effect(nid, d)
                p = p * (1.0 - eff)
                i = i * (1.0 - red)
        P[nid], I[nid], C[nid] = p, i, c
        R[nid] = annotate_risk(p, i, c, mode)
    return Assessment(P, I, C, R, tree.root, mode)


def _reduce(op, values):
    out = values[0]
    for v in values[1:]:
        out = op(out, v)
    return out


def risk_quadrant(P: float, I: float, p_star: float = 0.5, i_star: float = 5.0) -> str:
    """OWASP-style quadrant; thresholds are closed lower bounds."""
    if not 0.0 <= P <= 1.0 or not 0.0 <= I <= 10.0:
        raise ValueError("P must lie in [0, 1] and I in [0, 10]")
    high_p, high_i = P >= p_star, I >= i_star
    if high_p and high_i:
        return "Critical"
    if high_p:
        return "HighProbLowImpact"
    if high_i:
        return "LowProbHighImpact"
    return "Minor"
