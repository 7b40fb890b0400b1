"""Mincuts of an attack tree and minimum-cost countermeasure cover."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adt import AdtError, AttackDefenseTree, RelationalMatrix, propagate_bottom_up

EXACT_LIMIT = 20


def _minimal(sets) -> list[frozenset]:
    uniq = sorted(set(sets), key=lambda s: (len(s), sorted(s)))
    out: list[frozenset] = []
    for s in uniq:
        if not any(o <= s for o in out):
            out.append(s)
    return out


def mincuts(tree: AttackDefenseTree) -> list[frozenset]:
    """Minimal leaf sets whose removal makes the root unachievable.

    A leaf is cut by itself; an AND node by cutting any child; an OR node only
    by cutting every child (one cut per child, combined).
    """
    cuts: dict[str, list[frozenset]] = {}
    for nid in tree.postorder():
        if tree.is_leaf(nid):
            cuts[nid] = [frozenset({nid})]
            continue
        kids = tree.attack_children(nid)
        if tree.nodes[nid].combinator == "AND":
            cuts[nid] = _minimal(c for k in kids for c in cuts[k])
        else:
            acc = [frozenset()]
            for k in kids:
                acc = _minimal(a | c for a in acc for c in cuts[k])
            cuts[nid] = acc
    return sorted(cuts[tree.root], key=lambda s: (len(s), sorted(s)))


@dataclass
class Selection:
    defenses: list[str]
    cost: float
    targets: list[str]
    exact: bool
    bound: float = 1.0  # guaranteed cost ratio to the optimum

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _exact_cover(targets, defenses, cover, costs):
    t_idx = {t: i for i, t in enumerate(targets)}
    full = (1 << len(targets)) - 1
    masks = np.array([sum(1 << t_idx[a] for a in cover[d] if a in t_idx) for d in defenses], dtype=np.int64)
    cost = np.asarray([costs[d] for d in defenses], dtype=float)
    n = len(defenses)
    size = 1 << n
    cov = np.zeros(size, dtype=np.int64)
    tot = np.zeros(size)
    cnt = np.zeros(size, dtype=np.int64)
    for j in range(n):
        lo, hi = 1 << j, 1 << (j + 1)
        cov[lo:hi] = cov[:lo] | masks[j]
        tot[lo:hi] = tot[:lo] + cost[j]
        cnt[lo:hi] = cnt[:lo] + 1
    ok = np.flatnonzero(cov == full)
    # cheapest, then fewest defenses, then lowest-index combination
    best = ok[np.lexsort((ok, cnt[ok], np.round(tot[ok], 9)))[0]]
    chosen = [defenses[j] for j in range(n) if best >> j & 1]
    return chosen, float(tot[best])


def _greedy_cover(targets, defenses, cover, costs):
    left = set(targets)
    chosen, total = [], 0.0
    while left:
        d = min(
            (d for d in defenses if d not in chosen and cover[d] & left),
            key=lambda d: (costs[d] / len(cover[d] & left), d),
        )
        chosen.append(d)
        total += costs[d]
        left -= cover[d]
    largest = max(len(cover[d] & set(targets)) for d in defenses)
    return sorted(chosen), total, sum(1.0 / k for k in range(1, largest + 1))


def cover_targets(targets, matrix: RelationalMatrix, costs: dict | None = None) -> Selection:
    """Minimum-cost defense set covering every target attack."""
    targets = sorted(set(targets))
    defenses = matrix.defenses()
    cover = {d: matrix.covers(d) for d in defenses}
    costs = costs or {d: matrix.cost_of(d) for d in defenses}
    missing = [t for t in targets if not any(t in cover[d] for d in defenses)]
    if missing:
        raise AdtError([f"attack {t} is not covered by any defense" for t in missing])
    if not targets:
        return Selection([], 0.0, [], True)
    useful = [d for d in defenses if cover[d] & set(targets)]
    if len(useful) <= EXACT_LIMIT:
        chosen, total = _exact_cover(targets, useful, cover, costs)
        return Selection(chosen, total, targets, True)
    chosen, total, bound = _greedy_cover(targets, useful, cover, costs)
    return Selection(chosen, total, targets, False, bound)


def select_countermeasures(tree: AttackDefenseTree, targets=None, cuts=None) -> Selection:
    """Cheapest defense set that covers ``targets``, or failing that any full mincut.

    Without explicit targets every mincut is tried and the cheapest coverable
    one wins (covering a whole cut blocks the root).
    """
    if targets is not None:
        return cover_targets(targets, tree.matrix)
    best = None
    for cut in cuts if cuts is not None else mincuts(tree):
        try:
            sel = cover_targets(cut, tree.matrix)
        except AdtError:
            continue
        if best is None or (sel.cost, len(sel.defenses), sel.defenses) < (best.cost, len(best.defenses), best.defenses):
            best = sel
    if best is None:
        raise AdtError("no mincut can be covered by the available defenses")
    return best


def cut_blocks_root(tree: AttackDefenseTree, cut) -> bool:
    """True when zeroing the cut's leaves drives the root probability to exactly 0."""
    return float(propagate_bottom_up(tree, disabled=cut).root_probability) == 0.0
