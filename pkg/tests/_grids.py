"""Small grid builders shared by the test modules."""
import numpy as np

from gridcosim.power import Branch, Bus, GridNetwork, Injection


def chain(bus_ids, x=0.1, r=0.0, loads=None, rating=100.0, slack=None):
    slack = bus_ids[0] if slack is None else slack
    buses = [Bus(b, "slack" if b == slack else "pq") for b in bus_ids]
    xs = x if isinstance(x, (list, tuple)) else [x] * (len(bus_ids) - 1)
    branches = [
        Branch(k + 1, bus_ids[k], bus_ids[k + 1], r, xs[k], rating_mva=rating) for k in range(len(bus_ids) - 1)
    ]
    inj = [Injection(i + 1, b, p) for i, (b, p) in enumerate((loads or {}).items())]
    return GridNetwork(buses, branches, inj)


def random_grid(rng, n, extra=0, load_scale=1.0, r_ratio=0.3, switchable=True):
    """Random connected grid: a random tree plus ``extra`` chords."""
    buses = [Bus(0, "slack")] + [Bus(i, "pq") for i in range(1, n)]
    edges = []
    for v in range(1, n):
        edges.append((int(rng.integers(0, v)), v))
    present = {frozenset(e) for e in edges}
    tries = 0
    while extra > 0 and tries < 1000:
        tries += 1
        a, b = (int(v) for v in rng.choice(n, 2, replace=False))
        if frozenset((a, b)) in present:
            continue
        present.add(frozenset((a, b)))
        edges.append((a, b))
        extra -= 1
    branches = []
    for k, (a, b) in enumerate(edges):
        x = float(rng.uniform(0.02, 0.12))
        branches.append(Branch(k + 1, a, b, r_ratio * x, x, rating_mva=float(rng.uniform(20, 60)), switchable=switchable))
    inj = []
    for i in range(1, n):
        p = float(rng.uniform(0.5, 4.0)) * load_scale
        inj.append(Injection(i, i, p, q_mvar=0.3 * p))
    return GridNetwork(buses, branches, inj)


def three_bus_ring():
    """Slack feeding a 72-73-74 stretch closed back to the slack (open-ring analog)."""
    buses = [Bus(70, "slack"), Bus(72), Bus(73), Bus(74)]
    branches = [
        Branch(1, 70, 72, 0.0, 0.05),
        Branch(212, 72, 73, 0.0, 0.07793),
        Branch(213, 73, 74, 0.0, 0.1),
        Branch(4, 74, 70, 0.0, 0.05),
    ]
    inj = [Injection(1, 72, 1.1296), Injection(2, 73, 2.5), Injection(3, 74, 1.8)]
    return GridNetwork(buses, branches, inj)


def leaf_line_chain():
    """Slack - 61 - 62 - 63 with bus 63 a leaf fed only by line 62-63."""
    buses = [Bus(60, "slack"), Bus(61), Bus(62), Bus(63)]
    branches = [
        Branch(1, 60, 61, 0.0, 0.05),
        Branch(2, 61, 62, 0.0, 0.05),
        Branch(202, 62, 63, 0.0, 0.125),
    ]
    inj = [Injection(1, 61, 2.0), Injection(2, 62, 3.0), Injection(3, 63, 4.794)]
    return GridNetwork(buses, branches, inj)
