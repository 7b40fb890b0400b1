import itertools
import json
import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gridcosim.attack import AttackEdge, AttackGraph, benchmark_scenario, bundled_scenario, initialize_scenario
from gridcosim.game import (
    INFINITE_WEIGHT,
    AttackerState,
    GameConfig,
    NoPath,
    SuccessHistory,
    attacker_plan_path,
    attempt_compromise,
    beta_ttc,
    complexity_interval,
    current_flow_betweenness,
    defender_risk,
    edge_weight,
    outage_conductance,
    place_sensors,
    run_game,
    sensor_scores,
    shortest_path,
    skill_at,
)

from oracles import all_simple_paths, cfb_oracle


def _random_connected(rng, n):
    edges = {(i, int(rng.integers(0, i))) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n))):
        a, b = rng.choice(n, size=2, replace=False)
        edges.add((int(max(a, b)), int(min(a, b))))
    return sorted(edges)


def _graph(edges, root="r"):
    # edges: (src host, dst host, time, cost, probability)
    out = []
    nodes = {(root, "admin")}
    for k, (a, b, t, c, p) in enumerate(edges):
        src, dst = (a, "admin" if a == root else "user"), (b, "user")
        nodes |= {src, dst}
        out.append(AttackEdge(src, dst, f"V{k}", p, t, c, 1.0))
    return AttackGraph((root, "admin"), nodes, out)


# ---- closed forms


def test_beta_ttc_spot_values():
    assert beta_ttc(2, 10, 0.4, 0.25) == pytest.approx(5.3, abs=1e-12)
    assert beta_ttc(7, 99, 1.0, 0.3) == 7
    assert beta_ttc(7, 99, 0.0, 1.0) == 0


def test_edge_weight_examples():
    assert edge_weight(1, 1, 1) == 1
    assert edge_weight(4, 2, 0.5) == 4
    assert edge_weight(3, 6, 0.5) == pytest.approx(edge_weight(3, 3, 0.5) / 2)
    assert edge_weight(1, 0, 0.5) == INFINITE_WEIGHT
    assert edge_weight(1, 5, 0) == INFINITE_WEIGHT


def test_risk_examples_and_linearity():
    assert defender_risk([0.5], [100]) == 50
    assert defender_risk([], []) == 0
    p, c, q = [0.2, 0.5, 0.9], [10.0, 30.0, 7.0], [1.0, 1.3, 1.0]
    q2 = list(q)
    q2[1] *= 2
    assert defender_risk(p, c, q2) - defender_risk(p, c, q) == pytest.approx(p[1] * c[1] * q[1])
    assert defender_risk(p, c, [1, 1, 1]) == defender_risk(p, c)
    with pytest.raises(ValueError):
        defender_risk([0.1], [1, 2])


def test_skill_schedule_reaches_one_at_round_25():
    assert skill_at(25) == 1.0
    assert skill_at(24) < 1.0
    assert skill_at(30) == 1.0
    s = [skill_at(r) for r in range(1, 31)]
    assert all(b >= a for a, b in zip(s, s[1:]))


def test_success_estimate_running_ratio():
    h = SuccessHistory()
    assert h.estimate == 1.0
    h.record(True)
    assert h.estimate == 1.0
    h2 = SuccessHistory()
    h2.record(False)
    assert h2.estimate == 0.5


@given(st.lists(st.booleans(), max_size=50))
def test_estimate_stays_in_unit_interval(outcomes):
    h = SuccessHistory()
    for o in outcomes:
        h.record(o)
        assert 0.0 < h.estimate <= 1.0


def test_attacker_skill_clamped():
    assert AttackerState(skill=1.7).skill == 1.0
    assert AttackerState(skill=-0.2).skill == 0.0


def test_compromise_frequency_matches_skill_times_base():
    rng = np.random.default_rng(11)
    att = AttackerState(skill=0.7, resources=1e6)
    edge = AttackEdge(("a", "admin"), ("b", "user"), "V", 0.8, 1.0, 1.0, 1.0)
    wins = sum(attempt_compromise(att, edge, rng) for _ in range(10_000))
    assert abs(wins / 10_000 - 0.56) < 0.02
    h = att.history["b"]
    assert h.attempts == 10_000 and h.successes == wins
    assert att.resources == 1e6 - 10_000


# ---- path choice


def test_single_path_and_diamond():
    g = _graph([("r", "a", 1, 1, 1), ("a", "g", 1, 1, 1)])
    _, nodes, _ = attacker_plan_path(g, AttackerState(goal=frozenset({"g"})))
    assert [n[0] for n in nodes] == ["r", "a", "g"]
    g = _graph([("r", "a", 1, 1, 1), ("a", "g", 2, 1, 1), ("r", "b", 2, 1, 1), ("b", "g", 3, 1, 1)])
    cost, nodes, _ = attacker_plan_path(g, AttackerState(goal=frozenset({"g"})))
    assert cost == 3 and [n[0] for n in nodes] == ["r", "a", "g"]


def test_tie_break_is_lexicographic():
    g = _graph([("r", "b", 1, 1, 1), ("b", "g", 1, 1, 1), ("r", "a", 1, 1, 1), ("a", "g", 1, 1, 1)])
    _, nodes, _ = attacker_plan_path(g, AttackerState(goal=frozenset({"g"})))
    assert [n[0] for n in nodes] == ["r", "a", "g"]


def test_unreachable_goal_raises():
    g = _graph([("r", "a", 1, 1, 1)])
    with pytest.raises(NoPath):
        attacker_plan_path(g, AttackerState(goal=frozenset({"zz"})))


def test_estimate_steers_the_path():
    g = _graph([("r", "a", 1, 1, 1), ("a", "g", 1, 1, 1), ("r", "b", 1.5, 1, 1), ("b", "g", 1, 1, 1)])
    att = AttackerState(goal=frozenset({"g"}))
    att.history["a"] = SuccessHistory(0, 3)  # estimate 1/4 makes a four times dearer
    _, nodes, _ = attacker_plan_path(g, att)
    assert nodes[1][0] == "b"


def test_blocked_edge_is_avoided():
    g = _graph([("r", "a", 1, 1, 1), ("a", "g", 1, 1, 1), ("r", "b", 5, 1, 1), ("b", "g", 5, 1, 1)])
    e = g.edges[0]
    _, nodes, _ = attacker_plan_path(g, AttackerState(goal=frozenset({"g"})), blocked={(e.src, e.dst, e.vulnerability)})
    assert nodes[1][0] == "b"


@pytest.mark.parametrize("seed", range(20))
def test_path_cost_equals_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 10
    adj, plain = {}, {}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.35:
                w = float(rng.integers(1, 20))
                adj.setdefault(u, []).append((v, w, (u, v)))
                plain.setdefault(u, []).append(v)
    weights = {(u, v): w for u in adj for v, w, _ in adj[u]}
    paths = list(all_simple_paths(plain, 0, n - 1))
    if not paths:
        with pytest.raises(NoPath):
            shortest_path(adj, 0, {n - 1})
        return
    best = min(sum(weights[(a, b)] for a, b in zip(p, p[1:])) for p in paths)
    cost, nodes, pay = shortest_path(adj, 0, {n - 1})
    assert cost == pytest.approx(best, abs=1e-12)
    assert sum(weights[e] for e in pay) == pytest.approx(cost)
    assert nodes[0] == 0 and nodes[-1] == n - 1


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(1, 9), st.integers(1, 9), st.sampled_from([0.25, 0.5, 1.0])), min_size=1, max_size=14),
    st.sampled_from([0.5, 2.0, 4.0, 8.0]),
)
def test_common_cost_scaling_keeps_the_path(raw, factor):
    names = ["r", "a", "b", "c", "d", "g"]
    edges = [(names[a], names[b], t, c, p) for a, b, t, c, p in raw if a < b]
    if not edges:
        return
    g1 = _graph(edges)
    g2 = _graph([(a, b, t, c * factor, p) for a, b, t, c, p in edges])
    att = AttackerState(goal=frozenset({"g"}))
    try:
        _, n1, _ = attacker_plan_path(g1, att)
    except NoPath:
        with pytest.raises(NoPath):
            attacker_plan_path(g2, att)
        return
    _, n2, _ = attacker_plan_path(g2, att)
    assert n1 == n2


# ---- centrality and placement


def test_three_node_path_centrality():
    cb = current_flow_betweenness(3, [(0, 1), (1, 2)], [1.0, 1.0])
    assert cb[0] == pytest.approx(0, abs=1e-12) and cb[2] == pytest.approx(0, abs=1e-12)
    assert cb[1] == pytest.approx(cfb_oracle(3, [(0, 1), (1, 2)], [1.0, 1.0])[1], abs=1e-12)
    assert cb[1] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(50))
def test_centrality_matches_laplacian_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    edges = _random_connected(rng, n)
    costs = rng.uniform(1, 100, n)
    g = outage_conductance(edges, costs)
    np.testing.assert_allclose(current_flow_betweenness(n, edges, g), cfb_oracle(n, edges, g), atol=1e-8)


def test_raising_cost_lifts_neighbor_rank():
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]
    base = np.array([10.0, 10.0, 10.0, 10.0, 10.0])
    raised = base.copy()
    raised[4] = 100.0
    before = cfb_oracle(5, edges, outage_conductance(edges, base))
    after = cfb_oracle(5, edges, outage_conductance(edges, raised))
    np.testing.assert_allclose(current_flow_betweenness(5, edges, outage_conductance(edges, raised)), after, atol=1e-10)
    rank = lambda cb, v: sorted(range(5), key=lambda i: (-cb[i], i)).index(v)
    assert rank(after, 3) <= rank(before, 3)


def test_disconnected_graph_warns_and_scores_per_component():
    edges = [(0, 1), (1, 2), (3, 4), (4, 5)]
    with pytest.warns(RuntimeWarning):
        cb = current_flow_betweenness(6, edges, np.ones(4))
    assert cb[1] == pytest.approx(1.0) and cb[4] == pytest.approx(1.0)


def test_place_sensors_examples():
    assert place_sensors({"a": 1.0, "b": 2.0}, 0) == (set(), 0.0, 0)
    s, spent, short = place_sensors({"a": 1.0, "b": 9.0, "c": 1.0}, 1)
    assert s == {"b"} and spent == 10 and short == 0
    s, spent, short = place_sensors({"a": 1.0, "b": 2.0, "c": 3.0}, 3, budget=25)
    assert s == {"b", "c"} and spent == 20 and short == 1
    s, spent, _ = place_sensors({"a": 1.0, "b": 2.0}, 2, budget=10, existing={"b"})
    assert s == {"a", "b"} and spent == 10
    with pytest.raises(ValueError):
        place_sensors({"a": 1.0}, 2)


@pytest.mark.parametrize("seed", range(10))
def test_place_sensors_matches_exhaustive_top_k(seed):
    rng = np.random.default_rng(seed)
    ids = [f"n{i:02d}" for i in range(20)]
    scores = {v: float(rng.integers(0, 6)) for v in ids}  # coarse scores force ties
    for k in (1, 2, 3):
        order = lambda v: (-scores[v], v)
        valid = [
            set(c) for c in itertools.combinations(ids, k)
            if all(order(a) < order(b) for a in c for b in ids if b not in c)
        ]
        assert len(valid) == 1
        assert place_sensors(scores, k)[0] == valid[0]


def test_sensor_scores_scale_with_learning_rate():
    sc = bundled_scenario(1)
    base = sensor_scores(sc)
    bumped = sensor_scores(sc, {"hmi": 1.5})
    assert bumped["hmi"] == pytest.approx(1.5 * base["hmi"])
    assert all(bumped[h] == base[h] for h in base if h != "hmi")


# ---- rounds


def _certain_scenario():
    return initialize_scenario({
        "subnets": [{"id": "net", "zone": "internet"}, {"id": "office", "zone": "enterprise"}, {"id": "dmz", "zone": "DMZ"}],
        "vulnerabilities": [{"id": "SURE", "complexity": 4, "probability": 1.0, "time": 10, "retry_time": 20}],
        "hosts": [
            {"id": "w1", "subnet": "office", "role": "workstation", "vulnerabilities": ["SURE"]},
            {"id": "w2", "subnet": "office", "role": "workstation", "vulnerabilities": ["SURE"]},
            {"id": "s1", "subnet": "dmz", "role": "server", "vulnerabilities": ["SURE"]},
        ],
        "firewall": {"hierarchical_only": True, "horizontal_allowed": True},
        "goals": ["s1"],
        "c2": {"subnet": "net"},
    })


def test_certain_exploits_without_sensors_always_succeed():
    cfg = GameConfig(rounds=10, sensors=0, skill_initial=1.0, skill_increment=0.0, seed=3)
    res = run_game(cfg, _certain_scenario())
    assert all(r.succeeded and r.detections == 0 for r in res.records)
    assert all(r.complexity == 4.0 for r in res.records)


def test_skill_in_game_records():
    res = run_game(GameConfig(rounds=30, sensors=2, seed=0), bundled_scenario(3))
    skills = [r.skill for r in res.records]
    assert skills[24] == 1.0 and max(skills) == 1.0
    assert all(b >= a for a, b in zip(skills, skills[1:]))


def test_identical_seeds_identical_records(tmp_path):
    sc = bundled_scenario(3)
    a = run_game(GameConfig(rounds=15, sensors=3, seed=9), sc)
    b = run_game(GameConfig(rounds=15, sensors=3, seed=9), sc)
    a.to_jsonl(tmp_path / "a.jsonl")
    b.to_jsonl(tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    a.to_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().count("\n") == 16
    json.loads((tmp_path / "a.jsonl").read_text().splitlines()[0])


@pytest.mark.parametrize("budget", ["low", "medium", "high"])
def test_budget_conservation(budget):
    cfg = GameConfig.from_dict({"rounds": 20, "sensors": 4, "seed": 1, "budget": budget})
    res = run_game(cfg, bundled_scenario(3))
    for r in res.records:
        assert r.spent <= cfg.capital + r.round * cfg.funds + 1e-9
    spent = [r.spent for r in res.records]
    assert all(b >= a for a, b in zip(spent, spent[1:]))


def test_detections_increment_learning_once_per_alert():
    sc = bundled_scenario(3)
    alerts = []
    res = run_game(GameConfig(rounds=20, sensors=4, seed=2), sc, emit=alerts.append)
    assert alerts == res.alerts
    assert sum(r.detections for r in res.records) == len(alerts) > 0
    assert len({a["alert_id"] for a in alerts}) == len(alerts)
    for host, q in res.defender.q.items():
        hits = sum(a["sensor"] == host for a in alerts)
        assert q == pytest.approx(1.0 + 0.1 * hits)
    assert all(r.detections <= 3 for r in res.records)
    assert all(r.outcome in ("goal", "detected", "no-path", "exhausted") for r in res.records)


def test_risk_never_falls_with_learning():
    res = run_game(GameConfig(rounds=20, sensors=4, seed=2), bundled_scenario(3))
    for r in res.records:
        assert r.risk_after >= r.risk_before - 1e-9
        assert r.complexity is None or 0.0 <= r.complexity <= 10.0


def test_invalid_configs():
    with pytest.raises(ValueError):
        GameConfig(rounds=0)
    with pytest.raises(ValueError):
        run_game(GameConfig(sensors=99), bundled_scenario(1))


# ---- complexity scoring


def test_complexity_interval_matches_hand_formula():
    rng = np.random.default_rng(4)
    x = rng.uniform(1, 9, 30).tolist()
    m, lo, hi = complexity_interval(x)
    mean = statistics.fmean(x)
    half = stats.t.ppf(0.975, 29) * statistics.stdev(x) / math.sqrt(30)
    assert m == pytest.approx(mean, abs=1e-12)
    assert lo == pytest.approx(mean - half, abs=1e-9)
    assert hi == pytest.approx(mean + half, abs=1e-9)
    assert (lo, hi) == pytest.approx(stats.t.interval(0.95, 29, loc=mean, scale=stats.sem(x)), abs=1e-9)


def test_more_sensors_raise_complexity_on_benchmark():
    sc = benchmark_scenario()

    def mean_complexity(k, seed):
        recs = run_game(GameConfig(rounds=30, sensors=k, seed=seed), sc).records
        return np.mean([r.complexity for r in recs if r.complexity is not None])

    few = [mean_complexity(5, s) for s in range(8)]
    many = [mean_complexity(15, s) for s in range(8)]
    assert np.mean(many) >= np.mean(few)
