import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcosim.power import (
    FLOW,
    INJECTION,
    Branch,
    Bus,
    DispatchInfeasible,
    GridError,
    GridNetwork,
    GridStateClass,
    Injection,
    Measurement,
    MeasurementError,
    MeasurementSet,
    OperationalLimits,
    PowerFlowError,
    PreconditionError,
    BddUndefined,
    UnobservableError,
    bad_data_detection,
    build_dc_jacobian,
    check_operational_limits,
    classify_grid_state,
    economic_dispatch,
    full_measurement_set,
    grid_from_dict,
    grid_to_dict,
    optimize_tap_position,
    reconfigure_topology,
    run_power_flow,
    wls_state_estimation,
)
from gridcosim.power.powerflow import blackout_result

from _grids import chain, random_grid
from oracles import dense_wls, gauss_seidel_pf


# -- grid model -------------------------------------------------------------

def test_grid_requires_single_slack():
    with pytest.raises(GridError):
        GridNetwork([Bus(1, "pq"), Bus(2, "pq")], [Branch(1, 1, 2, 0, 0.1)])


def test_grid_rejects_unknown_bus_and_disconnection():
    with pytest.raises(GridError):
        GridNetwork([Bus(1, "slack"), Bus(2)], [Branch(1, 1, 3, 0, 0.1)])
    with pytest.raises(GridError):
        GridNetwork([Bus(1, "slack"), Bus(2), Bus(3)], [Branch(1, 1, 2, 0, 0.1)])


def test_tap_outside_range_rejected():
    with pytest.raises(GridError):
        GridNetwork(
            [Bus(1, "slack"), Bus(2)],
            [Branch(1, 1, 2, 0, 0.1, kind="transformer", tap=3, tap_min=-2, tap_max=2, tap_step=0.01)],
        )


def test_limits_invariants():
    with pytest.raises(GridError):
        OperationalLimits(v_min=1.1, v_max=1.0)
    with pytest.raises(GridError):
        OperationalLimits(loading_limit=140, temporary_limit=130)


def test_json_round_trip():
    g = chain([1, 2, 3], loads={2: 3.0, 3: 1.0})
    g.branches.append(Branch(9, 1, 3, 0.0, 0.2, kind="transformer", switchable=False, tap_min=-4, tap_max=4, tap_step=0.0125))
    doc = grid_to_dict(g)
    g2 = grid_from_dict(doc)
    assert grid_to_dict(g2) == doc
    assert g2.branch(9).kind == "transformer"


# -- power flow -------------------------------------------------------------

def test_two_bus_dc_flow_equals_load():
    g = chain([1, 2], x=0.1, loads={2: 10.0})
    res = run_power_flow(g, "DC")
    assert res.flow_of(1) == pytest.approx(10.0, abs=1e-12)
    # theta_2 = -P x / base
    assert res.va_of(2) == pytest.approx(-0.1 * 10.0 / 100.0, abs=1e-15)
    assert np.all(res.vm == 1.0)


def test_flat_start_is_solution_without_load():
    g = chain([1, 2, 3, 4], x=0.1, r=0.02)
    res = run_power_flow(g, "AC")
    assert res.converged and res.iterations == 0
    assert np.all(res.vm == 1.0) and np.all(res.va == 0.0)
    assert np.all(res.p_from_mw == 0.0)


def test_dc_angles_close_to_ac_at_moderate_loading():
    # 5-bus radial feeder; loadings stay under 50 %
    buses = [Bus(1, "slack")] + [Bus(i) for i in range(2, 6)]
    branches = [Branch(1, 1, 2, 0.005, 0.05), Branch(2, 2, 3, 0.005, 0.05), Branch(3, 2, 4, 0.005, 0.05), Branch(4, 4, 5, 0.005, 0.05)]
    loads = [Injection(i, b, p) for i, (b, p) in enumerate([(2, 10), (3, 8), (4, 6), (5, 12)], start=1)]
    g = GridNetwork(buses, branches, loads)
    ac = run_power_flow(g, "AC")
    dc = run_power_flow(g, "DC")
    assert ac.max_loading <= 50
    gs = gauss_seidel_pf(g)
    for b in g.bus_ids:
        assert ac.va_of(b) == pytest.approx(np.angle(gs[b]), abs=1e-9)
        if b != 1:
            assert dc.va_of(b) == pytest.approx(ac.va_of(b), rel=0.05)


@pytest.mark.parametrize("seed", range(5))
def test_ac_matches_gauss_seidel(seed):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, int(rng.integers(3, 9)), extra=int(rng.integers(0, 3)))
    res = run_power_flow(g, "AC")
    assert res.converged and res.max_mismatch < 1e-8
    gs = gauss_seidel_pf(g)
    for b in g.bus_ids:
        assert res.vm_of(b) == pytest.approx(abs(gs[b]), abs=1e-6)


def test_dc_balance_and_ac_slack_balance():
    rng = np.random.default_rng(11)
    g = random_grid(rng, 8, extra=2)
    dc = run_power_flow(g, "DC")
    assert abs(dc.bus_p_mw.sum()) < 1e-9
    ac = run_power_flow(g, "AC")
    load = sum(i.p_mw for i in g.injections)
    losses = float(np.sum(ac.p_from_mw + ac.p_to_mw))
    assert abs(ac.slack_p_mw - load - losses) / g.base_mva < 1e-6


def test_unserved_load_in_deenergized_island():
    g = chain([1, 2, 3], loads={2: 2.0, 3: 5.0})
    g.branch(2).closed = False
    res = run_power_flow(g, "AC")
    assert res.unserved_mw == pytest.approx(5.0)
    assert res.vm_of(3) == 0.0


def test_isolated_slack_raises_with_buses():
    g = chain([1, 2, 3], loads={3: 1.0})
    g.branch(1).closed = False
    with pytest.raises(PowerFlowError) as exc:
        run_power_flow(g, "DC")
    assert exc.value.buses == [2, 3]
    assert run_power_flow(g, "DC", on_isolated_slack="blackout").unserved_mw == 1.0
    assert blackout_result(g).energized.tolist() == [True, False, False]


# -- limits and classes -----------------------------------------------------

def _result_with(vm=(1.0, 1.0), loading=(50.0,), unserved=0.0):
    g = chain([1, 2])
    res = blackout_result(g)
    res.vm = np.array(vm, dtype=float)
    res.energized = np.ones(len(vm), dtype=bool)
    res.loading_percent = np.array(loading, dtype=float)
    res.unserved_mw = unserved
    return res


def test_compliant_state_has_no_violations():
    res = _result_with(loading=(80.0,))
    assert check_operational_limits(res, OperationalLimits()) == []
    assert classify_grid_state(res, OperationalLimits()) == GridStateClass.Class0


def test_overload_violation_magnitude():
    res = _result_with(loading=(109.40,))
    (v,) = check_operational_limits(res, OperationalLimits())
    assert v.kind == "overload" and v.magnitude == pytest.approx(9.40)


def test_undervoltage_boundary():
    res = _result_with(vm=(1.0, 0.960))
    (v,) = check_operational_limits(res, OperationalLimits())
    assert v.kind == "undervoltage" and v.element == 2 and v.magnitude == pytest.approx(0.005)


def test_precondition_non_converged():
    res = _result_with()
    res.converged = False
    with pytest.raises(PreconditionError):
        check_operational_limits(res, OperationalLimits())


def test_classes():
    lim = OperationalLimits()
    assert classify_grid_state(_result_with(loading=(110.0,)), lim) == GridStateClass.Class1
    assert classify_grid_state(_result_with(loading=(131.0,)), lim) == GridStateClass.Class2
    assert classify_grid_state(_result_with(vm=(1.0, 0.89)), lim) == GridStateClass.Class2
    assert classify_grid_state(_result_with(unserved=2.0), lim) == GridStateClass.Class3
    assert classify_grid_state(_result_with(loading=(200.0,), unserved=2.0), lim) == GridStateClass.Class3
    assert GridStateClass.Class0 < GridStateClass.Class1 < GridStateClass.Class2 < GridStateClass.Class3


@settings(max_examples=200, deadline=None)
@given(
    v=st.floats(0.8, 1.2),
    ld=st.floats(0.0, 200.0),
    un=st.floats(0.0, 5.0),
    dv=st.floats(0.0, 0.2),
    dl=st.floats(0.0, 50.0),
    du=st.floats(0.0, 5.0),
)
def test_classification_monotone(v, ld, un, dv, dl, du):
    lim = OperationalLimits()
    base = classify_grid_state(_result_with(vm=(1.0, v), loading=(ld,), unserved=un), lim)
    # worsen voltage away from 1.0, loading up, unserved up
    worse_v = v - dv if v <= 1.0 else v + dv
    assert classify_grid_state(_result_with(vm=(1.0, worse_v), loading=(ld,), unserved=un), lim) >= base
    assert classify_grid_state(_result_with(vm=(1.0, v), loading=(ld + dl,), unserved=un), lim) >= base
    assert classify_grid_state(_result_with(vm=(1.0, v), loading=(ld,), unserved=un + du), lim) >= base


# -- economic dispatch ------------------------------------------------------

def _dispatch_grid(costs, bounds, demand):
    buses = [Bus(1, "slack"), Bus(2)]
    inj = [Injection(100, 2, demand)]
    for k, (c, (lo, hi)) in enumerate(zip(costs, bounds), start=1):
        inj.append(Injection(k, 1, 0.0, kind="generator", p_min=lo, p_max=hi, cost=c))
    return GridNetwork(buses, [Branch(1, 1, 2, 0, 0.1)], inj)


def test_dispatch_symmetric():
    out = economic_dispatch(_dispatch_grid([1, 1], [(0, 100)] * 2, 50))
    assert out == pytest.approx({1: 25.0, 2: 25.0})


def test_dispatch_equal_marginal_cost_against_grid_search():
    out = economic_dispatch(_dispatch_grid([1, 4], [(0, 100)] * 2, 50))
    assert out == pytest.approx({1: 40.0, 2: 10.0})
    best = min((p1 ** 2 + 4 * (50 - p1) ** 2, p1) for p1 in np.arange(0, 50.0001, 0.1))
    assert out[1] == pytest.approx(best[1], abs=0.05)


def test_dispatch_clamps_at_bound():
    out = economic_dispatch(_dispatch_grid([1, 1], [(0, 10), (0, 100)], 50))
    assert out == pytest.approx({1: 10.0, 2: 40.0})


def test_dispatch_infeasible_reports_shortfall():
    with pytest.raises(DispatchInfeasible) as exc:
        economic_dispatch(_dispatch_grid([1, 1], [(0, 10), (0, 20)], 50))
    assert exc.value.shortfall_mw == pytest.approx(20.0)


# -- measurement model, WLS and BDD ----------------------------------------

def test_flow_row_drops_slack_column():
    g = chain([1, 2], x=0.1)
    meas = MeasurementSet([Measurement(FLOW, 1, 0.0, 1.0)])
    H = build_dc_jacobian(g, meas)
    assert H.state_buses == [2]
    assert H.matrix.tolist() == [[-10.0]]


def test_injection_row_is_negated_sum_of_outgoing_flows():
    g = chain([1, 2, 3], x=[0.1, 0.2])
    meas = MeasurementSet([Measurement(INJECTION, 2, 0, 1), Measurement(FLOW, 1, 0, 1), Measurement(FLOW, 2, 0, 1)])
    H = build_dc_jacobian(g, meas).matrix
    # flow 2->1 is -(row of branch 1), flow 2->3 is row of branch 2
    out_of_2 = -H[1] + H[2]
    np.testing.assert_allclose(H[0], -out_of_2)


def test_shift_invariance_with_full_angles():
    g = chain([1, 2, 3], x=[0.1, 0.25], loads={2: 1.0, 3: 2.0})
    meas = full_measurement_set(g, run_power_flow(g, "DC"))
    H = build_dc_jacobian(g, meas, include_slack=True)
    np.testing.assert_allclose(H.matrix @ np.ones(3), 0.0, atol=1e-12)
    # numeric differentiation of the flow equations gives the same rows
    theta = np.array([0.0, -0.01, -0.03])
    eps = 1e-7
    for i, m in enumerate(meas.entries):
        if m.kind != FLOW:
            continue
        br = g.branch(m.element)
        f = lambda th: (th[br.from_bus - 1] - th[br.to_bus - 1]) / br.x
        for j in range(3):
            d = np.zeros(3)
            d[j] = eps
            assert (f(theta + d) - f(theta - d)) / (2 * eps) == pytest.approx(H.matrix[i, j], rel=1e-6, abs=1e-6)


def test_measurement_on_open_branch_rejected():
    g = chain([1, 2, 3])
    g.branches.append(Branch(5, 1, 3, 0, 0.1, closed=False))
    with pytest.raises(MeasurementError):
        build_dc_jacobian(g, MeasurementSet([Measurement(FLOW, 5, 0, 1)]))


def test_measurement_set_rejects_bad_sigma():
    with pytest.raises(MeasurementError):
        MeasurementSet([Measurement(FLOW, 1, 0, 0.0)])


def test_measurements_use_load_convention():
    g = chain([1, 2], loads={2: 7.0})
    meas = full_measurement_set(g, run_power_flow(g, "DC"))
    assert meas.entries[meas.index_of(INJECTION, 2)].value == pytest.approx(7.0)
    assert meas.entries[meas.index_of(INJECTION, 1)].value == pytest.approx(-7.0)


def test_noise_free_recovery():
    rng = np.random.default_rng(3)
    g = random_grid(rng, 7, extra=2)
    res = run_power_flow(g, "DC")
    meas = full_measurement_set(g, res)
    H = build_dc_jacobian(g, meas)
    est = wls_state_estimation(H, meas)
    truth = np.array([res.va_of(b) for b in H.state_buses])
    np.testing.assert_allclose(est.x_hat, truth, atol=1e-8)
    assert np.max(np.abs(est.residual)) < 1e-8
    assert bad_data_detection(est).passed


def test_duplicate_measurement_gives_variance_weighted_mean():
    g = chain([1, 2], x=0.1)
    meas = MeasurementSet([Measurement(FLOW, 1, 4.0, 1.0), Measurement(FLOW, 1, 6.0, 2.0)])
    est = wls_state_estimation(build_dc_jacobian(g, meas), meas)
    mean = (4.0 / 1 + 6.0 / 4) / (1 + 1 / 4)
    assert est.z_hat[0] == pytest.approx(mean, abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_wls_matches_dense_inverse_and_is_stationary(seed):
    rng = np.random.default_rng(100 + seed)
    g = random_grid(rng, 5, extra=1)
    meas = full_measurement_set(g, run_power_flow(g, "DC"), rng=rng)
    H = build_dc_jacobian(g, meas)
    est = wls_state_estimation(H, meas)
    x, J = dense_wls(H.mw, meas.values, meas.sigmas)
    assert est.objective == pytest.approx(J, rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(est.x_hat, x, atol=1e-10)
    grad = H.mw.T @ (est.weights * est.residual)
    assert np.max(np.abs(grad)) < 1e-9 * max(1.0, np.max(np.abs(H.mw.T * est.weights)) * np.max(np.abs(meas.values)))
    np.testing.assert_array_equal(est.residual, est.z - H.mw @ est.x_hat)


def test_unobservable_reports_null_direction():
    g = chain([1, 2, 3])
    meas = MeasurementSet([Measurement(FLOW, 1, 0, 1)])
    with pytest.raises(UnobservableError) as exc:
        wls_state_estimation(build_dc_jacobian(g, meas), meas)
    d = exc.value.null_direction
    assert np.allclose(build_dc_jacobian(g, meas).mw @ d, 0)


def test_bdd_undefined_without_redundancy():
    g = chain([1, 2])
    meas = MeasurementSet([Measurement(FLOW, 1, 1.0, 1)])
    est = wls_state_estimation(build_dc_jacobian(g, meas), meas)
    with pytest.raises(BddUndefined):
        bad_data_detection(est)


def gross_error_identification_rate(trials=100):
    hits = 0
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, 8, extra=3)
        clean = full_measurement_set(g, run_power_flow(g, "DC"))
        noisy = clean.values + rng.normal(0, clean.sigmas)
        k = int(rng.integers(len(clean)))
        noisy[k] += 8 * clean.sigmas[k]
        meas = clean.with_values(noisy)
        est = wls_state_estimation(build_dc_jacobian(g, meas), meas)
        res = bad_data_detection(est)
        hits += (not res.passed) and res.flagged == k
    return hits / trials


def test_gross_error_identified():
    assert gross_error_identification_rate(100) >= 0.95


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), a1=st.floats(0.001, 0.2), a2=st.floats(0.001, 0.2))
def test_bdd_threshold_monotone_in_significance(seed, a1, a2):
    lo, hi = sorted((a1, a2))
    rng = np.random.default_rng(seed)
    g = random_grid(rng, 6, extra=2)
    meas = full_measurement_set(g, run_power_flow(g, "DC"), rng=rng)
    meas = meas.with_values(meas.values + rng.normal(0, 2 * meas.sigmas))
    est = wls_state_estimation(build_dc_jacobian(g, meas), meas)
    if bad_data_detection(est, hi).passed:
        assert bad_data_detection(est, lo).passed


# -- reconfiguration --------------------------------------------------------

def test_radial_grid_unchanged():
    g = chain([1, 2, 3, 4], loads={3: 2.0, 4: 1.0})
    rep = reconfigure_topology(g, g.limits)
    assert rep.opened == [] and rep.compliant
    assert [b.closed for b in rep.grid.branches] == [True] * 3


def _ring(loads, xs=(0.05, 0.05, 0.05, 0.05), rating=10.0):
    buses = [Bus(1, "slack"), Bus(2), Bus(3), Bus(4)]
    pairs = [(1, 2), (2, 3), (3, 4), (4, 1)]
    branches = [Branch(k + 1, a, b, 0.01, x, rating_mva=rating) for k, ((a, b), x) in enumerate(zip(pairs, xs))]
    inj = [Injection(i, b, p) for i, (b, p) in enumerate(loads.items(), start=1)]
    return GridNetwork(buses, branches, inj)


@pytest.mark.parametrize(
    "loads,xs",
    [
        ({2: 9.0, 3: 2.0, 4: 1.0}, (0.05, 0.05, 0.05, 0.05)),
        ({2: 1.0, 3: 6.0, 4: 1.0}, (0.02, 0.08, 0.05, 0.05)),
        ({2: 2.0, 3: 1.0, 4: 8.0}, (0.05, 0.04, 0.03, 0.10)),
    ],
)
def test_ring_opens_least_loaded_branch(loads, xs):
    g = _ring(loads, xs)
    rep = reconfigure_topology(g, g.limits)
    # oracle: try every single opening of the closed ring and pick the branch
    # that carried the least loading beforehand
    meshed = run_power_flow(g, "AC")
    candidates = []
    for br in g.branches:
        trial = g.copy()
        trial.branch(br.id).closed = False
        if run_power_flow(trial, "AC").unserved_mw == 0:
            candidates.append((meshed.loading_of(br.id), br.id))
    assert rep.opened == [min(candidates)[1]]


def test_two_rings_open_two_branches():
    buses = [Bus(i, "slack" if i == 1 else "pq") for i in range(1, 6)]
    pairs = [(1, 2), (2, 3), (3, 1), (1, 4), (4, 5), (5, 1)]
    branches = [Branch(k + 1, a, b, 0.01, 0.05) for k, (a, b) in enumerate(pairs)]
    inj = [Injection(i, i, 1.0 * i) for i in range(2, 6)]
    rep = reconfigure_topology(GridNetwork(buses, branches, inj))
    assert len(rep.opened) == 2
    assert len(rep.grid.closed_branches()) == 4


def test_fixed_cycle_is_an_error():
    buses = [Bus(1, "slack"), Bus(2), Bus(3)]
    branches = [Branch(k + 1, a, b, 0.01, 0.05, switchable=False) for k, (a, b) in enumerate([(1, 2), (2, 3), (3, 1)])]
    from gridcosim.power import ReconfigurationError

    with pytest.raises(ReconfigurationError):
        reconfigure_topology(GridNetwork(buses, branches, [Injection(1, 3, 1.0)]))


def _is_tree(grid):
    closed = grid.closed_branches()
    return len(closed) == len(grid.buses) - 1 and len(grid.energized_buses()) == len(grid.buses)


def test_reconfiguration_property_sample():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 31))
        g = random_grid(rng, n, extra=int(rng.integers(1, 5)))
        rep = reconfigure_topology(g)
        assert _is_tree(rep.grid)
        assert rep.result.unserved_mw == 0


# -- tap optimisation ------------------------------------------------------

def _tap_grid(vn=0.945, tap=0, tap_min=-4, tap_max=4, load=0.0):
    buses = [Bus(1, "slack", vn_pu=vn), Bus(2)]
    tr = Branch(1, 1, 2, 0.0, 0.01, kind="transformer", switchable=False, tap=tap, tap_min=tap_min, tap_max=tap_max, tap_step=0.0125)
    return GridNetwork(buses, [tr], [Injection(1, 2, load)] if load else [])


def test_no_violation_no_tap_change():
    rep = optimize_tap_position(_tap_grid(vn=1.0), max_iterations=10)
    assert rep.changes == [] and rep.violations == []


def test_two_decrements_restore_band():
    rep = optimize_tap_position(_tap_grid(), OperationalLimits(), max_iterations=10)
    assert [c.new_tap for c in rep.changes] == [-1, -2]
    assert rep.violations == []
    v = run_power_flow(rep.grid, "AC").vm_of(2)
    assert v == pytest.approx(0.945 / (1 - 2 * 0.0125), abs=1e-9)


def test_tap_at_limit_saturates():
    rep = optimize_tap_position(_tap_grid(tap=0, tap_min=0), OperationalLimits(), max_iterations=10)
    assert rep.changes == [] and rep.saturated
    assert rep.grid.branch(1).tap == 0
    assert rep.violations and rep.violations[0].kind == "undervoltage"


def test_overvoltage_raises_tap():
    rep = optimize_tap_position(_tap_grid(vn=1.07), OperationalLimits(), max_iterations=10)
    assert rep.changes[0].new_tap == 1
    assert rep.violations == []
