from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from e2e_auction.netmodel import BUYER, RELAY, SERVER, ScenarioConfig, generate_instance, with_bands, with_reports
from e2e_auction.netopt import (AllocationPlan, SizeLimitError, StructuralError,
                                check_feasibility, plan_throughput, solve_p1_exact,
                                solve_p1_greedy)

from helpers import brute_force_best, make_instance, tiny_instance


def one_hop(rate, bands=1, cpu=6.0, mem=8.0, compute=1.0, requests=None):
    nodes = [(1, 0, 0, BUYER), (2, 100, 0, SERVER)]
    requests = requests or [(1, 1, compute, 1.0, rate, 1.0)]
    return make_instance(nodes, requests, [(1, 2, cpu, mem)], n_bands=bands)


def hand_plan(assignment, spectrum, rate_by_key, routes):
    flows = {k: {l: rate_by_key[k] for l in zip(r, r[1:])} for k, r in routes.items()}
    return AllocationPlan(assignment, {l: frozenset(b) for l, b in spectrum.items()}, flows, routes)


# ---------------------------------------------------------------- greedy


def test_greedy_single_adjacent_request_is_served():
    inst = one_hop(4.0)
    plan = solve_p1_greedy(inst)
    assert plan.assignment == {(1, 1): 1}
    assert plan_throughput(plan, inst) == 4.0
    assert check_feasibility(inst, plan).passed
    assert brute_force_best(inst) == 4.0


def test_greedy_rate_above_band_capacity_is_skipped():
    inst = one_hop(12.0)
    plan = solve_p1_greedy(inst)
    assert plan.assignment == {}
    assert plan_throughput(plan, inst) == 0.0
    assert brute_force_best(inst) == 0.0


def test_no_bands_means_empty_assignment():
    inst = one_hop(4.0, bands=0)
    assert solve_p1_greedy(inst).assignment == {}
    assert solve_p1_exact(inst).assignment == {}


def test_rate_above_one_band_uses_two_bands():
    inst = one_hop(12.0, bands=2)
    plan = solve_p1_greedy(inst)
    assert plan.spectrum[(1, 2)] == frozenset({1, 2})
    assert check_feasibility(inst, plan).passed


def test_multi_hop_route_through_relay_needs_distinct_bands():
    nodes = [(1, 0, 0, BUYER), (2, 200, 0, RELAY), (3, 400, 0, SERVER)]
    inst = make_instance(nodes, [(1, 1, 1.0, 1.0, 5.0, 1.0)], [(1, 3, 6.0, 8.0)], n_bands=1)
    assert solve_p1_greedy(inst).assignment == {}
    inst2 = make_instance(nodes, [(1, 1, 1.0, 1.0, 5.0, 1.0)], [(1, 3, 6.0, 8.0)], n_bands=2)
    plan = solve_p1_greedy(inst2)
    assert plan.routes[(1, 1)] == (1, 2, 3)
    assert plan.spectrum[(1, 2)] != plan.spectrum[(2, 3)]
    assert check_feasibility(inst2, plan).passed


def test_routes_never_forward_through_buyers_or_servers():
    nodes = [(1, 0, 0, BUYER), (2, 200, 0, BUYER), (3, 400, 0, SERVER)]
    reqs = [(1, 1, 1.0, 1.0, 4.0, 1.0)]
    inst = make_instance(nodes, reqs, [(1, 3, 6.0, 8.0)], n_bands=2)
    assert solve_p1_greedy(inst).assignment == {}


def test_greedy_orders_by_rate():
    reqs = [(1, 1, 1.0, 1.0, 4.0, 9.0), (2, 1, 1.0, 1.0, 6.0, 0.1)]
    nodes = [(1, 0, 0, BUYER), (2, 0, 50, BUYER), (3, 100, 0, SERVER)]
    inst = make_instance(nodes, reqs, [(1, 3, 1.5, 8.0)], n_bands=4)
    assert solve_p1_greedy(inst).assignment == {(2, 1): 1}


# ---------------------------------------------------------------- audit


def test_audit_flags_link_overload_with_slack():
    inst = one_hop(12.0, bands=1)
    plan = hand_plan({(1, 1): 1}, {(1, 2): {1}}, {(1, 1): 12.0}, {(1, 1): (1, 2)})
    report = check_feasibility(inst, plan)
    caps = [v for v in report.violations if v.kind == "link_capacity"]
    assert len(caps) == 1 and caps[0].slack == pytest.approx(-2.0)
    assert not report.passed


def test_audit_flags_compute_overload():
    nodes = [(1, 0, 0, BUYER), (2, 0, 50, BUYER), (3, 100, 0, SERVER)]
    reqs = [(1, 1, 3.5, 1.0, 4.0, 1.0), (2, 1, 3.5, 1.0, 4.0, 1.0)]
    inst = make_instance(nodes, reqs, [(1, 3, 6.0, 8.0)], n_bands=4, interference=0.0)
    plan = hand_plan({(1, 1): 1, (2, 1): 1}, {(1, 3): {1}, (2, 3): {2}},
                     {(1, 1): 4.0, (2, 1): 4.0}, {(1, 1): (1, 3), (2, 1): (2, 3)})
    kinds = {v.kind: v for v in check_feasibility(inst, plan).violations}
    assert set(kinds) == {"compute_capacity"}
    assert kinds["compute_capacity"].slack == pytest.approx(-1.0)


def test_audit_flags_shared_band_on_conflicting_links():
    nodes = [(1, 0, 0, BUYER), (2, 0, 50, BUYER), (3, 100, 0, SERVER)]
    reqs = [(1, 1, 1.0, 1.0, 4.0, 1.0), (2, 1, 1.0, 1.0, 4.0, 1.0)]
    inst = make_instance(nodes, reqs, [(1, 3, 6.0, 8.0)], n_bands=2)
    plan = hand_plan({(1, 1): 1, (2, 1): 1}, {(1, 3): {1}, (2, 3): {1}},
                     {(1, 1): 4.0, (2, 1): 4.0}, {(1, 1): (1, 3), (2, 1): (2, 3)})
    assert [v.kind for v in check_feasibility(inst, plan).violations] == ["band_conflict"]


def test_audit_flags_short_rate_and_broken_conservation():
    inst = one_hop(4.0)
    plan = hand_plan({(1, 1): 1}, {(1, 2): {1}}, {(1, 1): 3.0}, {(1, 1): (1, 2)})
    assert [v.kind for v in check_feasibility(inst, plan).violations] == ["rate"]
    plan.flows[(1, 1)][(2, 1)] = 1.0
    kinds = {v.kind for v in check_feasibility(inst, plan).violations}
    assert "flow_off_route" in kinds

    nodes = [(1, 0, 0, BUYER), (2, 200, 0, RELAY), (3, 400, 0, SERVER)]
    relay = make_instance(nodes, [(1, 1, 1.0, 1.0, 4.0, 1.0)], [(1, 3, 6.0, 8.0)], n_bands=2)
    leaky = AllocationPlan({(1, 1): 1}, {(1, 2): frozenset({1}), (2, 3): frozenset({2})},
                           {(1, 1): {(1, 2): 5.0, (2, 3): 4.0}}, {(1, 1): (1, 2, 3)})
    bad = [v for v in check_feasibility(relay, leaky).violations]
    assert [(v.kind, v.entity) for v in bad] == [("flow_conservation", ((1, 1), 2)),
                                                  ("flow_conservation", ((1, 1), 3))]


def test_audit_dangling_reference_is_structural():
    inst = one_hop(4.0)
    with pytest.raises(StructuralError):
        check_feasibility(inst, AllocationPlan({(9, 9): 1}))
    with pytest.raises(StructuralError):
        check_feasibility(inst, AllocationPlan({(1, 1): 7}))
    with pytest.raises(StructuralError):
        check_feasibility(inst, AllocationPlan(spectrum={(1, 2): frozenset({5})}))


# ---------------------------------------------------------------- exact


def test_exact_two_requests_one_bottleneck_band():
    # brute force over the four assignment subsets: {}, {a}, {b} feasible, {a, b} needs 12 Mbps
    nodes = [(1, 0, 0, BUYER), (2, 0, 50, BUYER), (3, 200, 0, RELAY), (4, 400, 0, SERVER)]
    reqs = [(1, 1, 1.0, 1.0, 6.0, 1.0), (2, 1, 1.0, 1.0, 6.0, 1.0)]
    inst = make_instance(nodes, reqs, [(1, 4, 6.0, 8.0)], n_bands=2)
    plan = solve_p1_exact(inst)
    assert len(plan.assignment) == 1
    assert plan_throughput(plan, inst) == 6.0
    assert brute_force_best(inst) == 6.0
    # lexicographic tie-break keeps the smaller key
    assert list(plan.assignment) == [(1, 1)]


def test_exact_empty_instance():
    inst = generate_instance(replace(ScenarioConfig(), n_buyers=0, n_relays=1))
    assert plan_throughput(solve_p1_exact(inst), inst) == 0.0


def test_exact_refuses_oversized_instances():
    with pytest.raises(SizeLimitError):
        solve_p1_exact(generate_instance(ScenarioConfig()))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 3))
def test_exact_matches_brute_force_and_dominates_greedy(seed, bands):
    inst = tiny_instance(seed, n_bands=bands)
    exact = solve_p1_exact(inst)
    greedy = solve_p1_greedy(inst)
    assert check_feasibility(inst, exact).passed
    assert check_feasibility(inst, greedy).passed
    te = plan_throughput(exact, inst)
    assert te == pytest.approx(brute_force_best(inst), abs=1e-9)
    assert te >= plan_throughput(greedy, inst) - 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_exact_throughput_monotone_in_bands(seed):
    inst = tiny_instance(seed, n_bands=1)
    values = [plan_throughput(solve_p1_exact(with_bands(inst, n)), inst) for n in range(0, 4)]
    assert values == sorted(values)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.data())
def test_solvers_ignore_prices(seed, data):
    inst = generate_instance(ScenarioConfig(seed=seed))
    tiny = tiny_instance(seed)
    for base, solver in ((inst, solve_p1_greedy), (tiny, solve_p1_exact)):
        bids = {r.key: data.draw(st.floats(0, 10)) for r in base.requests}
        asks = {(s.id, k): data.draw(st.floats(0, 10)) for s in base.sellers for k in list(s.asks)[:3]}
        a = solver(base)
        b = solver(with_reports(base, bids=bids, asks=asks))
        assert (a.assignment, a.routes, a.spectrum) == (b.assignment, b.routes, b.spectrum)


@pytest.mark.parametrize("seed", range(20))
def test_greedy_plans_pass_audit_at_default_scale(seed):
    inst = generate_instance(ScenarioConfig(seed=seed))
    plan = solve_p1_greedy(inst)
    assert check_feasibility(inst, plan).passed
    assert 0 <= plan_throughput(plan, inst) <= sum(r.qos.rate_mbps for r in inst.requests)


def test_throughput_sums_rates():
    nodes = [(1, 0, 0, BUYER), (2, 0, 50, BUYER), (3, 100, 0, SERVER)]
    reqs = [(1, 1, 1.0, 1.0, 4.0, 1.0), (2, 1, 1.0, 1.0, 8.0, 1.0)]
    inst = make_instance(nodes, reqs, [(1, 3, 6.0, 8.0)], n_bands=2)
    assert plan_throughput(AllocationPlan({(1, 1): 1, (2, 1): 1}), inst) == 12.0
    assert plan_throughput(AllocationPlan(), inst) == 0.0
