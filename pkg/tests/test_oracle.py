from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capmatch.core import Instance, PositionAuctionInstance, realized, validate
from capmatch.instances import paper_instance
from capmatch.mechanisms import (
    g_vmax,
    greedy_by_density,
    greedy_by_value,
    max_greedy,
    mechanism1,
    mechanism3,
)
from capmatch.oracle import (
    OracleGuardError,
    ZeroWelfareError,
    approximation_ratio,
    candidate_bids,
    max_weight_assignment,
    monotonicity_audit,
    optimal_matching,
    position_optimum,
    probe_bids,
    ratio_report,
    rearrangement_check,
)
from strategies import general_instances, position_instances


def brute_force(inst: Instance) -> Fraction:
    """Enumerate every partial injection agents -> positions."""
    n, k = inst.n_agents, inst.n_positions
    best = Fraction(0)
    slots = [None] + list(range(1, k + 1))
    for choice in itertools.product(slots, repeat=n):
        used = [j for j in choice if j is not None]
        if len(used) != len(set(used)):
            continue
        pairs = [(i + 1, j) for i, j in enumerate(choice) if j is not None]
        if sum((inst.size(i) for i, _ in pairs), Fraction(0)) > inst.capacity:
            continue
        best = max(best, sum((inst.value(i, j) for i, j in pairs), Fraction(0)))
    return best


def test_optimum_examples():
    m = optimal_matching(paper_instance("prop31"))
    assert m.pairs == ((2, 2),) and m.welfare == 100
    # the stated optimum is 9; the construction actually admits 9 + eps
    assert optimal_matching(paper_instance("thm34-lb")).welfare == 9 + Fraction(1, 1000)
    assert position_optimum(paper_instance("appendixA", l=2)).welfare == 7


def test_optimum_prefers_lexicographically_smallest():
    inst = Instance(1, (1, 1), ((1,), (1,)))
    assert optimal_matching(inst).pairs == ((1, 1),)


def test_guard():
    inst = Instance(1, (1,) * 13, ((1,),) * 13)
    with pytest.raises(OracleGuardError, match="12 agents"):
        optimal_matching(inst)
    # everybody fits: plain assignment, no guard
    roomy = Instance(20, (1,) * 13, tuple((Fraction(i),) for i in range(1, 14)))
    assert optimal_matching(roomy).pairs == ((13, 1),)


def test_max_weight_assignment():
    w = [[4, 1, 3], [2, 0, 5], [3, 2, 2]]
    pairs = max_weight_assignment(w)
    assert sum(w[r][c] for r, c in pairs) == 4 + 5 + 2


@settings(max_examples=150, deadline=None)
@given(general_instances(max_agents=5, max_positions=3))
def test_optimum_matches_brute_force_and_dominates_rules(inst):
    opt = optimal_matching(inst)
    assert validate(inst, opt) == []
    assert opt.welfare == brute_force(inst)
    for m in (mechanism1(inst).matching, mechanism3(inst).matching, g_vmax(inst), max_greedy(inst),
              greedy_by_density(inst), greedy_by_value(inst)):
        assert m.welfare <= opt.welfare


@settings(max_examples=150, deadline=None)
@given(general_instances(max_agents=6, max_positions=4))
def test_randomized_rules_within_their_factors(inst):
    opt = optimal_matching(inst).welfare
    if opt == 0:
        return
    assert approximation_ratio(inst, "mech2-expected") <= 6
    assert approximation_ratio(inst, "mech4-expected") <= 12


@settings(max_examples=150, deadline=None)
@given(position_instances())
def test_position_optimum_matches_exhaustive(P):
    assert position_optimum(P).welfare == optimal_matching(realized(P)).welfare


def test_rearrangement_examples():
    r = rearrangement_check([(4, 1)], [(2, 1)])
    assert r.applicable and r.holds
    assert not rearrangement_check([(3, 1), (3, 1)], [(5, 3)]).applicable
    with pytest.raises(ValueError):
        rearrangement_check([(0, 1)], [(1, 1)])


@given(
    st.lists(st.tuples(st.integers(1, 50), st.integers(1, 10)), min_size=1, max_size=5),
    st.lists(st.tuples(st.integers(1, 50), st.integers(1, 10)), max_size=5),
)
def test_rearrangement_never_fails_when_applicable(A, B):
    r = rearrangement_check(A, B)
    assert r.holds is not False


def test_audit_examples():
    eps = Fraction(1, 100)
    P = paper_instance("prop41", eps=eps)
    r1 = monotonicity_audit(P, 3, "mech1", extra_bids=[3, 4 + eps])
    assert r1.ctr_at(3) == Fraction(1, 2) and r1.ctr_at(4 + eps) == 0
    assert not r1.ok
    assert monotonicity_audit(P, 3, "mech3").ok
    for agent in range(1, P.n_agents + 1):
        assert monotonicity_audit(P, agent, "gvmax").ok
    with pytest.raises(ValueError):
        monotonicity_audit(P, 9, "mech3")


def test_audit_csv():
    P = PositionAuctionInstance((5, 3), (1, 1), (1,), 1)
    text = monotonicity_audit(P, 1, "gvmax").to_csv()
    lines = text.splitlines()
    assert lines[0] == "bid,assigned_ctr"
    # a tie at bid 3 goes to the lower index
    assert lines[1:5] == ["0,0", "3/2,0", "3,1", "7,1"]
    assert lines[-1] == "# violations: none"


def test_probe_bids_cover_midpoints_and_top():
    assert probe_bids([Fraction(0), Fraction(2)]) == [0, 1, 2, 5]
    assert candidate_bids(PositionAuctionInstance((5, 3), (1, 2), (1,), 3), 1) == [0, Fraction(3, 2), 3]


@settings(max_examples=60, deadline=None)
@given(position_instances(max_agents=4, max_positions=3))
def test_monotone_rules_pass_audit(P):
    for agent in range(1, P.n_agents + 1):
        assert monotonicity_audit(P, agent, "mech3").ok
        assert monotonicity_audit(P, agent, "gvmax").ok


def test_ratio_examples():
    inst = paper_instance("thm34-lb")
    eps = Fraction(1, 1000)
    r = approximation_ratio(inst, "mech2-expected")
    assert r == (9 + eps) / (3 + 2 * eps)
    assert Fraction(299, 100) < r < 3
    optimal_for_mech1 = Instance(5, (1, 1), ((3, 1), (1, 2)))
    assert approximation_ratio(optimal_for_mech1, "mech1") == 1
    zero = Instance(1, (2,), ((3,),))
    assert approximation_ratio(zero, "mech1") == 1
    # the top-density entry does not fit, so the replacement greedy stops empty-handed
    stuck = Instance(3, (5, 1), ((10,), (1,)))
    report = ratio_report(stuck, "mech1")
    assert report.rule_welfare == 0 and report.opt.welfare == 1
    with pytest.raises(ZeroWelfareError):
        report.ratio
