from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given

from capmatch.core import Instance, PositionAuctionInstance, realized, validate
from capmatch.instances import (
    CATALOG,
    InstanceFormatError,
    ParameterError,
    digest,
    dumps,
    expected_values,
    loads,
    paper_instance,
    parse,
    random_family_instance,
    random_instance,
    serialize,
)
from capmatch.mechanisms import g_vmax, greedy_by_value, max_greedy, mechanism1, mechanism3
from capmatch.oracle import optimal_matching, position_optimum, rule_welfare
from strategies import general_instances, position_instances


def test_capacity_trap_values():
    inst = paper_instance("prop31", W=100, eps=Fraction(1, 100))
    assert inst.sizes == (1, 100)
    assert inst.values == ((Fraction(101, 100), 0), (0, 100))


def test_non_monotone_instance_values():
    P = paper_instance("prop41", eps=Fraction(1, 100))
    assert (P.values[4], P.sizes[4]) == (Fraction(11, 2), 4)
    assert P.ctrs == (1, Fraction(99, 100), Fraction(98, 100), Fraction(1, 2))
    assert P.capacity == 6


def test_parameter_guards():
    paper_instance("thm34-lb", eps=Fraction(1, 1000), delta1=Fraction(1, 10**4), delta2=Fraction(1, 10**4))
    with pytest.raises(ParameterError, match="delta2"):
        paper_instance("thm34-lb", delta2=Fraction(1, 1000))
    with pytest.raises(ParameterError, match="delta1"):
        paper_instance("thm34-lb", delta1=Fraction(1, 1000))
    with pytest.raises(ParameterError):
        paper_instance("appendixA", l=2, eps=Fraction(1, 2))
    with pytest.raises(ParameterError, match="unknown instance"):
        paper_instance("nope")
    with pytest.raises(ParameterError, match="unknown parameter"):
        paper_instance("prop31", bogus=1)


@pytest.mark.parametrize("name", list(CATALOG))
def test_catalog_builds_are_valid_and_round_trip(name):
    inst = paper_instance(name)
    assert parse(serialize(inst)) == inst
    assert loads(dumps(inst)) == inst


def _rule_welfare(inst, rule):
    if isinstance(inst, PositionAuctionInstance):
        if rule == "opt":
            return position_optimum(inst).welfare
        return rule_welfare(realized(inst), rule)
    if rule == "opt":
        return optimal_matching(inst).welfare
    return rule_welfare(inst, rule)


@pytest.mark.parametrize("name", [n for n in CATALOG if n not in ("thm34-lb",)])
def test_catalog_expectations_hold(name):
    inst = paper_instance(name)
    for rule, target in expected_values(name).items():
        assert _rule_welfare(inst, rule) == target, rule


def test_randomized_lower_bound_expectations():
    # every stated target holds except the optimum, which is 9 + eps rather than 9
    inst = paper_instance("thm34-lb")
    exp = expected_values("thm34-lb")
    for rule in ("mech1", "gvmax", "mech2-expected"):
        assert _rule_welfare(inst, rule) == exp[rule]
    assert _rule_welfare(inst, "opt") == exp["opt"] + Fraction(1, 1000)


def test_heavy_light_perturbed_variant():
    P = paper_instance("appendixA", l=3, eps=Fraction(1, 100), perturbed=True)
    assert len(set(P.values)) == P.n_agents
    assert max_greedy(realized(P)).welfare == greedy_by_value(realized(P)).welfare


def test_serialized_form():
    doc = serialize(paper_instance("prop31", W=100, eps=Fraction(1, 100)))
    assert doc["kind"] == "general" and doc["capacity"] == "100"
    assert doc["agents"][0] == {"id": 1, "size": "1", "values": ["101/100", "0"]}


def test_parse_errors_name_the_field():
    base = {"kind": "position-auction", "capacity": "2", "ctrs": ["1", "1"],
            "agents": [{"id": 1, "value": "3", "size": "1"}]}
    with pytest.raises(InstanceFormatError, match=r"^\$\.ctrs\[1\]: CTRs not strictly decreasing"):
        parse(base)
    bad = dict(base, ctrs=["1"], agents=[{"id": 1, "value": "3", "size": "0"}])
    with pytest.raises(InstanceFormatError, match=r"^\$\.agents\[0\]\.size"):
        parse(bad)
    bad = dict(base, ctrs=["1"], agents=[{"id": 2, "value": "3", "size": "1"}])
    with pytest.raises(InstanceFormatError, match=r"^\$\.agents\[0\]\.id"):
        parse(bad)
    bad = dict(base, ctrs=["1"], agents=[{"id": 1, "value": 0.5, "size": "1"}])
    with pytest.raises(InstanceFormatError, match=r"^\$\.agents\[0\]\.value"):
        parse(bad)
    with pytest.raises(InstanceFormatError, match=r"^\$\.kind"):
        parse(dict(base, kind="other", ctrs=["1"]))
    with pytest.raises(InstanceFormatError, match="invalid JSON"):
        loads("{")


def test_decimal_strings_are_exact():
    doc = {"kind": "position-auction", "capacity": "1", "ctrs": ["1", "0.45"],
           "agents": [{"id": 1, "value": "2", "size": "1"}]}
    assert parse(doc).ctrs == (1, Fraction(9, 20))


def test_digest_is_content_hash():
    a = paper_instance("prop31")
    assert digest(a) == digest(loads(dumps(a)))
    assert digest(a) != digest(paper_instance("prop31", W=50))


def test_random_instances_are_deterministic_and_valid():
    assert random_instance(5, 6, 4) == random_instance(5, 6, 4)
    for seed in range(1000):
        P = random_instance(seed, 6, 4, "position")
        assert all(a > b for a, b in zip(P.ctrs, P.ctrs[1:]))
        inst = realized(P)
        for m in (mechanism1(inst).matching, mechanism3(inst).matching, g_vmax(inst)):
            assert validate(inst, m) == []
    with pytest.raises(ValueError):
        random_instance(0, 3, 2, capacity_factor=4)
    with pytest.raises(ValueError):
        random_instance(0, 3, 2, kind="other")


def test_family_instances_stay_in_bounds():
    for seed in range(200):
        inst = random_family_instance("random-general", seed, 7, 4)
        assert isinstance(inst, Instance) and inst.n_agents <= 7 and inst.n_positions <= 4
        P = random_family_instance("random-position", seed, 6, 4)
        assert isinstance(P, PositionAuctionInstance) and P.n_agents <= 6 and P.n_positions <= 4


@given(general_instances())
def test_general_round_trip(inst):
    assert loads(json.dumps(serialize(inst))) == inst


@given(position_instances())
def test_position_round_trip(P):
    assert loads(dumps(P)) == P
