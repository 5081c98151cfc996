"""Myerson threshold payments for the monotone position-auction rules."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .core import PositionAuctionInstance, as_rational, realized
from .oracle import ALLOCATION_RULES, assigned_ctr, candidate_bids, probe_bids

__all__ = [
    "MONOTONE_RULES",
    "NonMonotoneError",
    "AllocationCurve",
    "allocation_curve",
    "myerson_payment",
    "jump_sum_payment",
    "mechanism4_payment",
    "TruthfulnessReport",
    "truthfulness_audit",
    "payment_rows",
    "payments_csv",
]

MONOTONE_RULES = ("mech3", "gvmax")
ARM_RULES = {"mech-greedy": "mech3", "g-vmax": "gvmax"}


class NonMonotoneError(ValueError):
    """Raised when payments are requested for a rule whose allocation is not monotone."""


@dataclass(frozen=True)
class AllocationCurve:
    """Assigned CTR as a step function of one agent's bid.

    ``ctr_per_interval[0]`` covers bids below ``breakpoints[0]`` (it is 0, since
    negative bids win nothing), ``ctr_per_interval[m]`` everything above the last
    breakpoint.  Values exactly at a breakpoint depend on tie-breaking and are not
    stored.
    """

    agent: int
    mechanism: str
    breakpoints: tuple[Fraction, ...]
    ctr_per_interval: tuple[Fraction, ...]

    def interval_ctr(self, bid) -> Fraction:
        """CTR just left of ``bid`` (on the open interval ending at or containing it)."""
        bid = as_rational(bid)
        idx = 0
        while idx < len(self.breakpoints) and self.breakpoints[idx] < bid:
            idx += 1
        return self.ctr_per_interval[idx]

    def integral(self, upper) -> Fraction:
        """Exact integral of the curve from 0 to ``upper``."""
        upper = as_rational(upper)
        edges = [Fraction(0)] + [z for z in self.breakpoints if z > 0]
        total = Fraction(0)
        for idx, lo in enumerate(edges):
            if lo >= upper:
                break
            hi = edges[idx + 1] if idx + 1 < len(edges) else upper
            total += self.interval_ctr((lo + min(hi, upper)) / 2) * (min(hi, upper) - lo)
        return total

    def is_monotone(self) -> bool:
        return all(a <= b for a, b in zip(self.ctr_per_interval, self.ctr_per_interval[1:]))


def _check_rule(mechanism: str):
    if mechanism not in MONOTONE_RULES:
        raise NonMonotoneError(f"payments are defined only for monotone rules {MONOTONE_RULES}, not {mechanism!r}")


def allocation_curve(instance: PositionAuctionInstance, agent: int, mechanism: str) -> AllocationCurve:
    _check_rule(mechanism)
    cands = candidate_bids(instance, agent)
    mids = [(lo + hi) / 2 for lo, hi in zip(cands, cands[1:])] + [cands[-1] * 2 + 1]
    ctrs = [Fraction(0)] + [assigned_ctr(instance, agent, b, mechanism) for b in mids]
    breakpoints, per_interval = [], [ctrs[0]]
    for z, before, after in zip(cands, ctrs, ctrs[1:]):
        if after != before:
            breakpoints.append(z)
            per_interval.append(after)
    curve = AllocationCurve(agent, mechanism, tuple(breakpoints), tuple(per_interval))
    if not curve.is_monotone():
        raise NonMonotoneError(
            f"{mechanism}: allocation of agent {agent} is not monotone "
            f"(breakpoints {curve.breakpoints}, CTRs {curve.ctr_per_interval})"
        )
    return curve


def myerson_payment(
    instance: PositionAuctionInstance, agent: int, mechanism: str, bid=None, curve: AllocationCurve | None = None
) -> Fraction:
    """``b * x(b) - integral_0^b x(t) dt`` at ``bid`` (default: the agent's recorded value)."""
    _check_rule(mechanism)
    bid = instance.values[agent - 1] if bid is None else as_rational(bid)
    won = assigned_ctr(instance, agent, bid, mechanism)
    if won == 0:
        return Fraction(0)
    curve = curve or allocation_curve(instance, agent, mechanism)
    return bid * won - curve.integral(bid)


def jump_sum_payment(curve: AllocationCurve, bid, won: Fraction) -> Fraction:
    """Same payment as a sum of thresholds times CTR increments; ``won`` is x(bid)."""
    bid = as_rational(bid)
    if won == 0:
        return Fraction(0)
    total = Fraction(0)
    for z, before, after in zip(curve.breakpoints, curve.ctr_per_interval, curve.ctr_per_interval[1:]):
        if z < bid:
            total += z * (after - before)
    return total + bid * (won - curve.interval_ctr(bid))


def mechanism4_payment(instance: PositionAuctionInstance, agent: int, drawn_arm: str) -> Fraction:
    """Payment charged once the randomized combiner has drawn its arm."""
    try:
        mechanism = ARM_RULES[drawn_arm]
    except KeyError:
        raise ValueError(f"unknown arm {drawn_arm!r}; expected one of {sorted(ARM_RULES)}") from None
    return myerson_payment(instance, agent, mechanism)


@dataclass(frozen=True)
class TruthfulnessReport:
    agent: int
    mechanism: str
    truthful_utility: Fraction
    deviations: tuple[tuple[Fraction, Fraction], ...]  # (bid, utility) strictly above truthful

    @property
    def ok(self) -> bool:
        return not self.deviations


def truthfulness_audit(
    instance: PositionAuctionInstance,
    agent: int,
    mechanism: str,
    payment: Callable[[Fraction], Fraction] | None = None,
) -> TruthfulnessReport:
    """Compare truthful utility with every tie-grid deviation.

    ``payment(bid)`` overrides the payment rule (used for negative controls).
    """
    _check_rule(mechanism)
    value = instance.values[agent - 1]
    curve = allocation_curve(instance, agent, mechanism)
    if payment is None:
        def payment(b):
            won = assigned_ctr(instance, agent, b, mechanism)
            return Fraction(0) if won == 0 else b * won - curve.integral(b)

    def utility(b):
        return assigned_ctr(instance, agent, b, mechanism) * value - payment(b)

    truthful = utility(value)
    bids = sorted(set(probe_bids(candidate_bids(instance, agent))) - {value})
    deviations = []
    for b in bids:
        u = utility(b)
        if u > truthful:
            deviations.append((b, u))
    return TruthfulnessReport(agent, mechanism, truthful, tuple(deviations))


def payment_rows(instance: PositionAuctionInstance, mechanism: str) -> list[dict]:
    """One row per agent: position, CTR, value, payment and utility under the rule."""
    _check_rule(mechanism)
    matching = ALLOCATION_RULES[mechanism](realized(instance))
    rows = []
    for agent in range(1, instance.n_agents + 1):
        position = matching.position_of(agent)
        ctr = instance.ctr(position)
        value = instance.values[agent - 1]
        pay = myerson_payment(instance, agent, mechanism) if position is not None else Fraction(0)
        rows.append(
            {"agent": agent, "position": position, "ctr": ctr, "value": value, "payment": pay, "utility": ctr * value - pay}
        )
    return rows


def payments_csv(instance: PositionAuctionInstance, mechanism: str) -> str:
    lines = ["agent,position,ctr,value,payment,utility"]
    for r in payment_rows(instance, mechanism):
        pos = "" if r["position"] is None else r["position"]
        lines.append(f"{r['agent']},{pos},{r['ctr']},{r['value']},{r['payment']},{r['utility']}")
    return "\n".join(lines) + "\n"
