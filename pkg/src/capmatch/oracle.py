"""Ground truth at desk scale: exact optimum, rearrangement check, monotonicity
audits and approximation ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .core import Instance, Matching, PositionAuctionInstance, realized
from .mechanisms import (
    g_vmax,
    greedy_by_density,
    greedy_by_value,
    max_greedy,
    mechanism1,
    mechanism2,
    mechanism3,
    mechanism4,
)

__all__ = [
    "MAX_ORACLE_AGENTS",
    "MAX_ORACLE_POSITIONS",
    "OracleGuardError",
    "ZeroWelfareError",
    "optimal_matching",
    "position_optimum",
    "max_weight_assignment",
    "RearrangementResult",
    "rearrangement_check",
    "MonotonicityReport",
    "ALLOCATION_RULES",
    "assigned_position",
    "assigned_ctr",
    "candidate_bids",
    "probe_bids",
    "monotonicity_audit",
    "RATIO_RULES",
    "rule_welfare",
    "RatioReport",
    "ratio_report",
    "approximation_ratio",
]

MAX_ORACLE_AGENTS = 12
MAX_ORACLE_POSITIONS = 8


class OracleGuardError(ValueError):
    pass


class ZeroWelfareError(ZeroDivisionError):
    pass


# -- exact optimum ---------------------------------------------------------------


def _lcm_of_denominators(xs) -> int:
    out = 1
    for x in xs:
        out = math.lcm(out, x.denominator)
    return out


def max_weight_assignment(weights: Sequence[Sequence[int]]) -> list[tuple[int, int]]:
    """Maximum-weight assignment of an integer matrix (0-based (row, col) pairs).

    Hungarian algorithm with potentials; weights must be non-negative so that a
    full assignment of the shorter side is never worse than a partial one.
    """
    n = len(weights)
    m = len(weights[0]) if n else 0
    if n == 0 or m == 0:
        return []
    if n > m:
        return [(r, c) for c, r in max_weight_assignment([list(col) for col in zip(*weights)])]
    big = max(max(row) for row in weights)
    cost = [[0] * (m + 1)] + [[0] + [big - w for w in row] for row in weights]
    inf = float("inf")
    u = [0] * (n + 1)
    v = [0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = cost[i0]
            ui0 = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    return sorted((p[j] - 1, j - 1) for j in range(1, m + 1) if p[j])


def _assignment_optimum(instance: Instance) -> Matching:
    """Optimum when every agent fits at once: independent assignment per connected component."""
    n, k = instance.n_agents, instance.n_positions
    scale = _lcm_of_denominators(v for row in instance.values for v in row)
    adj_agents = [[j for j in range(k) if instance.values[i][j] > 0] for i in range(n)]
    adj_positions = [[i for i in range(n) if instance.values[i][j] > 0] for j in range(k)]
    seen_a = [False] * n
    seen_p = [False] * k
    pairs = []
    for start in range(n):
        if seen_a[start] or not adj_agents[start]:
            continue
        comp_a, comp_p = [], []
        stack = [("a", start)]
        seen_a[start] = True
        while stack:
            side, x = stack.pop()
            if side == "a":
                comp_a.append(x)
                for j in adj_agents[x]:
                    if not seen_p[j]:
                        seen_p[j] = True
                        stack.append(("p", j))
            else:
                comp_p.append(x)
                for i in adj_positions[x]:
                    if not seen_a[i]:
                        seen_a[i] = True
                        stack.append(("a", i))
        comp_a.sort()
        comp_p.sort()
        w = [[int(instance.values[i][j] * scale) for j in comp_p] for i in comp_a]
        for r, c in max_weight_assignment(w):
            if w[r][c] > 0:
                pairs.append((comp_a[r] + 1, comp_p[c] + 1))
    return Matching.from_pairs(instance, pairs)


def optimal_matching(instance: Instance) -> Matching:
    """Maximum-welfare feasible matching; lexicographically smallest pair set among optima.

    Exhaustive branch and bound over agents (exact integer arithmetic after
    scaling), guarded to 12 agents and 8 positions.  Larger instances are only
    accepted when all agents fit together, where the problem is a plain
    assignment problem.
    """
    n, k = instance.n_agents, instance.n_positions
    if n > MAX_ORACLE_AGENTS or k > MAX_ORACLE_POSITIONS:
        if sum(instance.sizes) <= instance.capacity:
            return _assignment_optimum(instance)
        raise OracleGuardError(
            f"exhaustive optimum limited to {MAX_ORACLE_AGENTS} agents and "
            f"{MAX_ORACLE_POSITIONS} positions (got {n} agents, {k} positions)"
        )
    vscale = _lcm_of_denominators(v for row in instance.values for v in row)
    sscale = _lcm_of_denominators(list(instance.sizes) + [instance.capacity])
    vals = [[int(v * vscale) for v in row] for row in instance.values]
    sizes = [int(s * sscale) for s in instance.sizes]
    cap = int(instance.capacity * sscale)
    options = [[j for j in range(k) if vals[i][j] > 0] if sizes[i] <= cap else [] for i in range(n)]
    suffix_bound = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_bound[i] = suffix_bound[i + 1] + max((vals[i][j] for j in options[i]), default=0)

    best_w = -1
    best_pairs: tuple = ()
    chosen: list[tuple[int, int]] = []
    taken = [False] * k

    def search(i: int, used: int, w: int):
        nonlocal best_w, best_pairs
        if w + suffix_bound[i] < best_w:
            return
        if i == n:
            pairs = tuple(chosen)
            if w > best_w or (w == best_w and pairs < best_pairs):
                best_w, best_pairs = w, pairs
            return
        if used + sizes[i] <= cap:
            for j in options[i]:
                if not taken[j]:
                    taken[j] = True
                    chosen.append((i + 1, j + 1))
                    search(i + 1, used + sizes[i], w + vals[i][j])
                    chosen.pop()
                    taken[j] = False
        search(i + 1, used, w)

    search(0, 0, 0)
    return Matching.from_pairs(instance, best_pairs)


def position_optimum(instance: PositionAuctionInstance) -> Matching:
    """Optimum of a position auction by subset selection with sorted placement.

    A chosen set is best placed with values sorted decreasingly onto the top
    CTRs, so a dynamic program over agents in value order only needs, per
    number of chosen agents, the Pareto front of (used capacity, welfare).
    """
    k = instance.n_positions
    order = sorted(
        (i for i in range(instance.n_agents) if instance.values[i] > 0 and instance.sizes[i] <= instance.capacity),
        key=lambda i: (-instance.values[i], i),
    )
    # fronts[c]: list of (used, welfare, chain) with chain a linked list of agent ids
    fronts: list[list[tuple[Fraction, Fraction, tuple | None]]] = [[(Fraction(0), Fraction(0), None)]]
    for i in order:
        v, s = instance.values[i], instance.sizes[i]
        new_fronts = [list(f) for f in fronts] + [[]]
        for c, front in enumerate(fronts):
            if c >= k:
                break
            gain = v * instance.ctrs[c]
            for used, w, chain in front:
                if used + s <= instance.capacity:
                    new_fronts[c + 1].append((used + s, w + gain, (i, chain)))
        if not new_fronts[-1]:
            new_fronts.pop()
        fronts = [_pareto(f) for f in new_fronts]
    best = None
    for front in fronts:
        for used, w, chain in front:
            if best is None or w > best[0]:
                best = (w, chain)
    agents = []
    chain = best[1] if best else None
    while chain is not None:
        agents.append(chain[0])
        chain = chain[1]
    agents.reverse()
    pairs = [(i + 1, pos + 1) for pos, i in enumerate(agents)]
    return Matching.from_pairs(realized(instance), pairs)


def _pareto(front):
    front = sorted(front, key=lambda t: (t[0], -t[1]))
    kept = []
    for state in front:
        if not kept or state[1] > kept[-1][1]:
            kept.append(state)
    return kept


# -- rearrangement inequality -----------------------------------------------------


@dataclass(frozen=True)
class RearrangementResult:
    applicable: bool
    holds: bool | None  # None when not applicable


def rearrangement_check(A, B) -> RearrangementResult:
    """If every density in A beats every density in B and A is at least as large, A's value dominates."""
    A = [(Fraction(v), Fraction(s)) for v, s in A]
    B = [(Fraction(v), Fraction(s)) for v, s in B]
    for v, s in A + B:
        if v <= 0 or s <= 0:
            raise ValueError("values and sizes must be positive")
    dens_a = [v / s for v, s in A]
    dens_b = [v / s for v, s in B]
    density_dominance = not A or not B or min(dens_a) > max(dens_b)
    size_dominance = sum(s for _, s in A) >= sum(s for _, s in B)
    if not (density_dominance and size_dominance):
        return RearrangementResult(False, None)
    return RearrangementResult(True, sum(v for v, _ in A) >= sum(v for v, _ in B))


# -- monotonicity ------------------------------------------------------------------

ALLOCATION_RULES: dict[str, Callable[[Instance], Matching]] = {
    "mech1": lambda inst: mechanism1(inst).matching,
    "mech3": lambda inst: mechanism3(inst).matching,
    "mech3-relaxed": lambda inst: mechanism3(inst, relaxed_stop=True).matching,
    "gvmax": g_vmax,
}


def assigned_position(instance: PositionAuctionInstance, agent: int, bid, mechanism: str) -> int | None:
    rule = ALLOCATION_RULES[mechanism]
    return rule(realized(instance.with_bid(agent, bid))).position_of(agent)


def assigned_ctr(instance: PositionAuctionInstance, agent: int, bid, mechanism: str) -> Fraction:
    return instance.ctr(assigned_position(instance, agent, bid, mechanism))


def candidate_bids(instance: PositionAuctionInstance, agent: int) -> list[Fraction]:
    """Bids at which one of the agent's comparisons can tie: equal values or equal densities."""
    if not 1 <= agent <= instance.n_agents:
        raise ValueError(f"unknown agent {agent}")
    me = agent - 1
    out = {Fraction(0)}
    s_me = instance.sizes[me]
    for other in range(instance.n_agents):
        if other == me:
            continue
        v, s = instance.values[other], instance.sizes[other]
        out.add(v)
        for a in instance.ctrs:
            if a == 0:
                continue
            for a_other in instance.ctrs:
                out.add(v * a_other * s_me / (a * s))
    return sorted(out)


def probe_bids(candidates: Sequence[Fraction]) -> list[Fraction]:
    """Candidates, the midpoints between neighbours, and one bid above the largest."""
    probes = []
    for lo, hi in zip(candidates, candidates[1:]):
        probes += [lo, (lo + hi) / 2]
    probes.append(candidates[-1])
    probes.append(candidates[-1] * 2 + 1)
    return probes


@dataclass(frozen=True)
class MonotonicityReport:
    agent: int
    mechanism: str
    probes: tuple[tuple[Fraction, Fraction], ...]  # (bid, assigned CTR), 0 = unassigned
    violations: tuple[tuple[Fraction, Fraction], ...]  # (lower bid, higher bid) with a CTR drop

    @property
    def ok(self) -> bool:
        return not self.violations

    def ctr_at(self, bid) -> Fraction:
        for b, ctr in self.probes:
            if b == bid:
                return ctr
        raise KeyError(f"bid {bid} was not probed")

    def to_csv(self) -> str:
        lines = ["bid,assigned_ctr"] + [f"{b},{c}" for b, c in self.probes]
        lines.append("# violations: " + (" ".join(f"{lo}->{hi}" for lo, hi in self.violations) or "none"))
        return "\n".join(lines) + "\n"


def monotonicity_audit(
    instance: PositionAuctionInstance, agent: int, mechanism: str, extra_bids: Sequence = ()
) -> MonotonicityReport:
    """Probe the agent's CTR over the tie grid (plus ``extra_bids``) and list every drop."""
    if mechanism not in ALLOCATION_RULES:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    bids = sorted(set(probe_bids(candidate_bids(instance, agent))) | {Fraction(b) for b in extra_bids})
    probes = tuple((b, assigned_ctr(instance, agent, b, mechanism)) for b in bids)
    violations = tuple(
        (lo, hi) for (lo, c_lo), (hi, c_hi) in zip(probes, probes[1:]) if c_hi < c_lo
    )
    return MonotonicityReport(agent, mechanism, probes, violations)


# -- approximation ratios ----------------------------------------------------------


def rule_welfare(instance: Instance, rule: str) -> Fraction:
    """Welfare (expected welfare for randomized rules) of a named rule."""
    if rule == "mech2-expected":
        return mechanism2(instance, 0).expected_welfare
    if rule == "mech4-expected":
        return mechanism4(instance, 0).expected_welfare
    simple = {
        "mech1": lambda: mechanism1(instance).matching,
        "mech3": lambda: mechanism3(instance).matching,
        "max-greedy": lambda: max_greedy(instance),
        "greedy-density": lambda: greedy_by_density(instance),
        "greedy-value": lambda: greedy_by_value(instance),
        "gvmax": lambda: g_vmax(instance),
    }
    if rule not in simple:
        raise ValueError(f"unknown rule {rule!r}")
    return simple[rule]().welfare


RATIO_RULES = ("mech2-expected", "mech4-expected", "max-greedy", "mech1", "mech3", "gvmax", "greedy-density", "greedy-value")


@dataclass(frozen=True)
class RatioReport:
    rule: str
    opt: Matching
    rule_welfare: Fraction

    @property
    def ratio(self) -> Fraction:
        if self.rule_welfare == 0:
            if self.opt.welfare == 0:
                return Fraction(1)
            raise ZeroWelfareError(f"{self.rule} has zero welfare while OPT = {self.opt.welfare}")
        return self.opt.welfare / self.rule_welfare


def ratio_report(instance: Instance | PositionAuctionInstance, rule: str) -> RatioReport:
    if isinstance(instance, PositionAuctionInstance):
        opt = position_optimum(instance)
        general = realized(instance)
    else:
        opt = optimal_matching(instance)
        general = instance
    return RatioReport(rule, opt, rule_welfare(general, rule))


def approximation_ratio(instance: Instance | PositionAuctionInstance, rule: str) -> Fraction:
    """OPT divided by the rule's (expected) welfare; 1 when both are zero."""
    return ratio_report(instance, rule).ratio
