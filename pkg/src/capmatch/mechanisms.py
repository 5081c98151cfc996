"""Allocation rules: greedy baselines, G(v_max), the replacement greedy and its
monotone variant, and the two randomized combiners."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

from .core import (
    DensityEntry,
    Instance,
    Matching,
    PositionAuctionInstance,
    density_order,
    realized,
    validate,
)

__all__ = [
    "TraceStep",
    "Trace",
    "RandomizedOutcome",
    "greedy_by_density",
    "greedy_by_value",
    "max_greedy",
    "g_vmax",
    "mechanism1",
    "mechanism3",
    "mechanism2",
    "mechanism4",
    "replay",
    "structure_check",
    "MECHANISM2_WEIGHT",
    "MECHANISM4_WEIGHT",
]

Action = Literal["assigned", "replaced", "skipped", "stopped"]

# probability of the replacement-greedy arm
MECHANISM2_WEIGHT = Fraction(1, 2)
MECHANISM4_WEIGHT = Fraction(1, 4)


@dataclass(frozen=True)
class TraceStep:
    index: int
    entry: DensityEntry
    action: Action
    displaced: int | None
    available: Fraction  # free capacity after the step

    def format(self) -> str:
        action = f"replaced:{self.displaced}" if self.action == "replaced" else self.action
        return (
            f"step={self.index} pair=({self.entry.agent},{self.entry.position}) "
            f"d={self.entry.density} action={action} w={self.available}"
        )


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]
    matching: Matching
    stop_reason: Literal["capacity-stop", "list-exhausted"]

    @property
    def last_examined(self) -> DensityEntry | None:
        return self.steps[-1].entry if self.steps else None

    def format(self) -> str:
        return "\n".join(step.format() for step in self.steps)


@dataclass(frozen=True)
class RandomizedOutcome:
    drawn_arm: Literal["mech-greedy", "g-vmax"]
    matching: Matching
    expected_welfare: Fraction
    greedy_arm: Matching = field(repr=False)
    vmax_arm: Matching = field(repr=False)
    greedy_weight: Fraction = Fraction(1, 2)


# -- single-pass greedy baselines -------------------------------------------


def _single_pass(instance: Instance, order) -> Matching:
    used_agents: set[int] = set()
    used_positions: set[int] = set()
    used = Fraction(0)
    pairs = []
    for i, j in order:
        if i in used_agents or j in used_positions:
            continue
        s = instance.size(i)
        if used + s > instance.capacity:
            continue
        used += s
        used_agents.add(i)
        used_positions.add(j)
        pairs.append((i, j))
    return Matching.from_pairs(instance, pairs)


def greedy_by_density(instance: Instance) -> Matching:
    return _single_pass(instance, (e.pair for e in density_order(instance)))


def greedy_by_value(instance: Instance) -> Matching:
    order = sorted(
        ((i, j) for i in range(1, instance.n_agents + 1) for j in range(1, instance.n_positions + 1)
         if instance.value(i, j) > 0),
        key=lambda p: (-instance.value(*p), p[0], p[1]),
    )
    return _single_pass(instance, order)


def max_greedy(instance: Instance) -> Matching:
    """Better of the two greedy arms; the density arm wins exact ties."""
    by_density = greedy_by_density(instance)
    by_value = greedy_by_value(instance)
    return by_value if by_value.welfare > by_density.welfare else by_density


def g_vmax(instance: Instance) -> Matching:
    """The single highest-value pair whose agent fits into the capacity."""
    best = None
    for i in range(1, instance.n_agents + 1):
        if instance.size(i) > instance.capacity:
            continue
        for j in range(1, instance.n_positions + 1):
            v = instance.value(i, j)
            if v > 0 and (best is None or v > best[0]):
                best = (v, i, j)
    if best is None:
        return Matching.empty()
    return Matching.from_pairs(instance, [(best[1], best[2])])


# -- replacement greedy (Mechanisms 1 and 3) --------------------------------


def _replacement_greedy(instance: Instance, monotone: bool, relaxed_stop: bool) -> Trace:
    order = density_order(instance)
    sizes = instance.sizes
    values = instance.values
    rank = {e.pair: r for r, e in enumerate(order)}
    entries_of: list[list[int]] = [[] for _ in range(instance.n_agents)]
    for r, e in enumerate(order):
        entries_of[e.agent - 1].append(r)

    in_pool = [True] * len(order)
    heap = list(range(len(order)))  # sorted list is already a heap
    available = instance.capacity
    occupant: dict[int, int] = {}
    position_of: dict[int, int] = {}
    ever_assigned: list[set[int]] = [set() for _ in range(instance.n_agents)]
    steps: list[TraceStep] = []
    stop_reason = "list-exhausted"

    def log(entry, action, displaced=None):
        steps.append(TraceStep(len(steps) + 1, entry, action, displaced, available))

    def take(agent, position):
        occupant[position] = agent
        position_of[agent] = position
        ever_assigned[agent - 1].add(position)
        for r in entries_of[agent - 1]:
            in_pool[r] = False

    while heap:
        r = heapq.heappop(heap)
        if not in_pool[r]:
            continue
        in_pool[r] = False
        entry = order[r]
        i, j = entry.agent, entry.position
        s_i = sizes[i - 1]
        current = occupant.get(j)

        if current is None:
            if available - s_i < 0:
                if relaxed_stop:
                    log(entry, "skipped")
                    continue
                stop_reason = "capacity-stop"
                log(entry, "stopped")
                break
            available -= s_i
            take(i, j)
            log(entry, "assigned")
            continue

        s_cur = sizes[current - 1]
        if monotone:
            fits = available - s_i >= 0
        else:
            fits = available + s_cur - s_i >= 0
        if not fits:
            if relaxed_stop:
                log(entry, "skipped")
                continue
            stop_reason = "capacity-stop"
            log(entry, "stopped")
            break

        v_new = values[i - 1][j - 1]
        v_old = values[current - 1][j - 1]
        if monotone:
            replace = v_new > v_old or (
                v_new == v_old and (s_i < s_cur or (s_i == s_cur and r < rank[(current, j)]))
            )
        else:
            replace = v_new > v_old and s_i >= s_cur
        if not replace:
            log(entry, "skipped")
            continue

        available += s_cur - s_i
        del position_of[current]
        take(i, j)
        for rr in entries_of[current - 1]:
            if not in_pool[rr] and order[rr].position not in ever_assigned[current - 1]:
                in_pool[rr] = True
                heapq.heappush(heap, rr)
        log(entry, "replaced", current)

    matching = Matching.from_pairs(instance, position_of.items())
    return Trace(tuple(steps), matching, stop_reason)


def mechanism1(instance: Instance) -> Trace:
    """Density-ordered greedy with value-improving replacements."""
    return _replacement_greedy(instance, monotone=False, relaxed_stop=False)


def mechanism3(instance: Instance, relaxed_stop: bool = False) -> Trace:
    """Monotone variant: the incoming agent must fit before the occupant leaves.

    ``relaxed_stop`` skips a non-fitting entry instead of stopping; that variant
    is not monotone and exists only to exhibit why the stop matters.
    """
    return _replacement_greedy(instance, monotone=True, relaxed_stop=relaxed_stop)


def _combine(greedy: Matching, vmax: Matching, weight: Fraction, pick_greedy: bool) -> RandomizedOutcome:
    expected = weight * greedy.welfare + (1 - weight) * vmax.welfare
    return RandomizedOutcome(
        drawn_arm="mech-greedy" if pick_greedy else "g-vmax",
        matching=greedy if pick_greedy else vmax,
        expected_welfare=expected,
        greedy_arm=greedy,
        vmax_arm=vmax,
        greedy_weight=weight,
    )


def mechanism2(instance: Instance, coin: int) -> RandomizedOutcome:
    """Fair coin between the replacement greedy (coin 0) and G(v_max) (coin 1)."""
    if coin not in (0, 1):
        raise ValueError("coin must be 0 or 1")
    return _combine(mechanism1(instance).matching, g_vmax(instance), MECHANISM2_WEIGHT, coin == 0)


def mechanism4(instance: Instance, draw) -> RandomizedOutcome:
    """``draw`` uniform in [0, 1): below 1/4 picks the monotone greedy, else G(v_max)."""
    draw = Fraction(draw)
    if not 0 <= draw < 1:
        raise ValueError("draw must lie in [0, 1)")
    return _combine(
        mechanism3(instance).matching, g_vmax(instance), MECHANISM4_WEIGHT, draw < MECHANISM4_WEIGHT
    )


# -- trace checks ------------------------------------------------------------


def replay(instance: Instance, trace: Trace) -> Matching:
    """Rebuild the final matching from the trace events, checking feasibility at every step."""
    occupant: dict[int, int] = {}
    for step in trace.steps:
        i, j = step.entry.pair
        if step.action == "assigned":
            if j in occupant:
                raise ValueError(f"step {step.index}: position {j} is not empty")
            occupant[j] = i
        elif step.action == "replaced":
            if occupant.get(j) != step.displaced:
                raise ValueError(f"step {step.index}: position {j} not held by {step.displaced}")
            occupant[j] = i
        elif step.action == "stopped" and step is not trace.steps[-1]:
            raise ValueError(f"step {step.index}: events after a stop")
        pairs = [(a, p) for p, a in occupant.items()]
        problems = validate(instance, pairs)
        if problems:
            raise ValueError(f"step {step.index}: infeasible ({problems[0].detail})")
        used = sum((instance.size(a) for a, _ in pairs), Fraction(0))
        if instance.capacity - used != step.available:
            raise ValueError(f"step {step.index}: available space {step.available} != {instance.capacity - used}")
    return Matching.from_pairs(instance, [(a, p) for p, a in occupant.items()])


def structure_check(instance: PositionAuctionInstance, trace: Trace) -> list[str]:
    """Check the prefix, value-ordering and greedy-by-value structure of a monotone-greedy output.

    Returns a list of human-readable violations (empty means the structure holds).
    The threshold entry is the lowest-ranked examined entry that did not stop the run.
    """
    general = realized(instance)
    if validate(general, trace.matching):
        raise ValueError("trace does not match the instance: infeasible matching")
    if replay(general, trace) != trace.matching:
        raise ValueError("trace does not match the instance: replay differs")

    problems: list[str] = []
    occupant = trace.matching.by_position()
    occupied = sorted(occupant)
    if occupied != list(range(1, len(occupied) + 1)):
        problems.append(f"(i) occupied positions {occupied} are not a prefix")
    for a, b in zip(occupied, occupied[1:]):
        va = general.value(occupant[a], a)
        vb = general.value(occupant[b], b)
        if va < vb:
            problems.append(f"(ii) value {va} at position {a} below value {vb} at position {b}")

    order = density_order(general)
    rank = {e.pair: r for r, e in enumerate(order)}
    examined = [rank[s.entry.pair] for s in trace.steps if s.action != "stopped"]
    if not examined:
        return problems
    threshold = max(examined)
    placed: set[int] = set()
    for j in occupied:
        candidates = [
            (-general.value(i, j), rank[(i, j)], i)
            for i in range(1, general.n_agents + 1)
            if i not in placed and (i, j) in rank and rank[(i, j)] <= threshold
        ]
        if not candidates:
            problems.append(f"(iii) position {j}: no eligible agent, holder {occupant[j]}")
        else:
            best = min(candidates)[2]
            if best != occupant[j]:
                problems.append(f"(iii) position {j}: expected agent {best}, found {occupant[j]}")
        placed.add(occupant[j])
    return problems
