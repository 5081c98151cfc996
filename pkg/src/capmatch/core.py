"""Exact domain types for capacity-constrained matching.

All numbers are :class:`fractions.Fraction`; nothing in decision logic is ever
a float.  Agents and positions are numbered from 1 in every public structure.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Rational = Fraction
Pair = tuple[int, int]

__all__ = [
    "Rational",
    "Pair",
    "as_rational",
    "Instance",
    "PositionAuctionInstance",
    "Matching",
    "DensityEntry",
    "Violation",
    "InvalidMatchingError",
    "density_order",
    "welfare",
    "validate",
    "realized",
]


def as_rational(x) -> Fraction:
    """Convert ints, Fractions and exact strings ("3/7", "0.45") to a Fraction.

    Floats are refused: they would smuggle rounding into the decision logic.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} {x!r} to an exact rational")


@dataclass(frozen=True)
class Instance:
    """General capacity-constrained matching input.

    ``values[i][j]`` is the value of agent ``i+1`` at position ``j+1``.
    """

    capacity: Fraction
    sizes: tuple[Fraction, ...]
    values: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "capacity", as_rational(self.capacity))
        object.__setattr__(self, "sizes", tuple(as_rational(s) for s in self.sizes))
        object.__setattr__(
            self, "values", tuple(tuple(as_rational(v) for v in row) for row in self.values)
        )
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if len(self.values) != len(self.sizes):
            raise ValueError("values table needs one row per agent")
        widths = {len(row) for row in self.values}
        if len(widths) > 1:
            raise ValueError("values rows have different lengths")
        for i, s in enumerate(self.sizes, start=1):
            if s <= 0:
                raise ValueError(f"agent {i}: size must be positive")
        for i, row in enumerate(self.values, start=1):
            for j, v in enumerate(row, start=1):
                if v < 0:
                    raise ValueError(f"value ({i},{j}) must be non-negative")

    @property
    def n_agents(self) -> int:
        return len(self.sizes)

    @property
    def n_positions(self) -> int:
        return len(self.values[0]) if self.values else 0

    def value(self, agent: int, position: int) -> Fraction:
        return self.values[agent - 1][position - 1]

    def size(self, agent: int) -> Fraction:
        return self.sizes[agent - 1]


@dataclass(frozen=True)
class PositionAuctionInstance:
    """Single-parameter input: private per-agent values, public sizes and CTRs.

    Values may be zero so that a bid of 0 can be probed; everything else follows
    the usual position-auction assumptions (CTRs strictly decreasing, >= 0).
    """

    values: tuple[Fraction, ...]
    sizes: tuple[Fraction, ...]
    ctrs: tuple[Fraction, ...]
    capacity: Fraction

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(as_rational(v) for v in self.values))
        object.__setattr__(self, "sizes", tuple(as_rational(s) for s in self.sizes))
        object.__setattr__(self, "ctrs", tuple(as_rational(a) for a in self.ctrs))
        object.__setattr__(self, "capacity", as_rational(self.capacity))
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if len(self.values) != len(self.sizes):
            raise ValueError("values and sizes must have one entry per agent")
        if any(s <= 0 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if any(v < 0 for v in self.values):
            raise ValueError("values must be non-negative")
        if any(a < 0 for a in self.ctrs):
            raise ValueError("CTRs must be non-negative")
        if any(a <= b for a, b in zip(self.ctrs, self.ctrs[1:])):
            raise ValueError("CTRs must be strictly decreasing")

    @property
    def n_agents(self) -> int:
        return len(self.values)

    @property
    def n_positions(self) -> int:
        return len(self.ctrs)

    def with_bid(self, agent: int, bid) -> PositionAuctionInstance:
        """Same instance with agent ``agent`` reporting ``bid`` instead of her value."""
        if not 1 <= agent <= self.n_agents:
            raise ValueError(f"unknown agent {agent}")
        values = list(self.values)
        values[agent - 1] = as_rational(bid)
        return PositionAuctionInstance(tuple(values), self.sizes, self.ctrs, self.capacity)

    def ctr(self, position: int | None) -> Fraction:
        """CTR of a position; ``None`` (unassigned) maps to 0."""
        return Fraction(0) if position is None else self.ctrs[position - 1]


@dataclass(frozen=True, order=True)
class DensityEntry:
    agent: int
    position: int
    density: Fraction

    @property
    def pair(self) -> Pair:
        return (self.agent, self.position)

    def sort_key(self):
        return (-self.density, self.agent, self.position)


@dataclass(frozen=True)
class Violation:
    kind: str  # duplicate-agent | duplicate-position | capacity-exceeded | out-of-range
    detail: str


class InvalidMatchingError(ValueError):
    pass


@dataclass(frozen=True)
class Matching:
    pairs: tuple[Pair, ...]
    welfare: Fraction
    used_capacity: Fraction

    @classmethod
    def from_pairs(cls, instance: Instance, pairs: Iterable[Pair]) -> Matching:
        pairs = tuple(sorted((int(i), int(j)) for i, j in pairs))
        return cls(pairs, welfare(instance, pairs), sum((instance.size(i) for i, _ in pairs), Fraction(0)))

    @classmethod
    def empty(cls) -> Matching:
        return cls((), Fraction(0), Fraction(0))

    def position_of(self, agent: int) -> int | None:
        for i, j in self.pairs:
            if i == agent:
                return j
        return None

    def agent_at(self, position: int) -> int | None:
        for i, j in self.pairs:
            if j == position:
                return i
        return None

    def by_position(self) -> dict[int, int]:
        return {j: i for i, j in self.pairs}

    def __len__(self):
        return len(self.pairs)


def density_order(instance: Instance) -> list[DensityEntry]:
    """All positive-value pairs by decreasing density; ties by agent, then position."""
    entries = [
        DensityEntry(i, j, v / instance.sizes[i - 1])
        for i, row in enumerate(instance.values, start=1)
        for j, v in enumerate(row, start=1)
        if v > 0
    ]
    entries.sort(key=DensityEntry.sort_key)
    return entries


def _check_indices(instance: Instance, pairs: Sequence[Pair]) -> list[Violation]:
    out = []
    seen_agents: set[int] = set()
    seen_positions: set[int] = set()
    for i, j in pairs:
        if not (1 <= i <= instance.n_agents and 1 <= j <= instance.n_positions):
            out.append(Violation("out-of-range", f"pair ({i},{j}) outside {instance.n_agents}x{instance.n_positions}"))
            continue
        if i in seen_agents:
            out.append(Violation("duplicate-agent", f"agent {i} assigned twice"))
        if j in seen_positions:
            out.append(Violation("duplicate-position", f"position {j} assigned twice"))
        seen_agents.add(i)
        seen_positions.add(j)
    return out


def welfare(instance: Instance, pairs: Iterable[Pair]) -> Fraction:
    """Exact total value of the pairs; duplicate agents/positions are rejected."""
    pairs = list(pairs)
    bad = _check_indices(instance, pairs)
    if bad:
        raise InvalidMatchingError("; ".join(v.detail for v in bad))
    return sum((instance.value(i, j) for i, j in pairs), Fraction(0))


def validate(instance: Instance, matching: Matching | Iterable[Pair]) -> list[Violation]:
    """Every violated matching invariant; an empty list means feasible."""
    pairs = list(matching.pairs if isinstance(matching, Matching) else matching)
    out = _check_indices(instance, pairs)
    used = sum(
        (instance.size(i) for i, _ in pairs if 1 <= i <= instance.n_agents), Fraction(0)
    )
    if used > instance.capacity:
        out.append(Violation("capacity-exceeded", f"used {used} > capacity {instance.capacity}"))
    return out


def realized(instance: PositionAuctionInstance) -> Instance:
    """General instance with ``values[i][j] = v_i * a_j``."""
    return Instance(
        capacity=instance.capacity,
        sizes=instance.sizes,
        values=tuple(tuple(v * a for a in instance.ctrs) for v in instance.values),
    )
