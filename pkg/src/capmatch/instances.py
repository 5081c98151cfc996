"""Instance catalog, random families and the JSON instance format."""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .core import Instance, PositionAuctionInstance, as_rational

__all__ = [
    "CatalogEntry",
    "CATALOG",
    "ParameterError",
    "InstanceFormatError",
    "paper_instance",
    "expected_values",
    "random_instance",
    "random_family_instance",
    "serialize",
    "parse",
    "dumps",
    "loads",
    "digest",
]

AnyInstance = Instance | PositionAuctionInstance


class ParameterError(ValueError):
    """Catalog parameters outside the range a construction needs."""


class InstanceFormatError(ValueError):
    """Instance document does not match the schema; message starts with the field path."""


def _require(cond: bool, constraint: str):
    if not cond:
        raise ParameterError(f"constraint violated: {constraint}")


def _count(x, name: str) -> int:
    x = as_rational(x)
    if x.denominator != 1:
        raise ParameterError(f"{name} must be an integer, got {x}")
    return int(x)


# -- constructions -------------------------------------------------------------


def _prop31(W, eps) -> Instance:
    _require(W > 0, "W > 0")
    _require(eps > 0, "eps > 0")
    return Instance(W, (1, W), ((1 + eps, 0), (0, W)))


def _thm34_lb(eps, delta1, delta2) -> Instance:
    _require(eps > 0, "eps > 0")
    _require(0 < delta2 < 3 * eps / (3 + eps), "0 < delta2 < 3*eps/(3+eps)")
    _require(0 < delta1 < eps / (3 + eps), "0 < delta1 < eps/(3+eps)")
    k = 7
    ones = (Fraction(1),) * k
    zeros = (Fraction(0),) * (k - 1)
    values = [
        (Fraction(3),) + zeros,
        (3 + 2 * eps,) + zeros,
        (Fraction(0), 3 + eps) + zeros[1:],
    ] + [ones] * 6
    sizes = [delta1, 3 + delta2, Fraction(3)] + [Fraction(1)] * 5 + [1 - delta1]
    return Instance(Fraction(6), tuple(sizes), tuple(values))


def _prop41(eps) -> PositionAuctionInstance:
    # keeps agent 1's top three entries ahead of agent 2's first one, which the
    # counterexample's trace relies on
    _require(0 < eps < Fraction(1, 12), "0 < eps < 1/12")
    return PositionAuctionInstance(
        values=(Fraction(5), 4 + 2 * eps, Fraction(3), Fraction(4), Fraction(11, 2)),
        sizes=(1, 1, 1, 2, 4),
        ctrs=(Fraction(1), 1 - eps, 1 - 2 * eps, Fraction(1, 2)),
        capacity=Fraction(6),
    )


def _prop46_pos(k, V, eta, eps=None) -> PositionAuctionInstance:
    k = _count(k, "k")
    _require(k >= 2, "k >= 2")
    _require(V > 0, "V > 0")
    if eps is None:
        _require(eta > 0, "eta > 0")
        eps = [j * eta for j in range(k)]
    else:
        eps = [Fraction(0)] + [as_rational(e) for e in eps]
        _require(len(eps) == k, "eps lists one perturbation per position 2..k")
    _require(all(a < b for a, b in zip(eps, eps[1:])), "eps_2 < eps_3 < ... < eps_k")
    _require(eps[-1] < 1, "eps_k < 1")
    ctrs = tuple(1 - e for e in eps)
    return PositionAuctionInstance(
        values=(V,) * k + (V + 1,),
        sizes=(Fraction(1),) * k + (Fraction(k),),
        ctrs=ctrs,
        capacity=Fraction(k),
    )


def _prop46_gen(k, V, eps, s) -> Instance:
    k = _count(k, "k")
    _require(k >= 2 and k % 2 == 0, "k even and >= 2")
    _require(V > 0, "V > 0")
    _require(eps > 0, "eps > 0")
    _require(0 < s and k * s < k, "0 < s and k*s < W = k")
    rows = []
    for i in range(1, k + 1):
        row = [Fraction(0)] * k
        row[i - 1] = V
        if i % 2 == 1:
            row[i] = V + eps
        rows.append(tuple(row))
    return Instance(Fraction(k), (s,) * k, tuple(rows))


def _appendix_a(l, eps, perturbed=False) -> PositionAuctionInstance:
    l = _count(l, "l")
    k = 2 * l
    _require(l >= 1, "l >= 1")
    _require(0 < eps <= Fraction(1, k), "0 < eps <= 1/k")
    # agent 1 is the heavy S0 agent, 2..l+1 form S1, l+2..2l+1 form S2
    if perturbed:
        s1 = [1 - eps * i for i in range(1, l + 1)]
        s2 = [2 * eps * (1 - eps * i) for i in range(l + 1, 2 * l + 1)]
    else:
        s1 = [Fraction(1)] * l
        s2 = [2 * eps] * l
    values = (1 + eps,) + tuple(s1) + tuple(s2)
    sizes = (Fraction(l),) + (Fraction(1),) * l + (eps,) * l
    ctrs = tuple(Fraction(k - j + 1) for j in range(1, l + 1)) + tuple(
        eps * (k - j + 1) for j in range(l + 1, k + 1)
    )
    return PositionAuctionInstance(values, sizes, ctrs, Fraction(l))


def _figure1(eps) -> Instance:
    _require(0 < eps < Fraction(1, 2), "0 < eps < 1/2")
    # drawn edges at the two visible positions (CTR 2 and 1); the two hidden
    # tail positions carry CTRs 2*eps and eps for every agent
    base = [Fraction(1), eps, 1 - eps, eps, 1 - 2 * eps]
    visible = [
        (Fraction(2), Fraction(0)),
        (2 * eps, Fraction(0)),
        (2 * (1 - eps), 1 - eps),
        (Fraction(0), eps),
        (2 * (1 - 2 * eps), 1 - 2 * eps),
    ]
    rows = tuple(vis + (2 * eps * b, eps * b) for vis, b in zip(visible, base))
    return Instance(Fraction(2), (Fraction(2), eps, Fraction(1), eps, Fraction(1)), rows)


def _appendix_b() -> PositionAuctionInstance:
    return PositionAuctionInstance(
        values=(12, 15, 16, 18), sizes=(2, 3, 4, 6), ctrs=(Fraction(1), Fraction(9, 20)), capacity=10
    )


# -- expected outcomes (used as regression targets) ----------------------------


def _prop31_expected(W, eps):
    return {"mech1": 1 + eps, "opt": W, "greedy-value": W, "gvmax": W}


def _thm34_expected(eps, delta1, delta2):
    return {"mech1": 3 + 2 * eps, "gvmax": 3 + 2 * eps, "opt": Fraction(9), "mech2-expected": 3 + 2 * eps}


def _prop41_expected(eps):
    # truthful run of the replacement greedy: 1->1, 2->2, 4->3, 3->4
    return {"mech1": 5 + (4 + 2 * eps) * (1 - eps) + 4 * (1 - 2 * eps) + Fraction(3, 2)}


def _prop46_pos_expected(k, V, eta, eps=None):
    inst = _prop46_pos(k, V, eta, eps)
    small = V * sum(inst.ctrs)
    heavy = (V + 1) * inst.ctrs[0]
    return {
        "mech3": small,
        "gvmax": heavy,
        "opt": small,
        "mech4-expected": small / 4 + 3 * heavy / 4,
    }


def _prop46_gen_expected(k, V, eps, s):
    k = _count(k, "k")
    return {
        "mech3": Fraction(k, 2) * (V + eps),
        "gvmax": V + eps,
        "opt": k * V,
        "mech4-expected": Fraction(k, 8) * (V + eps) + Fraction(3, 4) * (V + eps),
    }


def _appendix_a_expected(l, eps, perturbed=False):
    l = _count(l, "l")
    k = 2 * l
    out = {"greedy-value": k * (1 + eps), "max-greedy": k * (1 + eps)}
    if not perturbed:
        out["opt"] = Fraction(l * (3 * l + 1), 2)
    return out


def _appendix_b_expected():
    return {"mech3": Fraction(117, 5)}


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    defaults: dict
    build: Callable[..., AnyInstance]
    expected: Callable[..., dict] | None = field(default=None, repr=False)

    def params(self, **overrides) -> dict:
        unknown = set(overrides) - set(self.defaults)
        if unknown:
            raise ParameterError(f"{self.name}: unknown parameter(s) {sorted(unknown)}")
        out = dict(self.defaults)
        for key, val in overrides.items():
            if isinstance(val, (list, tuple)):
                out[key] = [as_rational(v) for v in val]
            elif isinstance(val, bool) or val is None:
                out[key] = val
            else:
                out[key] = as_rational(val)
        return out


CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in [
        CatalogEntry("prop31", {"W": Fraction(100), "eps": Fraction(1, 100)}, _prop31, _prop31_expected),
        CatalogEntry(
            "thm34-lb",
            {"eps": Fraction(1, 1000), "delta1": Fraction(1, 10**4), "delta2": Fraction(1, 10**4)},
            _thm34_lb,
            _thm34_expected,
        ),
        CatalogEntry("prop41", {"eps": Fraction(1, 100)}, _prop41, _prop41_expected),
        CatalogEntry(
            "prop46-pos",
            {"k": Fraction(4), "V": Fraction(10), "eta": Fraction(1, 10**9), "eps": None},
            _prop46_pos,
            _prop46_pos_expected,
        ),
        CatalogEntry(
            "prop46-gen",
            {"k": Fraction(10), "V": Fraction(1), "eps": Fraction(1, 1000), "s": Fraction(1, 2)},
            _prop46_gen,
            _prop46_gen_expected,
        ),
        CatalogEntry(
            "appendixA", {"l": Fraction(2), "eps": Fraction(1, 100), "perturbed": False}, _appendix_a, _appendix_a_expected
        ),
        CatalogEntry("figure1", {"eps": Fraction(1, 100)}, _figure1),
        CatalogEntry("appendixB", {}, _appendix_b, _appendix_b_expected),
    ]
}


def _entry(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise ParameterError(f"unknown instance {name!r}; known: {', '.join(CATALOG)}") from None


def paper_instance(name: str, **params) -> AnyInstance:
    """Build a catalog instance, e.g. ``paper_instance("prop31", W=100, eps="1/100")``."""
    entry = _entry(name)
    return entry.build(**entry.params(**params))


def expected_values(name: str, **params) -> dict:
    """Closed-form welfare targets for a catalog instance (rule name -> Fraction)."""
    entry = _entry(name)
    if entry.expected is None:
        return {}
    return entry.expected(**entry.params(**params))


# -- random instances ---------------------------------------------------------


def _draw(rng: random.Random, lo: Fraction, hi: Fraction, max_den: int) -> Fraction:
    den = rng.randint(1, max_den)
    a = math.ceil(lo * den)
    b = math.floor(hi * den)
    if a > b:
        return lo
    return Fraction(rng.randint(a, b), den)


def random_instance(
    seed: int,
    n_agents: int,
    n_positions: int,
    kind: str = "general",
    value_range=(1, 10),
    size_range=(1, 5),
    capacity_factor=2,
    max_denominator: int = 4,
    zero_probability=0,
) -> AnyInstance:
    """Deterministic random instance; capacity is ``capacity_factor`` times the mean size."""
    lo_v, hi_v = (as_rational(x) for x in value_range)
    lo_s, hi_s = (as_rational(x) for x in size_range)
    cf = as_rational(capacity_factor)
    zero_probability = as_rational(zero_probability)
    if n_agents < 1 or n_positions < 1:
        raise ValueError("need at least one agent and one position")
    if not (0 < lo_v <= hi_v and 0 < lo_s <= hi_s):
        raise ValueError("value and size ranges must be positive and ordered")
    if not 0 < cf <= n_agents:
        raise ValueError("capacity_factor must lie in (0, n_agents]")
    if not 0 <= zero_probability < 1:
        raise ValueError("zero_probability must lie in [0, 1)")
    rng = random.Random(seed)
    sizes = tuple(_draw(rng, lo_s, hi_s, max_denominator) for _ in range(n_agents))
    capacity = cf * sum(sizes) / n_agents
    if kind == "general":
        values = tuple(
            tuple(
                Fraction(0) if rng.random() < zero_probability else _draw(rng, lo_v, hi_v, max_denominator)
                for _ in range(n_positions)
            )
            for _ in range(n_agents)
        )
        return Instance(capacity, sizes, values)
    if kind == "position":
        values = tuple(_draw(rng, lo_v, hi_v, max_denominator) for _ in range(n_agents))
        grid = 4 * n_positions
        ctrs = tuple(Fraction(c, grid) for c in sorted(rng.sample(range(1, grid + 1), n_positions), reverse=True))
        return PositionAuctionInstance(values, sizes, ctrs, capacity)
    raise ValueError(f"unknown kind {kind!r}")


def random_family_instance(family: str, seed: int, max_agents: int = 7, max_positions: int = 4) -> AnyInstance:
    """One trial instance of an experiment family; dimensions are drawn from the seed too."""
    rng = random.Random(seed)
    n = rng.randint(1, max_agents)
    k = rng.randint(1, max_positions)
    cf = Fraction(rng.randint(1, 2 * n), 2)
    sub_seed = rng.getrandbits(64)
    if family == "random-general":
        return random_instance(sub_seed, n, k, "general", capacity_factor=cf, zero_probability=Fraction(1, 4))
    if family == "random-position":
        return random_instance(sub_seed, n, k, "position", capacity_factor=cf)
    raise ValueError(f"unknown family {family!r}")


# -- JSON format ----------------------------------------------------------------


def serialize(instance: AnyInstance) -> dict:
    if isinstance(instance, PositionAuctionInstance):
        return {
            "kind": "position-auction",
            "capacity": str(instance.capacity),
            "agents": [
                {"id": i, "value": str(v), "size": str(s)}
                for i, (v, s) in enumerate(zip(instance.values, instance.sizes), start=1)
            ],
            "ctrs": [str(a) for a in instance.ctrs],
        }
    return {
        "kind": "general",
        "capacity": str(instance.capacity),
        "agents": [
            {"id": i, "size": str(s), "values": [str(v) for v in row]}
            for i, (s, row) in enumerate(zip(instance.sizes, instance.values), start=1)
        ],
    }


def _rational(doc: dict, key: str, path: str) -> Fraction:
    if key not in doc:
        raise InstanceFormatError(f"{path}.{key}: missing")
    raw = doc[key]
    return _rational_value(raw, f"{path}.{key}")


def _rational_value(raw, path: str) -> Fraction:
    if isinstance(raw, bool) or not isinstance(raw, (str, int)):
        raise InstanceFormatError(f"{path}: expected a rational string, got {raw!r}")
    try:
        return as_rational(raw)
    except (ValueError, ZeroDivisionError):
        raise InstanceFormatError(f"{path}: not an exact rational: {raw!r}") from None


def _list(doc: dict, key: str, path: str) -> list:
    raw = doc.get(key)
    if not isinstance(raw, list):
        raise InstanceFormatError(f"{path}.{key}: expected a list")
    return raw


def parse(document: dict) -> AnyInstance:
    if not isinstance(document, dict):
        raise InstanceFormatError("$: expected an object")
    kind = document.get("kind")
    capacity = _rational(document, "capacity", "$")
    agents = _list(document, "agents", "$")
    for idx, agent in enumerate(agents):
        if not isinstance(agent, dict):
            raise InstanceFormatError(f"$.agents[{idx}]: expected an object")
        if agent.get("id") != idx + 1:
            raise InstanceFormatError(f"$.agents[{idx}].id: ids must be 1-based and contiguous, got {agent.get('id')!r}")
        if _rational(agent, "size", f"$.agents[{idx}]") <= 0:
            raise InstanceFormatError(f"$.agents[{idx}].size: must be positive")
    if capacity <= 0:
        raise InstanceFormatError("$.capacity: must be positive")
    if kind == "general":
        rows = []
        for idx, agent in enumerate(agents):
            vals = _list(agent, "values", f"$.agents[{idx}]")
            rows.append(tuple(_rational_value(v, f"$.agents[{idx}].values[{j}]") for j, v in enumerate(vals)))
            if rows[-1] and min(rows[-1]) < 0:
                raise InstanceFormatError(f"$.agents[{idx}].values: must be non-negative")
        if len({len(r) for r in rows}) > 1:
            raise InstanceFormatError("$.agents: values lists differ in length")
        sizes = tuple(_rational(a, "size", f"$.agents[{i}]") for i, a in enumerate(agents))
        return Instance(capacity, sizes, tuple(rows))
    if kind == "position-auction":
        ctrs = tuple(_rational_value(c, f"$.ctrs[{j}]") for j, c in enumerate(_list(document, "ctrs", "$")))
        for j, (a, b) in enumerate(zip(ctrs, ctrs[1:]), start=1):
            if a <= b:
                raise InstanceFormatError(f"$.ctrs[{j}]: CTRs not strictly decreasing ({a} then {b})")
        if ctrs and ctrs[-1] < 0:
            raise InstanceFormatError(f"$.ctrs[{len(ctrs) - 1}]: must be non-negative")
        values = []
        for idx, agent in enumerate(agents):
            v = _rational(agent, "value", f"$.agents[{idx}]")
            if v < 0:
                raise InstanceFormatError(f"$.agents[{idx}].value: must be non-negative")
            values.append(v)
        sizes = tuple(_rational(a, "size", f"$.agents[{i}]") for i, a in enumerate(agents))
        return PositionAuctionInstance(tuple(values), sizes, ctrs, capacity)
    raise InstanceFormatError(f"$.kind: expected 'general' or 'position-auction', got {kind!r}")


def dumps(instance: AnyInstance) -> str:
    return json.dumps(serialize(instance), indent=2) + "\n"


def loads(text: str) -> AnyInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"$: invalid JSON ({exc})") from None
    return parse(doc)


def digest(instance: AnyInstance) -> str:
    canonical = json.dumps(serialize(instance), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
