"""Randomized approximation and monotonicity sweeps."""
from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .core import PositionAuctionInstance, realized, validate
from .instances import random_family_instance
from .mechanisms import g_vmax, max_greedy, mechanism1, mechanism2, mechanism3, mechanism4, structure_check
from .oracle import monotonicity_audit, optimal_matching, position_optimum

__all__ = ["ExperimentConfig", "TrialResult", "run_trial", "run_experiment", "summarize"]

FAMILIES = ("random-general", "random-position")


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "random-general"
    trials: int = 1000
    seed: int = 0
    max_agents: int = 7
    max_positions: int = 4
    audit: bool = True  # monotonicity audits on position families
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass
class TrialResult:
    index: int
    opt: Fraction
    ratios: dict[str, Fraction | None] = field(default_factory=dict)
    violations: dict[str, int] = field(default_factory=dict)


def _ratio(opt: Fraction, welfare: Fraction) -> Fraction | None:
    if welfare == 0:
        return Fraction(1) if opt == 0 else None
    return opt / welfare


def run_trial(config: ExperimentConfig, index: int) -> TrialResult:
    inst = random_family_instance(config.family, config.seed + index, config.max_agents, config.max_positions)
    position = isinstance(inst, PositionAuctionInstance)
    general = realized(inst) if position else inst
    opt = (position_optimum(inst) if position else optimal_matching(general)).welfare

    m1 = mechanism1(general)
    m3 = mechanism3(general)
    vmax = g_vmax(general)
    greedy = max_greedy(general)
    v = {
        "infeasible": sum(bool(validate(general, m)) for m in (m1.matching, m3.matching, vmax, greedy)),
        "opt_below_rule": int(any(opt < m.welfare for m in (m1.matching, m3.matching, vmax, greedy))),
        "approx6": int(opt > 3 * m1.matching.welfare + 3 * vmax.welfare),
        "approx12": int(opt > 3 * m3.matching.welfare + 9 * vmax.welfare),
    }
    ratios = {
        "mech2-expected": _ratio(opt, mechanism2(general, 0).expected_welfare),
        "mech4-expected": _ratio(opt, mechanism4(general, 0).expected_welfare),
        "max-greedy": _ratio(opt, greedy.welfare),
    }
    if position:
        v["structure"] = int(bool(structure_check(inst, m3)))
        if config.audit:
            for rule in ("mech3", "gvmax"):
                v[f"monotonicity_{rule}"] = sum(
                    len(monotonicity_audit(inst, a, rule).violations) for a in range(1, inst.n_agents + 1)
                )
    return TrialResult(index, opt, ratios, v)


def _run_indexed(args):
    config, index = args
    return run_trial(config, index)


def run_experiment(config: ExperimentConfig) -> list[TrialResult]:
    """All trials, in index order; each trial is seeded with ``seed + index``."""
    jobs = [(config, i) for i in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_run_indexed, jobs, chunksize=16))
    return [_run_indexed(job) for job in jobs]


def summarize(config: ExperimentConfig, results: list[TrialResult]) -> dict:
    ratios = {}
    for rule in results[0].ratios:
        vals = [r.ratios[rule] for r in results if r.ratios[rule] is not None]
        undefined = len(results) - len(vals)
        ratios[rule] = {
            "min": str(min(vals)) if vals else None,
            "median": str(statistics.median(vals)) if vals else None,
            "max": str(max(vals)) if vals else None,
            "undefined": undefined,
        }
    keys = sorted({k for r in results for k in r.violations})
    violations = {k: sum(r.violations.get(k, 0) for r in results) for k in keys}
    return {
        "family": config.family,
        "trials": config.trials,
        "seed": config.seed,
        "max_agents": config.max_agents,
        "max_positions": config.max_positions,
        "ratios": ratios,
        "violations": violations,
        "total_violations": sum(violations.values()),
    }
