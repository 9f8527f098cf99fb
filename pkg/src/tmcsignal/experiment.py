"""Experiment harness: the intersection x pattern x policy x cycle comparison grid."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from tmcsignal import rl as rl_mod
from tmcsignal.model import IntersectionGeometry, read_geometries
from tmcsignal.sim import SimConfig, SimResult, run
from tmcsignal.signals import build_program
from tmcsignal.trafficgen import (
    PATTERNS,
    BimodalProfile,
    DemandSpec,
    TurnRatio,
    generate_demand,
)

POLICIES = ("static", "dynamic", "hybrid", "rl")
DEFAULT_CYCLES = (60, 90, 120, 150)
WINNER_TIE_THRESHOLD = 0.005

CellKey = tuple[str, str, str, int]  # geometry id, pattern, policy, cycle


class ExperimentError(RuntimeError):
    """A grid cell failed; the message carries the cell coordinates."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid definition; defaults reproduce the full comparison matrix."""

    geometry_ids: tuple[str, ...] = ()  # empty = all bundled intersections
    patterns: tuple[str, ...] = tuple(sorted(PATTERNS))
    policies: tuple[str, ...] = POLICIES
    cycles: tuple[int, ...] = DEFAULT_CYCLES
    seed: int = 7
    profile: BimodalProfile = field(default_factory=BimodalProfile)
    rl_episodes: int = 20
    geometry_file: str | None = None

    def __post_init__(self) -> None:
        for p in self.patterns:
            if p not in PATTERNS:
                raise ValueError(f"unknown pattern {p!r}")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}")
        if not self.cycles:
            raise ValueError("need at least one cycle time")


@dataclass(frozen=True)
class ExperimentMatrix:
    """Complete grid of simulation results plus the demand horizon used."""

    results: Mapping[CellKey, SimResult]
    horizon: int

    def nwt(self, key: CellKey) -> float:
        return self.results[key].nwt


def parse_experiment_spec(text: str) -> ExperimentSpec:
    """Keyed-text grid file: geometries/patterns/policies/cycles/seed lines."""
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key.lower()] = value

    def split(value: str) -> tuple[str, ...]:
        return tuple(v.strip() for v in value.split(",") if v.strip())

    kwargs: dict = {}
    if "geometries" in fields:
        value = fields.pop("geometries")
        kwargs["geometry_ids"] = () if value.lower() == "all" else split(value)
    if "patterns" in fields:
        kwargs["patterns"] = tuple(p.upper() for p in split(fields.pop("patterns")))
    if "policies" in fields:
        kwargs["policies"] = split(fields.pop("policies"))
    if "cycles" in fields:
        kwargs["cycles"] = tuple(int(c) for c in split(fields.pop("cycles")))
    if "seed" in fields:
        kwargs["seed"] = int(fields.pop("seed"))
    if "rl_episodes" in fields:
        kwargs["rl_episodes"] = int(fields.pop("rl_episodes"))
    if "geometry_file" in fields:
        kwargs["geometry_file"] = fields.pop("geometry_file")
    profile_keys = {"mu_offpeak", "sigma_offpeak", "mu_peak", "sigma_peak", "hours"}
    if profile_keys & set(fields):
        kwargs["profile"] = BimodalProfile(
            mu_offpeak=float(fields.pop("mu_offpeak", 2500)),
            sigma_offpeak=float(fields.pop("sigma_offpeak", 300)),
            mu_peak=float(fields.pop("mu_peak", 20000)),
            sigma_peak=float(fields.pop("sigma_peak", 400)),
            hours=tuple(fields.pop("hours", "offpeak,peak,peak,offpeak").replace(" ", "").split(",")),
        )
    if fields:
        raise ValueError(f"unknown experiment spec keys: {sorted(fields)}")
    return ExperimentSpec(**kwargs)


def read_experiment_spec(path: str | Path) -> ExperimentSpec:
    return parse_experiment_spec(Path(path).read_text())


def run_experiment(spec: ExperimentSpec) -> ExperimentMatrix:
    """Simulate every grid cell deterministically.

    Demand is drawn once per pattern (seeded from the grid seed and the
    pattern's index) and shared across intersections, policies, and cycles.
    The RL allocator is likewise trained once per pattern: its delay objective
    scales uniformly with the usable green, so the greedy allocation does not
    depend on the cycle time.
    """
    geometries = read_geometries(spec.geometry_file)
    if spec.geometry_ids:
        missing = [g for g in spec.geometry_ids if g not in geometries]
        if missing:
            raise ValueError(f"unknown geometry ids: {missing}")
        geometries = {g: geometries[g] for g in spec.geometry_ids}

    horizon = 3600 * len(spec.profile.hours)
    minutes = horizon // 60
    cfg = SimConfig(horizon=horizon)

    demands = {}
    for pattern in spec.patterns:
        pattern_seed = spec.seed * 1000 + sorted(PATTERNS).index(pattern)
        plans, minute_tmcs = generate_demand(
            DemandSpec(
                profile=spec.profile,
                pattern=PATTERNS[pattern],
                ratios=TurnRatio.default(),
                seed=pattern_seed,
            )
        )
        demands[pattern] = (plans, minute_tmcs, pattern_seed)

    allocators = {}
    if "rl" in spec.policies:
        for pattern, (_, minute_tmcs, pattern_seed) in demands.items():
            allocators[pattern] = rl_mod.train(
                minute_tmcs, episodes=spec.rl_episodes, seed=pattern_seed
            )

    results: dict[CellKey, SimResult] = {}
    for geo_id, geometry in geometries.items():
        for pattern in spec.patterns:
            plans, minute_tmcs, _ = demands[pattern]
            for policy in spec.policies:
                for cycle in spec.cycles:
                    key = (geo_id, pattern, policy, cycle)
                    try:
                        if policy == "rl":
                            program = rl_mod.build_rl_program(
                                allocators[pattern], minute_tmcs, cycle
                            )
                        else:
                            program = build_program(minute_tmcs, policy, cycle)
                        results[key] = run(geometry, plans, program, cfg)
                    except Exception as exc:
                        raise ExperimentError(
                            f"cell geometry={geo_id} pattern={pattern} "
                            f"policy={policy} cycle={cycle}: {exc}"
                        ) from exc
    return ExperimentMatrix(results, horizon)


def best_by_policy(
    matrix: ExperimentMatrix, geo_id: str, pattern: str, policies: Sequence[str], cycles: Sequence[int]
) -> dict[str, float]:
    """Minimum NWT over the cycle set, per policy."""
    return {
        policy: min(matrix.nwt((geo_id, pattern, policy, cycle)) for cycle in cycles)
        for policy in policies
    }


def winners(matrix: ExperimentMatrix, spec: ExperimentSpec) -> dict[tuple[str, str], str]:
    """Per (geometry, pattern): the policy with the lowest best-cycle NWT.

    Policies within WINNER_TIE_THRESHOLD of the minimum tie, resolved in the
    fixed order static < dynamic < hybrid < rl.
    """
    geo_ids = spec.geometry_ids or tuple(sorted({k[0] for k in matrix.results}))
    out = {}
    for geo_id in geo_ids:
        for pattern in spec.patterns:
            best = best_by_policy(matrix, geo_id, pattern, spec.policies, spec.cycles)
            floor = min(best.values())
            for policy in POLICIES:
                if policy in best and best[policy] <= floor * (1 + WINNER_TIE_THRESHOLD):
                    out[(geo_id, pattern)] = policy
                    break
    return out


REPORT_FIELDS = (
    "geometry",
    "pattern",
    "policy",
    "cycle",
    "injected",
    "served",
    "residual_queue",
    "total_wait",
    "nwt",
)


def write_report(matrix: ExperimentMatrix, path: str | Path) -> None:
    """Deterministic CSV sorted by (geometry, pattern, policy, cycle)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for key in sorted(matrix.results):
            geo_id, pattern, policy, cycle = key
            r = matrix.results[key]
            writer.writerow(
                (
                    geo_id,
                    pattern,
                    policy,
                    cycle,
                    r.injected,
                    r.served,
                    r.residual_queue,
                    r.total_wait,
                    f"{r.nwt:.6f}",
                )
            )


def write_winners(matrix: ExperimentMatrix, spec: ExperimentSpec, path: str | Path) -> None:
    table = winners(matrix, spec)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("geometry", "pattern", "winner"))
        for (geo_id, pattern), policy in sorted(table.items()):
            writer.writerow((geo_id, pattern, policy))
