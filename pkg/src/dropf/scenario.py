"""24-hour demand-response studies.

A scenario prices the day under a tariff, lets the participating share of
customers respond, spreads the resulting system profile over the buses and
solves one AC OPF per hour.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .case import NetworkCase, build_admittance, serialize_case
from .demand import (
    ElasticityConfig,
    ElasticityMatrix,
    LoadProfile,
    apply_participation,
    responsive_load,
)
from .opf import AcOpf, OpfConvergenceError, OpfInfeasibleError, OpfOptions, OpfSolution
from .prices import HOURS, PriceSchedule, TariffConfig

log = logging.getLogger(__name__)

DEFAULT_GAMMAS = (0.1, 0.2, 0.5)


class Program(enum.Enum):
    NONE = "none"
    TOU = "tou"
    RTP = "rtp"


class ScenarioError(RuntimeError):
    pass


class ScenarioInfeasibleError(ScenarioError):
    def __init__(self, hour: int, cause: OpfInfeasibleError):
        super().__init__(f"hour {hour + 1} is infeasible: {cause}")
        self.hour = hour
        self.cause = cause


class ScenarioMismatchError(ScenarioError):
    pass


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    case: NetworkCase
    profile: LoadProfile
    tariff_kind: Program = Program.NONE
    gamma: float = 0.0
    tariff: TariffConfig = field(default_factory=TariffConfig)
    elasticity: ElasticityMatrix | None = None
    opf_options: OpfOptions | None = None

    def __post_init__(self):
        object.__setattr__(self, "tariff_kind", Program(self.tariff_kind))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"participation factor must lie in [0, 1], got {self.gamma}")

    @property
    def label(self) -> str:
        if self.tariff_kind is Program.NONE:
            return "baseline"
        return f"{self.tariff_kind.value}_g{self.gamma:g}"

    def schedule(self) -> PriceSchedule:
        if self.tariff_kind is Program.TOU:
            return self.tariff.tou()
        if self.tariff_kind is Program.RTP:
            return self.tariff.rtp(self.profile)
        return self.tariff.baseline()

    def elasticity_matrix(self) -> ElasticityMatrix:
        if self.elasticity is not None:
            return self.elasticity
        return ElasticityConfig().matrix(self.tariff.period_map)


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    label: str
    tariff_kind: Program
    gamma: float
    hourly_solutions: tuple[OpfSolution | None, ...]
    hourly_cost: np.ndarray
    total_cost: float
    base_profile: LoadProfile
    modified_profile: LoadProfile
    prices: np.ndarray
    case_key: str
    warnings: tuple[str, ...] = ()
    failed_hours: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.failed_hours

    def summary(self) -> dict:
        return {
            "scenario": self.label,
            "tariff": self.tariff_kind.value,
            "gamma": self.gamma,
            "total_cost": self.total_cost,
            "peak_load_mw": self.modified_profile.peak,
            "energy_mwh": float(self.modified_profile.hourly_mw.sum()),
            "failed_hours": [h + 1 for h in self.failed_hours],
        }


@dataclass(frozen=True, eq=False)
class CostComparison:
    hourly_delta: np.ndarray
    total_delta: float
    percent_saving: float
    peak_delta: float


def case_key(case: NetworkCase) -> str:
    return hashlib.sha256(serialize_case(case).encode()).hexdigest()[:16]


def disaggregate_profile(profile: LoadProfile, case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    """Per-hour, per-bus (P_d, Q_d), shape (24, n_bus), in MW/MVAr.

    Each bus keeps its share of the case base load and its base power factor.
    """
    pd0, qd0 = case.base_loads()
    total = pd0.sum()
    if not total > 0:
        raise ScenarioError("case has zero total base load; cannot distribute a profile")
    scale = profile.hourly_mw / total
    return scale[:, None] * pd0[None, :], scale[:, None] * qd0[None, :]


def _solve_hour(case, Y, options, pd, qd) -> OpfSolution:
    return AcOpf(case, options, Y).solve((pd, qd))


def run_scenario(spec: ScenarioSpec, workers: int = 1) -> ScenarioResult:
    case = spec.case
    schedule = spec.schedule()
    warnings: list[str] = []
    if spec.tariff_kind is Program.NONE:
        modified = spec.profile
    else:
        responsive = responsive_load(spec.profile, schedule, spec.elasticity_matrix())
        modified = apply_participation(spec.profile, responsive, spec.gamma)
        warnings += modified.warnings

    pd, qd = disaggregate_profile(modified, case)
    Y = build_admittance(case)
    options = spec.opf_options or OpfOptions()

    def solve(hour):
        try:
            return _solve_hour(case, Y, options, pd[hour], qd[hour])
        except OpfInfeasibleError as exc:
            raise ScenarioInfeasibleError(hour, exc) from exc
        except OpfConvergenceError as exc:
            log.warning("%s hour %d: %s", spec.label, hour + 1, exc)
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(solve, range(HOURS)))
    else:
        outcomes = [solve(h) for h in range(HOURS)]

    solutions: list[OpfSolution | None] = []
    failed = []
    for hour, outcome in enumerate(outcomes):
        if isinstance(outcome, OpfSolution) and outcome.converged:
            solutions.append(outcome)
        else:
            solutions.append(None)
            failed.append(hour)
            reason = "constraint violations" if isinstance(outcome, OpfSolution) else outcome
            warnings.append(f"hour {hour + 1}: OPF failed ({reason})")
    hourly_cost = np.array([s.objective if s is not None else np.nan for s in solutions])
    total = float(np.sum(hourly_cost)) if not failed else float("nan")
    return ScenarioResult(
        label=spec.label, tariff_kind=spec.tariff_kind, gamma=spec.gamma,
        hourly_solutions=tuple(solutions), hourly_cost=hourly_cost, total_cost=total,
        base_profile=spec.profile, modified_profile=modified, prices=np.array(schedule.prices),
        case_key=case_key(case), warnings=tuple(warnings), failed_hours=tuple(failed),
    )


def compare_scenarios(base: ScenarioResult, dr: ScenarioResult) -> CostComparison:
    if base.case_key != dr.case_key:
        raise ScenarioMismatchError(
            f"scenarios {base.label!r} and {dr.label!r} were run on different cases")
    if len(base.hourly_cost) != HOURS or len(dr.hourly_cost) != HOURS:
        raise ScenarioMismatchError("both scenarios must cover 24 hours")
    hourly = dr.hourly_cost - base.hourly_cost
    total = dr.total_cost - base.total_cost
    saving = -100.0 * total / base.total_cost if base.total_cost else 0.0
    return CostComparison(hourly, float(total), float(saving),
                          dr.modified_profile.peak - base.modified_profile.peak)


@dataclass(frozen=True, eq=False)
class StudyResult:
    baseline: ScenarioResult
    scenarios: tuple[ScenarioResult, ...]

    @property
    def all_results(self) -> tuple[ScenarioResult, ...]:
        return (self.baseline, *self.scenarios)

    def comparisons(self) -> dict[str, CostComparison]:
        return {r.label: compare_scenarios(self.baseline, r) for r in self.scenarios}


def study_specs(case: NetworkCase, profile: LoadProfile, tariff: TariffConfig,
                elasticity: ElasticityMatrix | None = None,
                programs: Sequence[Program] = (Program.TOU, Program.RTP),
                gammas: Sequence[float] = DEFAULT_GAMMAS,
                opf_options: OpfOptions | None = None) -> list[ScenarioSpec]:
    """Baseline first, then every program at every participation factor."""
    specs = [ScenarioSpec(case, profile, Program.NONE, 0.0, tariff, elasticity, opf_options)]
    for program in programs:
        for gamma in gammas:
            specs.append(ScenarioSpec(case, profile, Program(program), gamma, tariff,
                                      elasticity, opf_options))
    return specs


def run_study(specs: Sequence[ScenarioSpec], workers: int = 1) -> StudyResult:
    results = [run_scenario(spec, workers) for spec in specs]
    return StudyResult(results[0], tuple(results[1:]))


CONFIG_PATH_KEYS = ("case", "profile", "elasticity", "tariff_config", "costs")
CONFIG_KEYS = CONFIG_PATH_KEYS + ("tariff", "gamma", "gammas", "baseline_price", "workers")


def load_scenario_config(path) -> dict:
    """Read a JSON scenario config; relative file paths resolve against its directory.

    Keys may use dashes or underscores. Values that are not existing files
    relative to the config (bundled names such as ``ieee14``) pass through.
    """
    path = Path(path)
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario config must be a JSON object")
    out = {}
    for key, value in data.items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ScenarioError(f"{path}: unknown scenario config key {key!r}")
        if key in CONFIG_PATH_KEYS and isinstance(value, str):
            candidate = path.parent / value
            if not Path(value).is_absolute() and candidate.exists():
                value = str(candidate)
        out[key] = value
    if "tariff" in out:
        out["tariff"] = Program(out["tariff"]).value
    if "gammas" in out:
        out["gammas"] = [float(g) for g in out["gammas"]]
    return out
