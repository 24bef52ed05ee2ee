"""Price-elastic load model.

Demand at hour i responds to its own price through the self-elasticity
E(i, i) and to prices elsewhere through cross-elasticities E(i, j):

    P(i) = P0(i) * (1 + E(i,i) dp(i)/p0(i) + sum_{j != i} E(i,j) dp(j)/p0(j))

with dp = price - baseline price. A participation factor blends the
responsive profile with the unchanged one.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .prices import HOURS, PERIOD_ORDER, Period, PeriodMap, PriceSchedule

log = logging.getLogger(__name__)

# Self/cross elasticities between (peak, off-peak, valley) periods.
DEFAULT_BLOCK = np.array([
    [-0.100, 0.016, 0.012],
    [0.016, -0.100, 0.010],
    [0.012, 0.010, -0.100],
])


class ElasticityError(ValueError):
    pass


class LoadProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ElasticityMatrix:
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (HOURS, HOURS):
            raise ElasticityError(f"elasticity matrix must be {HOURS}x{HOURS}, got {arr.shape}")
        if np.any(np.diag(arr) > 0):
            raise ElasticityError("self-elasticities must be <= 0")
        off = arr[~np.eye(HOURS, dtype=bool)]
        if np.any(off < 0):
            raise ElasticityError("cross-elasticities must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __getitem__(self, key):
        return self.values[key]


@dataclass(frozen=True, eq=False)
class LoadProfile:
    """System demand for each of the 24 hours, MW."""

    hourly_mw: np.ndarray
    constant_power_factor: bool = True
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arr = np.array(self.hourly_mw, dtype=float)
        if arr.shape != (HOURS,):
            raise LoadProfileError(f"load profile needs {HOURS} hourly values, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise LoadProfileError("load profile values must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "hourly_mw", arr)

    def __len__(self) -> int:
        return HOURS

    @property
    def peak(self) -> float:
        return float(self.hourly_mw.max())


def build_elasticity_matrix(period_map: PeriodMap, block=DEFAULT_BLOCK,
                            same_period_cross: Mapping[Period | str, float] | None = None
                            ) -> ElasticityMatrix:
    """Expand a 3x3 (peak, off-peak, valley) block into the 24x24 hourly matrix.

    The block diagonal holds self-elasticities and is used only for i == j.
    Distinct hours of the same period couple through ``same_period_cross``
    (zero unless given).
    """
    block = np.asarray(block, dtype=float)
    if block.shape != (3, 3):
        raise ElasticityError(f"elasticity block must be 3x3, got {block.shape}")
    if np.any(np.diag(block) > 0):
        raise ElasticityError("block diagonal (self-elasticity) must be <= 0")
    if np.any(block[~np.eye(3, dtype=bool)] < 0):
        raise ElasticityError("block off-diagonal (cross-elasticity) must be >= 0")
    same = {p: 0.0 for p in Period}
    for key, value in (same_period_cross or {}).items():
        same[Period(key) if not isinstance(key, Period) else key] = float(value)
    if any(v < 0 for v in same.values()):
        raise ElasticityError("same-period cross-elasticities must be >= 0")

    pos = {p: k for k, p in enumerate(PERIOD_ORDER)}
    idx = np.array([pos[p] for p in period_map.labels])
    E = block[np.ix_(idx, idx)].copy()
    for i, pi in enumerate(period_map.labels):
        for j, pj in enumerate(period_map.labels):
            if i != j and pi is pj:
                E[i, j] = same[pi]
    return ElasticityMatrix(E)


def single_period_response(p_d0: float, rho: float, rho0: float, e_self: float) -> float:
    if not p_d0 > 0:
        raise LoadProfileError(f"baseline demand must be positive, got {p_d0}")
    if not rho0 > 0:
        raise ElasticityError(f"baseline price must be positive, got {rho0}")
    value = p_d0 * (1.0 + e_self * (rho - rho0) / rho0)
    if value < 0:
        log.warning("linear demand model went negative (%g MW); clamped to 0", value)
        return 0.0
    return value


def multi_period_shift(hour: int, profile: LoadProfile, schedule: PriceSchedule,
                       E: ElasticityMatrix) -> float:
    """Demand at ``hour`` (0-based) after load shifted in from the other hours.

    Each other hour j contributes E(i, j) * P0(j)/p0(j) * dp(j).
    """
    if not 0 <= hour < HOURS:
        raise IndexError(f"hour {hour} outside 0..{HOURS - 1}")
    p0 = profile.hourly_mw
    weights = E.values[hour] * p0 / schedule.baseline * schedule.deviation
    return float(p0[hour] + weights.sum() - weights[hour])


def response_matrix(profile: LoadProfile, schedule: PriceSchedule,
                    E: ElasticityMatrix) -> np.ndarray:
    """Matrix M with delta_P = M @ delta_rho: diag(P0) E diag(1/p0)."""
    return profile.hourly_mw[:, None] * E.values / schedule.baseline[None, :]


def load_change(profile: LoadProfile, schedule: PriceSchedule, E: ElasticityMatrix) -> np.ndarray:
    """Unclamped demand change P - P0 per hour, MW.

    Evaluated as P0(i) * sum_j E(i,j) dp(j)/p0(j), so doubling every price
    deviation doubles the result bit for bit.
    """
    p0 = profile.hourly_mw
    rel = schedule.deviation / schedule.baseline
    out = np.empty(HOURS)
    for i in range(HOURS):
        cross = sum(E.values[i, j] * rel[j] for j in range(HOURS) if j != i)
        out[i] = p0[i] * (E.values[i, i] * rel[i] + cross)
    return out


def responsive_load(profile: LoadProfile, schedule: PriceSchedule,
                    E: ElasticityMatrix) -> LoadProfile:
    out = profile.hourly_mw + load_change(profile, schedule, E)
    warnings = list(profile.warnings)
    negative = np.flatnonzero(out < 0)
    for h in negative:
        msg = f"hour {h + 1}: responsive demand {out[h]:.6g} MW below zero, clamped"
        log.warning(msg)
        warnings.append(msg)
    out[negative] = 0.0
    return LoadProfile(out, profile.constant_power_factor, tuple(warnings))


def apply_participation(base: LoadProfile, responsive: LoadProfile, gamma: float) -> LoadProfile:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"participation factor must lie in [0, 1], got {gamma}")
    blended = (1.0 - gamma) * base.hourly_mw + gamma * responsive.hourly_mw
    return LoadProfile(blended, base.constant_power_factor, responsive.warnings)


def parse_profile_csv(text: str) -> LoadProfile:
    """Read a profile from CSV with ``hour,load_mw`` columns (header optional)."""
    values: dict[int, float] = {}
    first = True
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        row = [c.strip() for c in row]
        if not row or not row[0] or row[0].startswith("#"):
            continue
        try:
            hour, load = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            if first:
                first = False
                continue  # header
            raise LoadProfileError(f"line {lineno}: expected 'hour,load_mw', got {row}") from None
        first = False
        if not 1 <= hour <= HOURS or hour in values:
            raise LoadProfileError(f"line {lineno}: bad or repeated hour {hour}")
        values[hour] = load
    if sorted(values) != list(range(1, HOURS + 1)):
        raise LoadProfileError(f"profile must list hours 1..{HOURS} exactly once")
    return LoadProfile(np.array([values[h] for h in range(1, HOURS + 1)]))


def load_profile(path) -> LoadProfile:
    return parse_profile_csv(Path(path).read_text())


@dataclass(frozen=True)
class ElasticityConfig:
    block: tuple[tuple[float, ...], ...] = tuple(map(tuple, DEFAULT_BLOCK.tolist()))
    same_period_cross: tuple[tuple[str, float], ...] = ()

    def matrix(self, period_map: PeriodMap) -> ElasticityMatrix:
        return build_elasticity_matrix(period_map, self.block, dict(self.same_period_cross))

    @classmethod
    def from_dict(cls, data: Mapping) -> "ElasticityConfig":
        block = np.asarray(data.get("block", DEFAULT_BLOCK), dtype=float)
        if block.shape != (3, 3):
            raise ElasticityError(f"elasticity block must be 3x3, got {block.shape}")
        if "periods" in data:
            given = [Period(p) for p in data["periods"]]
            if sorted(p.value for p in given) != sorted(p.value for p in Period):
                raise ElasticityError(f"'periods' must name each period once, got {data['periods']}")
            order = [given.index(p) for p in PERIOD_ORDER]
            block = block[np.ix_(order, order)]
        same = data.get("same_period_cross", {})
        return cls(tuple(tuple(float(x) for x in row) for row in block),
                   tuple((str(k), float(v)) for k, v in same.items()))


def load_elasticity_config(path) -> ElasticityConfig:
    return ElasticityConfig.from_dict(json.loads(Path(path).read_text()))

