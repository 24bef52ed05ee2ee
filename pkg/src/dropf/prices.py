"""Hourly price signals: flat baseline, time-of-use and real-time pricing."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

HOURS = 24


class Period(enum.Enum):
    PEAK = "peak"
    OFF_PEAK = "off_peak"
    VALLEY = "valley"


# Row/column order of the 3x3 period elasticity block.
PERIOD_ORDER = (Period.PEAK, Period.OFF_PEAK, Period.VALLEY)


class TariffKind(enum.Enum):
    FLAT = "flat"
    TOU = "tou"
    RTP = "rtp"


class TariffError(ValueError):
    pass


def _readonly(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (HOURS,):
        raise TariffError(f"{name} must have {HOURS} hourly values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PeriodMap:
    """Period label for each hour; ``labels[h]`` is hour ``h + 1``."""

    labels: tuple[Period, ...]

    def __post_init__(self):
        labels = tuple(Period(x) if not isinstance(x, Period) else x for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) != HOURS:
            raise TariffError(f"period map must label {HOURS} hours, got {len(labels)}")
        missing = set(Period) - set(labels)
        if missing:
            raise TariffError(f"period map never uses {sorted(p.value for p in missing)}")

    @classmethod
    def from_hours(cls, hours: Mapping[str | Period, Sequence[int]]) -> "PeriodMap":
        """Build from ``{"valley": [1, 2, ...], ...}`` with 1-based hours."""
        labels: list[Period | None] = [None] * HOURS
        for key, hs in hours.items():
            period = Period(key) if not isinstance(key, Period) else key
            for h in hs:
                if not (isinstance(h, int) and 1 <= h <= HOURS):
                    raise TariffError(f"hour {h!r} outside 1..{HOURS}")
                if labels[h - 1] is not None:
                    raise TariffError(f"hour {h} labelled twice")
                labels[h - 1] = period
        unlabelled = [h + 1 for h, p in enumerate(labels) if p is None]
        if unlabelled:
            raise TariffError(f"hours {unlabelled} have no period label")
        return cls(tuple(labels))

    def hours_of(self, period: Period) -> list[int]:
        """0-based indices of the hours carrying ``period``."""
        return [h for h, p in enumerate(self.labels) if p is period]

    def to_hours(self) -> dict[str, list[int]]:
        return {p.value: [h + 1 for h in self.hours_of(p)] for p in PERIOD_ORDER}


DEFAULT_PERIOD_MAP = PeriodMap.from_hours({
    Period.VALLEY: range(1, 9),
    Period.OFF_PEAK: [*range(9, 17), 23, 24],
    Period.PEAK: range(17, 23),
})


@dataclass(frozen=True, eq=False)
class PriceSchedule:
    """24 hourly prices and the pre-program baseline, both in $/MWh."""

    prices: np.ndarray
    baseline: np.ndarray
    tariff_kind: TariffKind
    levels: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "prices", _readonly(self.prices, "prices"))
        object.__setattr__(self, "baseline", _readonly(self.baseline, "baseline"))
        if not np.all(self.prices > 0):
            raise TariffError("all prices must be positive")
        if not np.all(self.baseline > 0):
            raise TariffError("all baseline prices must be positive")
        if not self.levels:
            object.__setattr__(self, "levels", tuple(sorted(set(self.prices.tolist()))))

    @property
    def deviation(self) -> np.ndarray:
        return self.prices - self.baseline


def flat_baseline(price: float) -> PriceSchedule:
    if not price > 0:
        raise TariffError(f"baseline price must be positive, got {price}")
    values = np.full(HOURS, float(price))
    return PriceSchedule(values, values, TariffKind.FLAT, (float(price),))


def build_tou_schedule(period_map: PeriodMap, valley: float, off_peak: float, peak: float,
                       baseline: PriceSchedule) -> PriceSchedule:
    if min(valley, off_peak, peak) <= 0:
        raise TariffError("TOU price levels must be positive")
    if not valley <= off_peak <= peak:
        raise TariffError(
            f"TOU levels must satisfy valley <= off_peak <= peak, got {valley}, {off_peak}, {peak}")
    level = {Period.VALLEY: valley, Period.OFF_PEAK: off_peak, Period.PEAK: peak}
    prices = [level[p] for p in period_map.labels]
    return PriceSchedule(np.array(prices, dtype=float), baseline.baseline, TariffKind.TOU,
                         (float(valley), float(off_peak), float(peak)))


def rtp_ranks(demand: Sequence[float]) -> np.ndarray:
    """Rank of each hour by demand, ties going to the earlier hour."""
    demand = np.asarray(demand, dtype=float)
    order = np.lexsort((np.arange(len(demand)), demand))
    ranks = np.empty(len(demand), dtype=int)
    ranks[order] = np.arange(len(demand))
    return ranks


def build_rtp_schedule(profile, levels: Sequence[float], baseline: PriceSchedule) -> PriceSchedule:
    """Assign five price levels to hours by demand quintile.

    Hours are ranked by baseline demand; ranks 0-4 get the lowest level,
    5-9 the next, and so on, so the top level takes the remaining 4 hours.
    """
    levels = [float(x) for x in levels]
    if len(levels) != 5:
        raise TariffError(f"RTP needs exactly 5 price levels, got {len(levels)}")
    if any(x <= 0 for x in levels):
        raise TariffError("RTP price levels must be positive")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise TariffError(f"RTP levels must be strictly increasing, got {levels}")
    demand = getattr(profile, "hourly_mw", profile)
    demand = np.asarray(demand, dtype=float)
    if demand.shape != (HOURS,):
        raise TariffError(f"load profile must have {HOURS} hours")
    group = rtp_ranks(demand) // 5
    prices = np.array(levels)[group]
    return PriceSchedule(prices, baseline.baseline, TariffKind.RTP, tuple(levels))


@dataclass(frozen=True)
class TariffConfig:
    """Everything needed to build the price signals of a study."""

    period_map: PeriodMap = DEFAULT_PERIOD_MAP
    tou_levels: tuple[float, float, float] = (30.0, 70.0, 120.0)  # valley, off-peak, peak
    rtp_levels: tuple[float, ...] = (30.0, 50.0, 70.0, 100.0, 120.0)
    baseline_price: float = 70.0

    def baseline(self) -> PriceSchedule:
        return flat_baseline(self.baseline_price)

    def tou(self) -> PriceSchedule:
        return build_tou_schedule(self.period_map, *self.tou_levels, baseline=self.baseline())

    def rtp(self, profile) -> PriceSchedule:
        return build_rtp_schedule(profile, self.rtp_levels, self.baseline())

    @classmethod
    def from_dict(cls, data: Mapping) -> "TariffConfig":
        kwargs = {}
        if "period_map" in data:
            kwargs["period_map"] = PeriodMap.from_hours(data["period_map"])
        if "tou_levels" in data:
            tou = data["tou_levels"]
            if isinstance(tou, Mapping):
                tou = (tou["valley"], tou["off_peak"], tou["peak"])
            if len(tou) != 3:
                raise TariffError("tou_levels needs valley, off_peak and peak prices")
            kwargs["tou_levels"] = tuple(float(x) for x in tou)
        if "rtp_levels" in data:
            kwargs["rtp_levels"] = tuple(float(x) for x in data["rtp_levels"])
        if "baseline_price" in data:
            kwargs["baseline_price"] = float(data["baseline_price"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        valley, off_peak, peak = self.tou_levels
        return {
            "baseline_price": self.baseline_price,
            "period_map": self.period_map.to_hours(),
            "tou_levels": {"valley": valley, "off_peak": off_peak, "peak": peak},
            "rtp_levels": list(self.rtp_levels),
        }


def load_tariff_config(path) -> TariffConfig:
    return TariffConfig.from_dict(json.loads(Path(path).read_text()))
