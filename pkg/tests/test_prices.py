import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dropf import datasets
from dropf.prices import (
    DEFAULT_PERIOD_MAP,
    HOURS,
    Period,
    PeriodMap,
    TariffConfig,
    TariffError,
    build_rtp_schedule,
    build_tou_schedule,
    flat_baseline,
    load_tariff_config,
    rtp_ranks,
)

LEVELS = (30, 50, 70, 100, 120)


@pytest.mark.parametrize("price", [70, 1])
def test_flat_baseline(price):
    s = flat_baseline(price)
    assert s.prices.shape == (HOURS,)
    assert np.all(s.prices == price)
    assert np.all(s.deviation == 0)


@pytest.mark.parametrize("price", [0, -5])
def test_flat_baseline_rejects_nonpositive(price):
    with pytest.raises(TariffError):
        flat_baseline(price)


def test_default_period_map():
    hours = DEFAULT_PERIOD_MAP.to_hours()
    assert hours["valley"] == list(range(1, 9))
    assert hours["peak"] == list(range(17, 23))
    assert hours["off_peak"] == list(range(9, 17)) + [23, 24]


def test_tou_levels():
    s = build_tou_schedule(DEFAULT_PERIOD_MAP, 30, 70, 120, flat_baseline(70))
    for h in DEFAULT_PERIOD_MAP.hours_of(Period.PEAK):
        assert s.prices[h] == 120
    for h in DEFAULT_PERIOD_MAP.hours_of(Period.VALLEY):
        assert s.prices[h] == 30
    for h in DEFAULT_PERIOD_MAP.hours_of(Period.OFF_PEAK):
        assert s.prices[h] == 70


def test_tou_equal_levels_is_flat():
    s = build_tou_schedule(DEFAULT_PERIOD_MAP, 50, 50, 50, flat_baseline(50))
    assert np.array_equal(s.prices, flat_baseline(50).prices)


def test_tou_unordered_levels():
    with pytest.raises(TariffError):
        build_tou_schedule(DEFAULT_PERIOD_MAP, 120, 70, 30, flat_baseline(70))


def test_period_map_must_cover_every_hour():
    with pytest.raises(TariffError):
        PeriodMap.from_hours({"peak": range(1, 12), "valley": range(12, 24)})
    with pytest.raises(TariffError):
        PeriodMap.from_hours({"peak": range(1, 13), "valley": range(12, 25)})


def test_rtp_monotone_profile():
    s = build_rtp_schedule(np.arange(1.0, 25.0), LEVELS, flat_baseline(70))
    p = s.prices
    assert np.all(p[:5] == 30)
    assert np.all(p[5:10] == 50)
    assert np.all(p[10:15] == 70)
    assert np.all(p[15:20] == 100)
    assert np.all(p[20:] == 120)
    assert sorted(np.unique(p, return_counts=True)[1].tolist()) == [4, 5, 5, 5, 5]


def test_rtp_constant_profile_ties_by_hour():
    s = build_rtp_schedule(np.full(24, 10.0), LEVELS, flat_baseline(70))
    assert np.array_equal(s.prices, build_rtp_schedule(np.arange(24.0), LEVELS,
                                                       flat_baseline(70)).prices)


def test_rtp_default_profile():
    profile = datasets.default_profile()
    s = build_rtp_schedule(profile, LEVELS, flat_baseline(70))
    assert s.prices.tolist() == [50, 30, 30, 30, 30, 30, 50, 50, 50, 70, 70, 100,
                                 100, 70, 70, 100, 100, 120, 120, 120, 120, 100, 70, 50]


@pytest.mark.parametrize("levels", [(30, 50, 70, 100), (30, 50, 50, 100, 120), (0, 1, 2, 3, 4)])
def test_rtp_bad_levels(levels):
    with pytest.raises(TariffError):
        build_rtp_schedule(np.arange(24.0), levels, flat_baseline(70))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 500, allow_nan=False), min_size=24, max_size=24),
       st.permutations(list(range(24))))
def test_rtp_is_permutation_equivariant(values, perm):
    """Permuting distinct demands permutes the prices the same way."""
    demand = np.array(values) + np.arange(24) * 1e-3  # break ties
    if len(np.unique(demand)) < 24:
        return
    perm = np.array(perm)
    base = build_rtp_schedule(demand, LEVELS, flat_baseline(70)).prices
    moved = build_rtp_schedule(demand[perm], LEVELS, flat_baseline(70)).prices
    assert np.array_equal(moved, base[perm])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 500, allow_nan=False), min_size=24, max_size=24))
def test_rtp_prices_follow_demand(values):
    demand = np.array(values)
    prices = build_rtp_schedule(demand, LEVELS, flat_baseline(70)).prices
    ranks = rtp_ranks(demand)
    order = np.argsort(ranks)
    assert np.all(np.diff(prices[order]) >= 0)


def test_tariff_config_roundtrip(tmp_path):
    cfg = datasets.default_tariff()
    assert cfg.baseline_price == 70
    path = tmp_path / "t.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = load_tariff_config(path)
    assert again.to_dict() == cfg.to_dict()
    assert np.array_equal(again.tou().prices, cfg.tou().prices)


def test_tariff_config_defaults_match_bundled():
    assert TariffConfig().to_dict() == datasets.default_tariff().to_dict()
