import numpy as np
import pytest

from dropf import datasets
from dropf.case import NetworkCase
from dropf.demand import LoadProfile
from dropf.prices import HOURS, Period
from dropf.scenario import (
    Program,
    ScenarioInfeasibleError,
    ScenarioMismatchError,
    ScenarioSpec,
    compare_scenarios,
    disaggregate_profile,
    run_scenario,
)

from conftest import two_bus_case

# totals from the first verified run of the bundled study (study generator costs)
LOCKED_TOTALS = {
    "baseline": 158982.84684628248,
    "tou_g0.1": 158872.84650455252,
    "tou_g0.2": 158766.21123254404,
    "tou_g0.5": 158465.29647424858,
    "rtp_g0.1": 158934.92619684263,
    "rtp_g0.2": 158889.7231719953,
    "rtp_g0.5": 158769.52420906126,
}


def _spec(case, program=Program.NONE, gamma=0.0, profile=None):
    tariff = datasets.default_tariff()
    return ScenarioSpec(case, profile or datasets.default_profile(), program, gamma, tariff,
                        datasets.default_elasticity().matrix(tariff.period_map))


def test_disaggregate_unit_scale(case14):
    pd0, qd0 = case14.base_loads()
    pd, qd = disaggregate_profile(LoadProfile(np.full(HOURS, pd0.sum())), case14)
    assert np.allclose(pd, pd0[None, :], rtol=1e-15)
    assert np.allclose(qd, qd0[None, :], rtol=1e-15)


def test_disaggregate_doubling_keeps_power_factor(case14):
    pd0, qd0 = case14.base_loads()
    hourly = np.full(HOURS, pd0.sum())
    hourly[5] *= 2
    pd, qd = disaggregate_profile(LoadProfile(hourly), case14)
    assert np.allclose(pd[5], 2 * pd0) and np.allclose(qd[5], 2 * qd0)
    zero = pd0 == 0
    assert zero.any() and np.all(pd[:, zero] == 0)


def test_labels(case14):
    assert _spec(case14).label == "baseline"
    assert _spec(case14, Program.TOU, 0.1).label == "tou_g0.1"
    with pytest.raises(ValueError):
        _spec(case14, Program.RTP, 1.2)


def test_none_tariff_is_identity(study):
    base = study.baseline
    assert np.array_equal(base.modified_profile.hourly_mw, base.base_profile.hourly_mw)
    assert np.all(base.prices == 70)


def test_zero_participation_matches_baseline(case14_study, study):
    tou0 = run_scenario(_spec(case14_study, Program.TOU, 0.0))
    assert tou0.total_cost == pytest.approx(study.baseline.total_cost, rel=1e-9)
    cmp = compare_scenarios(study.baseline, tou0)
    assert abs(cmp.total_delta) <= 1e-9 * study.baseline.total_cost


def test_self_comparison_is_zero(study):
    cmp = compare_scenarios(study.baseline, study.baseline)
    assert cmp.total_delta == 0 and np.all(cmp.hourly_delta == 0) and cmp.peak_delta == 0


def test_comparison_needs_same_case(case14, study):
    other = run_scenario(_spec(case14))
    with pytest.raises(ScenarioMismatchError):
        compare_scenarios(study.baseline, other)


def test_study_regression(study):
    got = {r.label: r.total_cost for r in study.all_results}
    assert set(got) == set(LOCKED_TOTALS)
    for label, total in LOCKED_TOTALS.items():
        assert got[label] == pytest.approx(total, rel=1e-7), label


@pytest.mark.parametrize("program", ["tou", "rtp"])
def test_study_directions(study, program):
    results = [r for r in study.scenarios if r.tariff_kind.value == program]
    assert [r.gamma for r in results] == [0.1, 0.2, 0.5]
    totals = [study.baseline.total_cost] + [r.total_cost for r in results]
    peaks = [study.baseline.modified_profile.peak] + [r.modified_profile.peak for r in results]
    assert np.all(np.diff(totals) < 0)
    assert np.all(np.diff(peaks) < 0)
    valley = datasets.default_tariff().period_map.hours_of(Period.VALLEY)
    for r in results:
        assert np.all(r.modified_profile.hourly_mw[valley]
                      >= study.baseline.modified_profile.hourly_mw[valley])
    assert compare_scenarios(study.baseline, results[-1]).total_delta < 0


def test_threaded_run_matches_serial(case14_study, study):
    threaded = run_scenario(_spec(case14_study, Program.RTP, 0.5), workers=4)
    serial = next(r for r in study.scenarios if r.label == "rtp_g0.5")
    assert np.allclose(threaded.hourly_cost, serial.hourly_cost, rtol=1e-12)


def test_infeasible_hour_raises():
    case = two_bus_case(load_mw=50.0)
    hourly = np.full(HOURS, 50.0)
    hourly[7] = 5000.0
    with pytest.raises(ScenarioInfeasibleError) as info:
        run_scenario(_spec(case, profile=LoadProfile(hourly)))
    assert info.value.hour == 7


def test_summary_fields(study):
    s = study.baseline.summary()
    assert s["scenario"] == "baseline" and s["failed_hours"] == []
    assert s["peak_load_mw"] == 290.0


def test_case_without_load_cannot_be_scaled():
    from dropf.case import Bus, BusKind, Generator

    case = NetworkCase(100.0, (Bus(1, BusKind.SLACK),), (), (Generator(1, 0, 1, -1, 1),))
    with pytest.raises(Exception, match="zero total base load"):
        disaggregate_profile(LoadProfile(np.ones(HOURS)), case)
