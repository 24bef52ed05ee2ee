import numpy as np
import pytest

from dropf import datasets
from dropf.case import Branch, Bus, BusKind, Generator, NetworkCase

STUDY_COSTS = {1: (0.043, 20.0, 0.0), 2: (0.25, 20.0, 0.0)}


def two_bus_case(x=0.1, load_mw=50.0, r=0.0, b_charging=0.0, s_max=0.0):
    buses = (Bus(1, BusKind.SLACK, vmin=0.5, vmax=1.5),
             Bus(2, BusKind.PQ, base_pd=load_mw, vmin=0.5, vmax=1.5))
    branch = Branch(1, 2, r=r, x=x, b_charging=b_charging, s_max=s_max)
    gen = Generator(1, 0.0, 500.0, -500.0, 500.0, 0.043, 20.0, 0.0, pg0=load_mw)
    return NetworkCase(100.0, buses, (branch,), (gen,), name="two_bus")


def copper_plate(p1_max=200.0, costs=((0.043, 20.0, 0.0), (0.25, 20.0, 0.0)), load_mw=100.0):
    """Single bus with two units and no network: losses and flows cannot matter."""
    bus = Bus(1, BusKind.SLACK, base_pd=load_mw)
    gens = tuple(Generator(1, 0.0, pmax, -100.0, 100.0, *c)
                 for pmax, c in zip((p1_max, 200.0), costs))
    return NetworkCase(100.0, (bus,), (), gens, name="copper_plate")


@pytest.fixture(scope="session")
def case14():
    return datasets.ieee14()


@pytest.fixture(scope="session")
def case14_study():
    return datasets.ieee14().with_costs(datasets.study_costs())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def study(case14_study):
    from dropf.scenario import run_study, study_specs

    specs = study_specs(case14_study, datasets.default_profile(), datasets.default_tariff(),
                        datasets.default_elasticity().matrix(datasets.default_tariff().period_map))
    return run_study(specs)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
