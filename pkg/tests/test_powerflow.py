import numpy as np
import pytest

from dropf.case import Branch, Bus, BusKind, Generator, NetworkCase, build_admittance
from dropf.powerflow import (
    PowerFlowDivergence,
    PowerFlowError,
    SystemState,
    branch_flow,
    bus_mismatch,
    d2ASbr_dV2,
    d2Sbr_dV2,
    d2Sbus_dV2,
    dAbr_dV,
    dSbr_dV,
    dSbus_dV,
    incidence,
    solve_power_flow,
)

from conftest import two_bus_case


def _state(vm, va, pg=(0.0,), qg=(0.0,)):
    return SystemState(np.asarray(vm, float), np.asarray(va, float),
                       np.asarray(pg, float), np.asarray(qg, float))


def _flow(vm, va, **branch):
    case = two_bus_case(**branch)
    return branch_flow(_state(vm, va), case.branches[0], build_admittance(case))


def test_flat_lossless_line_carries_nothing():
    f = _flow([1, 1], [0, 0])
    assert f == (0.0, 0.0, 0.0, 0.0)


def test_charging_only():
    f = _flow([1, 1], [0, 0], b_charging=0.1)
    assert f.p_from == pytest.approx(0.0, abs=1e-15)
    assert f.q_from == pytest.approx(-0.05)
    assert f.q_to == pytest.approx(-0.05)


def test_angle_drives_active_power():
    f = _flow([1, 1], [0.1, 0.0])
    assert f.p_from == pytest.approx(10 * np.sin(0.1))
    assert f.p_to == pytest.approx(-10 * np.sin(0.1))


def test_branch_flow_matches_admittance_rows(case14, rng):
    Y = build_admittance(case14)
    for _ in range(5):
        vm = rng.uniform(0.9, 1.1, 14)
        va = rng.uniform(-0.3, 0.3, 14)
        st = _state(vm, va)
        V = st.voltage
        sf = V[Y.f] * np.conj(Y.yf @ V)
        stt = V[Y.t] * np.conj(Y.yt @ V)
        for row, k in enumerate(Y.branch_ids):
            fl = branch_flow(st, case14.branches[k], Y)
            assert complex(fl.p_from, fl.q_from) == pytest.approx(sf[row], abs=1e-12)
            assert complex(fl.p_to, fl.q_to) == pytest.approx(stt[row], abs=1e-12)


def test_mismatch_single_bus_nothing_flows():
    bus = Bus(1, BusKind.SLACK)
    case = NetworkCase(100.0, (bus,), (), (Generator(1, 0, 10, -10, 10),))
    dp, dq = bus_mismatch(_state([1.0], [0.0]), case, (np.zeros(1), np.zeros(1)))
    assert dp[0] == 0 and dq[0] == 0


def test_mismatch_unrolled(case14):
    """With no generation at a loaded bus, dP is -P_d minus the power leaving on lines."""
    Y = build_admittance(case14)
    pf = solve_power_flow(case14, Y=Y)
    pd, qd = case14.base_loads()
    pg = pf.state.pg.copy()
    k = next(i for i, g in enumerate(case14.generators) if g.bus == 2)
    pg[k] = 0.0
    st = SystemState(pf.state.vm, pf.state.va, pg, pf.state.qg)
    dp, _ = bus_mismatch(st, case14, (pd, qd), Y)
    b = case14.bus_index[2]
    exports = 0.0
    for br in case14.branches:
        fl = branch_flow(st, br, Y)
        if br.from_bus == 2:
            exports += fl.p_from
        elif br.to_bus == 2:
            exports += fl.p_to
    assert dp[b] == pytest.approx(-pd[b] / 100 - exports, abs=1e-12)


def _two_bus_oracle(x=0.1, load=0.5):
    """Zoomed grid search of |mismatch| over (vm2, va2), written from S = V conj(I)."""
    y = 1 / (1j * x)

    def residual(vm, va):
        v2 = vm * np.exp(1j * va)
        s2 = v2 * np.conj(y * (v2 - 1.0))
        return np.maximum(np.abs(s2.real + load), np.abs(s2.imag))

    lo_vm, hi_vm, lo_va, hi_va = 0.7, 1.2, -1.0, 0.0
    step = 1e-3
    while True:
        vm = np.arange(lo_vm, hi_vm + step / 2, step)
        va = np.arange(lo_va, hi_va + step / 2, step)
        VM, VA = np.meshgrid(vm, va, indexing="ij")
        i, j = np.unravel_index(np.argmin(residual(VM, VA)), VM.shape)
        best = VM[i, j], VA[i, j]
        if step < 1e-10:
            return best
        lo_vm, hi_vm = best[0] - 5 * step, best[0] + 5 * step
        lo_va, hi_va = best[1] - 5 * step, best[1] + 5 * step
        step /= 10


def test_two_bus_newton_matches_grid_search():
    case = two_bus_case(x=0.1, load_mw=50.0)
    pf = solve_power_flow(case)
    vm2, va2 = _two_bus_oracle()
    assert abs(pf.state.vm[1] - vm2) <= 1e-6
    assert abs(pf.state.va[1] - va2) <= 1e-6
    assert pf.mismatch <= 1e-8
    assert pf.state.pg[0] == pytest.approx(50.0, abs=1e-6)  # lossless


def test_zero_load_flat_start_is_solution():
    buses = (Bus(1, BusKind.SLACK), Bus(2, BusKind.PQ), Bus(3, BusKind.PQ))
    branches = (Branch(1, 2, 0.01, 0.1), Branch(2, 3, 0.02, 0.2))
    case = NetworkCase(100.0, buses, branches, (Generator(1, 0, 100, -100, 100),))
    pf = solve_power_flow(case)
    assert pf.iterations == 0
    assert np.all(pf.state.vm == 1) and np.all(pf.state.va == 0)
    assert pf.state.pg[0] == pytest.approx(0.0, abs=1e-12)


def test_ieee14_base_power_flow(case14):
    pf = solve_power_flow(case14)
    assert pf.iterations <= 10
    assert pf.mismatch <= 1e-8
    # widely published solution of this case
    assert pf.state.pg[0] == pytest.approx(232.39, abs=0.01)
    assert pf.state.vm[case14.bus_index[14]] == pytest.approx(1.036, abs=1e-3)
    assert np.degrees(pf.state.va[case14.bus_index[14]]) == pytest.approx(-16.03, abs=0.01)


def test_ieee14_power_conservation(case14):
    """Generation minus load equals losses summed branch by branch plus shunt draw."""
    Y = build_admittance(case14)
    pf = solve_power_flow(case14, Y=Y)
    pd, qd = case14.base_loads()
    losses = sum(branch_flow(pf.state, br, Y).p_from + branch_flow(pf.state, br, Y).p_to
                 for br in case14.branches) * 100
    shunt = sum(b.shunt_gs * pf.state.vm[k] ** 2 for k, b in enumerate(case14.buses))
    assert pf.state.pg.sum() - pd.sum() == pytest.approx(losses + shunt, abs=1e-6)
    dp, dq = bus_mismatch(pf.state, case14, (pd, qd), Y)
    assert max(np.abs(dp).max(), np.abs(dq).max()) <= 1e-8


def test_overload_diverges():
    with pytest.raises(PowerFlowError) as info:
        solve_power_flow(two_bus_case(x=0.1, load_mw=800.0))
    if isinstance(info.value, PowerFlowDivergence):
        assert info.value.mismatch > 1e-8


# ---------------------------------------------------------------------------
# analytic derivatives against central differences
# ---------------------------------------------------------------------------

H = 1e-6


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0)


def _random_voltage(rng, n):
    return rng.uniform(0.9, 1.1, n), rng.uniform(-0.3, 0.3, n)


def _fd(fun, va, vm):
    n = len(va)
    cols_a, cols_m = [], []
    for j in range(n):
        e = np.zeros(n)
        e[j] = H
        cols_a.append((fun(va + e, vm) - fun(va - e, vm)) / (2 * H))
        cols_m.append((fun(va, vm + e) - fun(va, vm - e)) / (2 * H))
    return np.array(cols_a).T, np.array(cols_m).T


def test_bus_injection_jacobian(case14, rng):
    ybus = build_admittance(case14).ybus
    sbus = lambda va, vm: (vm * np.exp(1j * va)) * np.conj(ybus @ (vm * np.exp(1j * va)))
    for _ in range(20):
        vm, va = _random_voltage(rng, 14)
        da, dm = dSbus_dV(ybus, vm * np.exp(1j * va))
        fa, fm = _fd(sbus, va, vm)
        assert _rel(da, fa) <= 1e-5
        assert _rel(dm, fm) <= 1e-5


@pytest.mark.parametrize("end", ["f", "t"])
def test_branch_jacobians(case14, rng, end):
    Y = build_admittance(case14)
    ybr, idx = (Y.yf, Y.f) if end == "f" else (Y.yt, Y.t)
    cbr = incidence(idx, 14)
    sbr = lambda va, vm: dSbr_dV(ybr, cbr, vm * np.exp(1j * va))[2]
    abr = lambda va, vm: np.abs(sbr(va, vm)) ** 2
    for _ in range(5):
        vm, va = _random_voltage(rng, 14)
        da, dm, s = dSbr_dV(ybr, cbr, vm * np.exp(1j * va))
        fa, fm = _fd(sbr, va, vm)
        assert _rel(da, fa) <= 1e-5 and _rel(dm, fm) <= 1e-5
        aa, am = dAbr_dV(da, dm, s)
        fa, fm = _fd(abr, va, vm)
        assert _rel(aa, fa) <= 1e-5 and _rel(am, fm) <= 1e-5


def _hess(blocks):
    aa, av, va, vv = blocks
    return np.block([[aa, av], [va, vv]])


def test_bus_injection_hessian(case14, rng):
    ybus = build_admittance(case14).ybus
    lam = rng.normal(size=14) + 1j * rng.normal(size=14)

    def grad(va, vm):
        da, dm = dSbus_dV(ybus, vm * np.exp(1j * va))
        return np.r_[da.T @ lam, dm.T @ lam]

    for _ in range(3):
        vm, va = _random_voltage(rng, 14)
        fa, fm = _fd(grad, va, vm)
        H_an = _hess(d2Sbus_dV2(ybus, vm * np.exp(1j * va), lam))
        assert _rel(H_an, np.hstack([fa, fm])) <= 1e-5


def test_branch_hessians(case14, rng):
    Y = build_admittance(case14)
    cbr = incidence(Y.f, 14)
    nl = len(Y.f)
    lam_c = rng.normal(size=nl) + 1j * rng.normal(size=nl)
    lam_r = rng.uniform(0, 1, nl)

    def grad_s(va, vm):
        da, dm, _ = dSbr_dV(Y.yf, cbr, vm * np.exp(1j * va))
        return np.r_[da.T @ lam_c, dm.T @ lam_c]

    def grad_a(va, vm):
        da, dm, s = dSbr_dV(Y.yf, cbr, vm * np.exp(1j * va))
        aa, am = dAbr_dV(da, dm, s)
        return np.r_[aa.T @ lam_r, am.T @ lam_r]

    for _ in range(3):
        vm, va = _random_voltage(rng, 14)
        V = vm * np.exp(1j * va)
        fa, fm = _fd(grad_s, va, vm)
        assert _rel(_hess(d2Sbr_dV2(cbr, Y.yf, V, lam_c)), np.hstack([fa, fm])) <= 1e-5
        da, dm, s = dSbr_dV(Y.yf, cbr, V)
        fa, fm = _fd(grad_a, va, vm)
        H_an = _hess(d2ASbr_dV2(da, dm, s, cbr, Y.yf, V, lam_r))
        assert _rel(H_an, np.hstack([fa, fm])) <= 1e-5
