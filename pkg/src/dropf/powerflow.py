"""AC network equations in polar form and Newton-Raphson power flow.

All quantities are per unit on the case base unless a name says MW/MVAr.
The derivative helpers work on dense complex matrices and return
derivatives with respect to voltage angle (``_va``) and magnitude (``_vm``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .case import AdmittanceMatrix, Branch, BusKind, NetworkCase, branch_admittances, build_admittance

log = logging.getLogger(__name__)


class PowerFlowError(RuntimeError):
    pass


class PowerFlowDivergence(PowerFlowError):
    def __init__(self, message: str, mismatch: float, iterations: int):
        super().__init__(message)
        self.mismatch = mismatch
        self.iterations = iterations


class SingularJacobianError(PowerFlowError):
    pass


@dataclass(frozen=True, eq=False)
class SystemState:
    """Bus voltages (p.u., rad) and generator outputs (MW, MVAr, case order)."""

    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray
    qg: np.ndarray

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)


class BranchFlow(NamedTuple):
    p_from: float
    q_from: float
    p_to: float
    q_to: float


# ---------------------------------------------------------------------------
# Flows and mismatches
# ---------------------------------------------------------------------------


def branch_flow(state: SystemState, branch: Branch, Y: AdmittanceMatrix) -> BranchFlow:
    """Complex power entering ``branch`` at each end, p.u.

    Uses the series conductance G and susceptance B of the branch, half the
    charging susceptance at each end and an off-nominal tap at the from end.
    """
    n, m = Y.bus_index[branch.from_bus], Y.bus_index[branch.to_bus]
    vn, vm = state.vm[n], state.vm[m]
    theta = state.va[n] - state.va[m]
    y = 1.0 / complex(branch.r, branch.x)
    g, b = y.real, y.imag
    bsh = branch.b_charging / 2.0
    tap = branch.tap_ratio
    vn_eff = vn / tap
    p_from = vn_eff ** 2 * g - vn_eff * vm * (g * np.cos(theta) + b * np.sin(theta))
    q_from = -vn_eff ** 2 * (b + bsh) - vn_eff * vm * (g * np.sin(theta) - b * np.cos(theta))
    p_to = vm ** 2 * g - vm * vn_eff * (g * np.cos(-theta) + b * np.sin(-theta))
    q_to = -vm ** 2 * (b + bsh) - vm * vn_eff * (g * np.sin(-theta) - b * np.cos(-theta))
    return BranchFlow(float(p_from), float(q_from), float(p_to), float(q_to))


def generator_matrix(case: NetworkCase) -> np.ndarray:
    """Bus-by-generator incidence of in-service units (nb x n_active)."""
    gens = [g for g in case.generators if g.in_service]
    cg = np.zeros((case.n_bus, len(gens)))
    for k, g in enumerate(gens):
        cg[case.bus_index[g.bus], k] = 1.0
    return cg


def bus_injection(Y: AdmittanceMatrix, V: np.ndarray) -> np.ndarray:
    return V * np.conj(Y.ybus @ V)


def bus_mismatch(state: SystemState, case: NetworkCase, loads: tuple[np.ndarray, np.ndarray],
                 Y: AdmittanceMatrix | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus (dP, dQ) in p.u.: generation minus load minus power leaving the bus.

    ``loads`` is (P_d, Q_d) in MW/MVAr in bus order. Power leaving a bus
    includes its branch flows and its shunt.
    """
    Y = Y or build_admittance(case)
    pd, qd = (np.asarray(x, dtype=float) for x in loads)
    gen_p = np.zeros(case.n_bus)
    gen_q = np.zeros(case.n_bus)
    for k, g in enumerate(case.generators):
        if g.in_service:
            gen_p[case.bus_index[g.bus]] += state.pg[k]
            gen_q[case.bus_index[g.bus]] += state.qg[k]
    s = bus_injection(Y, state.voltage)
    dp = (gen_p - pd) / case.base_mva - s.real
    dq = (gen_q - qd) / case.base_mva - s.imag
    return dp, dq


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------


def dSbus_dV(ybus: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of bus injections V*conj(Ybus V): (dS/dVa, dS/dVm)."""
    ibus = ybus @ V
    vnorm = V / np.abs(V)
    ds_dvm = V[:, None] * np.conj(ybus * vnorm[None, :]) + np.diag(np.conj(ibus) * vnorm)
    ds_dva = 1j * V[:, None] * np.conj(np.diag(ibus) - ybus * V[None, :])
    return ds_dva, ds_dvm


def incidence(idx: np.ndarray, nb: int) -> np.ndarray:
    c = np.zeros((len(idx), nb))
    c[np.arange(len(idx)), idx] = 1.0
    return c


def dSbr_dV(ybr: np.ndarray, cbr: np.ndarray, V: np.ndarray
            ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Branch-end power S = (Cbr V) * conj(Ybr V) and its derivatives (dS/dVa, dS/dVm, S)."""
    ibr = ybr @ V
    vbr = cbr @ V
    vnorm = V / np.abs(V)
    ds_dva = 1j * (np.conj(ibr)[:, None] * cbr * V[None, :]
                   - vbr[:, None] * np.conj(ybr * V[None, :]))
    ds_dvm = (vbr[:, None] * np.conj(ybr * vnorm[None, :])
              + np.conj(ibr)[:, None] * cbr * vnorm[None, :])
    return ds_dva, ds_dvm, vbr * np.conj(ibr)


def dAbr_dV(ds_dva: np.ndarray, ds_dvm: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of squared apparent power |S|^2."""
    da_dva = 2 * (s.real[:, None] * ds_dva.real + s.imag[:, None] * ds_dva.imag)
    da_dvm = 2 * (s.real[:, None] * ds_dvm.real + s.imag[:, None] * ds_dvm.imag)
    return da_dva, da_dvm


def d2Sbus_dV2(ybus: np.ndarray, V: np.ndarray, lam: np.ndarray):
    """Second derivatives of lam^T (V*conj(Ybus V)) as (Gaa, Gav, Gva, Gvv)."""
    ibus = ybus @ V
    lv = lam * V
    C = lv[:, None] * np.conj(ybus * V[None, :])
    D = ybus.conj().T * V[None, :]
    E = np.conj(V)[:, None] * (D * lam[None, :] - np.diag(D @ lam))
    F = C - np.diag(lv * np.conj(ibus))
    ginv = 1.0 / np.abs(V)
    gaa = E + F
    gva = 1j * ginv[:, None] * (E - F)
    gvv = ginv[:, None] * (C + C.T) * ginv[None, :]
    return gaa, gva.T, gva, gvv


def d2Sbr_dV2(cbr: np.ndarray, ybr: np.ndarray, V: np.ndarray, lam: np.ndarray):
    """Second derivatives of lam^T S_br (complex lam) as (Saa, Sav, Sva, Svv)."""
    A = ybr.conj().T @ (lam[:, None] * cbr)
    B = np.conj(V)[:, None] * A * V[None, :]
    D = np.diag((A @ V) * np.conj(V))
    E = np.diag((A.T @ np.conj(V)) * V)
    F = B + B.T
    ginv = 1.0 / np.abs(V)
    saa = F - D - E
    sva = 1j * ginv[:, None] * (B - B.T - D + E)
    svv = ginv[:, None] * F * ginv[None, :]
    return saa, sva.T, sva, svv


def d2ASbr_dV2(ds_dva, ds_dvm, s, cbr, ybr, V, lam):
    """Second derivatives of lam^T |S_br|^2 as (Haa, Hav, Hva, Hvv)."""
    saa, sav, sva, svv = d2Sbr_dV2(cbr, ybr, V, np.conj(s) * lam)
    haa = 2 * np.real(saa + ds_dva.T @ (lam[:, None] * np.conj(ds_dva)))
    hva = 2 * np.real(sva + ds_dvm.T @ (lam[:, None] * np.conj(ds_dva)))
    hav = 2 * np.real(sav + ds_dva.T @ (lam[:, None] * np.conj(ds_dvm)))
    hvv = 2 * np.real(svv + ds_dvm.T @ (lam[:, None] * np.conj(ds_dvm)))
    return haa, hav, hva, hvv


# ---------------------------------------------------------------------------
# Newton-Raphson power flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PowerFlowResult:
    state: SystemState
    iterations: int
    mismatch: float


def bus_types(case: NetworkCase) -> tuple[int, np.ndarray, np.ndarray]:
    """(slack index, PV indices, PQ indices). PV buses need an in-service generator."""
    has_gen = np.zeros(case.n_bus, dtype=bool)
    for g in case.generators:
        if g.in_service:
            has_gen[case.bus_index[g.bus]] = True
    ref = case.slack_index
    pv = [k for k, b in enumerate(case.buses) if b.kind is BusKind.PV and has_gen[k]]
    pq = [k for k in range(case.n_bus) if k != ref and k not in pv]
    return ref, np.array(pv, dtype=int), np.array(pq, dtype=int)


def newton_pf(ybus: np.ndarray, sbus: np.ndarray, V0: np.ndarray, ref: int, pv: np.ndarray,
              pq: np.ndarray, tol: float = 1e-8, max_iter: int = 30) -> tuple[np.ndarray, int, float]:
    """Solve V*conj(Ybus V) = Sbus for PV/PQ unknowns; returns (V, iterations, max mismatch)."""
    V = V0.astype(complex).copy()
    va, vm = np.angle(V), np.abs(V)
    pvpq = np.r_[pv, pq]
    npvpq, npq = len(pvpq), len(pq)

    def mismatch(V):
        mis = V * np.conj(ybus @ V) - sbus
        return np.r_[mis[pvpq].real, mis[pq].imag]

    F = mismatch(V)
    err = float(np.max(np.abs(F))) if F.size else 0.0
    it = 0
    while err > tol:
        if it >= max_iter:
            raise PowerFlowDivergence(
                f"power flow did not converge in {max_iter} iterations "
                f"(max mismatch {err:.3e} p.u.)", err, it)
        it += 1
        ds_dva, ds_dvm = dSbus_dV(ybus, V)
        J = np.block([
            [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
            [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"power flow Jacobian is singular at iteration {it}") from exc
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:npvpq + npq]
        V = vm * np.exp(1j * va)
        F = mismatch(V)
        err = float(np.max(np.abs(F)))
        if not np.isfinite(err):
            raise PowerFlowDivergence("power flow diverged (non-finite mismatch)", err, it)
        log.debug("NR iteration %d: max mismatch %.3e", it, err)
    return V, it, err


def solve_power_flow(case: NetworkCase, loads: tuple[np.ndarray, np.ndarray] | None = None,
                     pg: Sequence[float] | None = None, vg: Sequence[float] | None = None,
                     Y: AdmittanceMatrix | None = None, tol: float = 1e-8,
                     max_iter: int = 30) -> PowerFlowResult:
    """Newton-Raphson power flow from a flat start.

    ``pg`` (MW) and ``vg`` (p.u.) are per-generator setpoints in case order,
    defaulting to the case file values. The slack generator(s) absorb the
    residual active power; reactive output at PV and slack buses is shared
    equally among the in-service units there.
    """
    Y = Y or build_admittance(case)
    pd, qd = case.base_loads() if loads is None else (np.asarray(x, float) for x in loads)
    gens = case.generators
    pg = np.array([g.pg0 for g in gens] if pg is None else pg, dtype=float)
    vg = np.array([g.vg for g in gens] if vg is None else vg, dtype=float)
    qg = np.array([g.qg0 for g in gens], dtype=float)
    ref, pv, pq = bus_types(case)

    base = case.base_mva
    sbus = -(pd + 1j * qd) / base
    V0 = np.ones(case.n_bus, dtype=complex)
    for k, g in enumerate(gens):
        if not g.in_service:
            continue
        b = case.bus_index[g.bus]
        sbus[b] += (pg[k] + 1j * qg[k]) / base
        if b == ref or b in pv:
            V0[b] = vg[k]
    # reactive output at voltage-controlled buses is solved for, not fixed
    for k, g in enumerate(gens):
        b = case.bus_index[g.bus]
        if g.in_service and (b == ref or b in pv):
            sbus[b] -= 1j * qg[k] / base

    V, iterations, err = newton_pf(Y.ybus, sbus, V0, ref, pv, pq, tol, max_iter)

    s = bus_injection(Y, V) * base
    pg_out, qg_out = pg.copy(), qg.copy()
    for k, g in enumerate(gens):
        if not g.in_service:
            pg_out[k] = qg_out[k] = 0.0
    controlled = {ref, *pv.tolist()}
    for b in controlled:
        at_bus = [k for k, g in enumerate(gens) if g.in_service and case.bus_index[g.bus] == b]
        q_needed = s[b].imag + qd[b]
        for k in at_bus:
            qg_out[k] = q_needed / len(at_bus)
        if b == ref:
            others = sum(pg_out[k] for k in at_bus[1:])
            pg_out[at_bus[0]] = s[b].real + pd[b] - others
    state = SystemState(np.abs(V), np.angle(V), pg_out, qg_out)
    return PowerFlowResult(state, iterations, err)
