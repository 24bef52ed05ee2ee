"""Single-period AC optimal power flow with quadratic generation cost.

Variables are bus voltage angles and magnitudes plus generator active and
reactive outputs. The reference bus is pinned at angle 0 and magnitude 1.0;
all other magnitudes stay within their bus limits. Branch ratings are
enforced on squared apparent power at both ends.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import ipm
from .case import AdmittanceMatrix, Generator, NetworkCase, build_admittance
from .powerflow import (
    SystemState,
    branch_flow,
    bus_mismatch,
    d2ASbr_dV2,
    d2Sbus_dV2,
    dAbr_dV,
    dSbr_dV,
    dSbus_dV,
    generator_matrix,
    incidence,
)

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6


class OpfError(RuntimeError):
    pass


class OpfInfeasibleError(OpfError):
    def __init__(self, message: str, constraints: list[str]):
        super().__init__(f"{message}; binding/violated: {', '.join(constraints) or 'unknown'}")
        self.constraints = constraints


class OpfConvergenceError(OpfError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def generation_cost(pg: float, gen: Generator) -> float:
    """Hourly cost in $/h of producing ``pg`` MW."""
    return gen.cost_a * pg ** 2 + gen.cost_b * pg + gen.cost_c


@dataclass
class OpfOptions:
    angle_limit: float = math.pi / 2  # bound on |va_from - va_to|, rad
    feastol: float = FEASIBILITY_TOL
    kkt_tol: float = 1e-6
    eq_tol: float = 1e-9
    max_iter: int = 150
    cost_scale: float = 1e-4
    keep_history: bool = False


@dataclass(frozen=True, eq=False)
class OpfSolution:
    state: SystemState
    objective: float
    # per case branch: (P_from, Q_from, P_to, Q_to) in MW/MVAr
    branch_flows: np.ndarray
    violations: tuple[tuple[str, float], ...]
    converged: bool
    iterations: int
    binding: tuple[str, ...] = ()
    lmp: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_mismatch: float = 0.0
    history: tuple[dict, ...] = ()

    def diagnostics(self) -> dict:
        return {
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "max_mismatch_pu": self.max_mismatch,
            "binding": list(self.binding),
            "violations": [list(v) for v in self.violations],
            "iterates": list(self.history),
        }


def _gen_label(case: NetworkCase, k: int) -> str:
    return f"gen {k + 1} (bus {case.generators[k].bus})"


def _branch_label(case: NetworkCase, k: int) -> str:
    br = case.branches[k]
    return f"branch {k + 1} ({br.from_bus}-{br.to_bus})"


class AcOpf:
    """AC OPF model for one network; call :meth:`solve` once per load snapshot.

    Instances hold no state between solves, so separate instances may run in
    parallel over the same (immutable) case.
    """

    def __init__(self, case: NetworkCase, options: OpfOptions | None = None,
                 Y: AdmittanceMatrix | None = None):
        self.case = case
        self.options = options or OpfOptions()
        self.Y = Y or build_admittance(case)
        nb = case.n_bus
        self.gen_ids = [k for k, g in enumerate(case.generators) if g.in_service]
        gens = [case.generators[k] for k in self.gen_ids]
        ng = len(gens)
        self.nb, self.ng = nb, ng
        self.nx = 2 * nb + 2 * ng
        self.cg = generator_matrix(case)
        self.ref = case.slack_index
        base = case.base_mva

        self.cost_a = np.array([g.cost_a for g in gens]) * base ** 2
        self.cost_b = np.array([g.cost_b for g in gens]) * base
        self.cost_c = np.array([g.cost_c for g in gens])

        Y = self.Y
        rated = [row for row, k in enumerate(Y.branch_ids) if case.branches[k].s_max > 0]
        self.rated = np.array(rated, dtype=int)
        self.flow_max2 = np.array(
            [(case.branches[Y.branch_ids[r]].s_max / base) ** 2 for r in rated])
        self.yf = Y.yf[self.rated]
        self.yt = Y.yt[self.rated]
        self.cf = incidence(Y.f[self.rated], nb)
        self.ct = incidence(Y.t[self.rated], nb)

        iva, ivm = np.arange(nb), nb + np.arange(nb)
        ipg, iqg = 2 * nb + np.arange(ng), 2 * nb + ng + np.arange(ng)
        self.idx = (iva, ivm, ipg, iqg)

        eq_rows, eq_rhs, eq_names = [], [], []
        iq_rows, iq_rhs, iq_names = [], [], []

        def unit(j, sign=1.0):
            row = np.zeros(self.nx)
            row[j] = sign
            return row

        eq_rows += [unit(iva[self.ref]), unit(ivm[self.ref])]
        eq_rhs += [0.0, 1.0]
        eq_names += [f"va_ref[bus {case.buses[self.ref].id}]",
                     f"vm_ref[bus {case.buses[self.ref].id}]"]

        def bound(j, lo, hi, label):
            if lo == hi:
                eq_rows.append(unit(j))
                eq_rhs.append(lo)
                eq_names.append(f"fixed[{label}]")
                return
            iq_rows.append(unit(j))
            iq_rhs.append(hi)
            iq_names.append(f"max[{label}]")
            iq_rows.append(unit(j, -1.0))
            iq_rhs.append(-lo)
            iq_names.append(f"min[{label}]")

        for b, bus in enumerate(case.buses):
            if b != self.ref:
                bound(ivm[b], bus.vmin, bus.vmax, f"vm bus {bus.id}")
        for k, g in enumerate(gens):
            label = _gen_label(case, self.gen_ids[k])
            bound(ipg[k], g.pmin / base, g.pmax / base, f"pg {label}")
        for k, g in enumerate(gens):
            label = _gen_label(case, self.gen_ids[k])
            bound(iqg[k], g.qmin / base, g.qmax / base, f"qg {label}")
        lim = self.options.angle_limit
        if math.isfinite(lim):
            for row, k in enumerate(Y.branch_ids):
                r = np.zeros(self.nx)
                r[iva[Y.f[row]]] += 1.0
                r[iva[Y.t[row]]] -= 1.0
                label = _branch_label(case, k)
                iq_rows += [r, -r]
                iq_rhs += [lim, lim]
                iq_names += [f"max[angle {label}]", f"min[angle {label}]"]

        self.A_eq = np.array(eq_rows).reshape(-1, self.nx)
        self.b_eq = np.array(eq_rhs)
        self.A_iq = np.array(iq_rows).reshape(-1, self.nx)
        self.b_iq = np.array(iq_rhs)
        flow_names = ([f"smax_from[{_branch_label(case, Y.branch_ids[r])}]" for r in rated]
                      + [f"smax_to[{_branch_label(case, Y.branch_ids[r])}]" for r in rated])
        self.eq_names = eq_names
        self.iq_names = flow_names + iq_names

    # -- problem functions -------------------------------------------------

    def _voltage(self, x):
        iva, ivm, _, _ = self.idx
        return x[ivm] * np.exp(1j * x[iva])

    def objective(self, x):
        _, _, ipg, _ = self.idx
        pg = x[ipg]
        s = self.options.cost_scale
        f = s * float(np.sum(self.cost_a * pg ** 2 + self.cost_b * pg + self.cost_c))
        df = np.zeros(self.nx)
        df[ipg] = s * (2 * self.cost_a * pg + self.cost_b)
        return f, df

    def constraints(self, x, sd):
        nb, ng = self.nb, self.ng
        _, _, ipg, iqg = self.idx
        V = self._voltage(x)
        ybus = self.Y.ybus
        mis = V * np.conj(ybus @ V) + sd - self.cg @ (x[ipg] + 1j * x[iqg])
        ds_dva, ds_dvm = dSbus_dV(ybus, V)
        zeros = np.zeros((nb, ng))
        Jg = np.vstack([
            np.hstack([ds_dva.real, ds_dvm.real, -self.cg, zeros]),
            np.hstack([ds_dva.imag, ds_dvm.imag, zeros, -self.cg]),
            self.A_eq,
        ])
        g = np.r_[mis.real, mis.imag, self.A_eq @ x - self.b_eq]

        if len(self.rated):
            dsf_dva, dsf_dvm, sf = dSbr_dV(self.yf, self.cf, V)
            dst_dva, dst_dvm, st = dSbr_dV(self.yt, self.ct, V)
            daf_dva, daf_dvm = dAbr_dV(dsf_dva, dsf_dvm, sf)
            dat_dva, dat_dvm = dAbr_dV(dst_dva, dst_dvm, st)
            pad = np.zeros((len(self.rated), 2 * ng))
            h_flow = np.r_[np.abs(sf) ** 2 - self.flow_max2, np.abs(st) ** 2 - self.flow_max2]
            J_flow = np.vstack([np.hstack([daf_dva, daf_dvm, pad]),
                                np.hstack([dat_dva, dat_dvm, pad])])
        else:
            h_flow = np.zeros(0)
            J_flow = np.zeros((0, self.nx))
        h = np.r_[h_flow, self.A_iq @ x - self.b_iq]
        Jh = np.vstack([J_flow, self.A_iq])
        return g, h, Jg, Jh

    def hessian(self, x, lam, mu):
        nb = self.nb
        _, _, ipg, _ = self.idx
        V = self._voltage(x)
        H = np.zeros((self.nx, self.nx))
        H[ipg, ipg] = self.options.cost_scale * 2 * self.cost_a

        gp = d2Sbus_dV2(self.Y.ybus, V, lam[:nb])
        gq = d2Sbus_dV2(self.Y.ybus, V, lam[nb:2 * nb])
        vv = slice(0, 2 * nb)
        H[vv, vv] += np.block([[gp[0].real + gq[0].imag, gp[1].real + gq[1].imag],
                               [gp[2].real + gq[2].imag, gp[3].real + gq[3].imag]])
        nr = len(self.rated)
        if nr:
            for ybr, cbr, m in ((self.yf, self.cf, mu[:nr]), (self.yt, self.ct, mu[nr:2 * nr])):
                ds_dva, ds_dvm, s = dSbr_dV(ybr, cbr, V)
                haa, hav, hva, hvv = d2ASbr_dV2(ds_dva, ds_dvm, s, cbr, ybr, V, m)
                H[vv, vv] += np.block([[haa, hav], [hva, hvv]])
        return H

    # -- solve ---------------------------------------------------------------

    def initial_point(self, pd: np.ndarray) -> np.ndarray:
        case = self.case
        iva, ivm, ipg, iqg = self.idx
        gens = [case.generators[k] for k in self.gen_ids]
        x = np.zeros(self.nx)
        for b, bus in enumerate(case.buses):
            x[ivm[b]] = 1.0 if b == self.ref else min(max(1.0, bus.vmin), bus.vmax)
        pmax = np.array([g.pmax for g in gens])
        pmin = np.array([g.pmin for g in gens])
        share = pmax / pmax.sum() if pmax.sum() > 0 else np.full(len(gens), 1 / len(gens))
        x[ipg] = np.clip(pd.sum() * share, pmin, pmax) / case.base_mva
        x[iqg] = np.array([(g.qmin + g.qmax) / 2 for g in gens]) / case.base_mva
        return x

    def solve(self, loads: tuple[np.ndarray, np.ndarray] | None = None) -> OpfSolution:
        case = self.case
        base = case.base_mva
        pd, qd = case.base_loads() if loads is None else (np.asarray(v, float) for v in loads)
        gens = [case.generators[k] for k in self.gen_ids]
        capacity = sum(g.pmax for g in gens)
        if capacity < pd.sum():
            raise OpfInfeasibleError(
                f"total load {pd.sum():.6g} MW exceeds generation capacity {capacity:.6g} MW",
                [f"max[pg {_gen_label(case, k)}]" for k in self.gen_ids])

        sd = (pd + 1j * qd) / base
        opts = ipm.IpmOptions(feastol=self.options.feastol, gradtol=self.options.kkt_tol,
                              comptol=self.options.kkt_tol, costtol=self.options.kkt_tol,
                              eqtol=self.options.eq_tol, max_iter=self.options.max_iter)
        res = ipm.solve(self.objective, lambda x: self.constraints(x, sd), self.hessian,
                        self.initial_point(pd), opts)
        if not res.converged:
            res = self._retry(sd, pd, opts, res)
        if not res.converged:
            self._raise_failure(res, sd)
        return self._package(res, pd, qd)

    def _retry(self, sd, pd, opts, first):
        log.info("IPM failed (%s); retrying from a mid-range voltage start", first.message)
        iva, ivm, _, _ = self.idx
        x0 = self.initial_point(pd)
        for b, bus in enumerate(self.case.buses):
            if b != self.ref:
                x0[ivm[b]] = 0.5 * (bus.vmin + bus.vmax)
        retry_opts = ipm.IpmOptions(**{**opts.__dict__, "sigma": 0.2,
                                       "max_iter": 2 * opts.max_iter})
        res = ipm.solve(self.objective, lambda x: self.constraints(x, sd), self.hessian,
                        x0, retry_opts)
        return res if res.converged else first

    def _raise_failure(self, res, sd):
        g, h, _, _ = self.constraints(res.x, sd)
        names = ([f"balance_p[bus {b.id}]" for b in self.case.buses]
                 + [f"balance_q[bus {b.id}]" for b in self.case.buses] + self.eq_names)
        worst_eq = float(np.max(np.abs(g))) if g.size else 0.0
        worst_iq = float(np.max(h)) if h.size else 0.0
        diagnostics = {"message": res.message, "iterations": res.iterations,
                       "max_equality_residual": worst_eq, "max_inequality_violation": worst_iq,
                       "last_iterates": res.history[-5:]}
        if max(worst_eq, worst_iq) > 1e-3:
            violated = [names[i] for i in np.flatnonzero(np.abs(g) > 1e-3)]
            violated += [self.iq_names[i] for i in np.flatnonzero(h > 1e-3)]
            # bounds pressing hardest on the last iterate
            scale = self.options.cost_scale
            order = np.argsort(-res.mu)
            pressing = [self.iq_names[i] for i in order[:5] if res.mu[i] / scale > 1.0]
            raise OpfInfeasibleError("AC OPF is infeasible", violated + pressing)
        raise OpfConvergenceError(
            f"AC OPF did not converge after {res.iterations} iterations ({res.message}); "
            f"max equality residual {worst_eq:.3e}", diagnostics)

    def _package(self, res, pd, qd) -> OpfSolution:
        case = self.case
        base = case.base_mva
        iva, ivm, ipg, iqg = self.idx
        x = res.x
        pg = np.zeros(len(case.generators))
        qg = np.zeros(len(case.generators))
        pg[self.gen_ids] = x[ipg] * base
        qg[self.gen_ids] = x[iqg] * base
        state = SystemState(x[ivm].copy(), x[iva].copy(), pg, qg)
        objective = float(sum(generation_cost(pg[k], case.generators[k]) for k in self.gen_ids))

        V = state.voltage
        Y = self.Y
        flows = np.zeros((len(case.branches), 4))
        sf = (Y.yf @ V).conj() * V[Y.f] * base
        st = (Y.yt @ V).conj() * V[Y.t] * base
        flows[Y.branch_ids] = np.column_stack([sf.real, sf.imag, st.real, st.imag])

        scale = self.options.cost_scale
        mu = res.mu / scale
        g, h, _, _ = self.constraints(x, (pd + 1j * qd) / base)
        threshold = 1e-6 * (1 + float(np.max(np.abs(res.lam))) / scale)
        binding = tuple(self.iq_names[i] for i in range(len(h))
                        if mu[i] > threshold and h[i] > -1e-4)
        lmp = res.lam[:self.nb] / scale / base
        violations = check_constraints(case, state, (pd, qd), Y, self.options)
        return OpfSolution(
            state=state, objective=objective, branch_flows=flows,
            violations=tuple(violations), converged=not violations, iterations=res.iterations,
            binding=binding, lmp=lmp, max_mismatch=float(np.max(np.abs(g[:2 * self.nb]))),
            history=tuple(res.history) if self.options.keep_history else (),
        )


def check_constraints(case: NetworkCase, state: SystemState, loads, Y: AdmittanceMatrix | None = None,
                      options: OpfOptions | None = None) -> list[tuple[str, float]]:
    """List every OPF constraint violated by more than the feasibility tolerance (p.u.).

    Evaluated from the state alone: bus balances, branch ratings at both ends,
    voltage and angle limits, reference values and generator bounds.
    """
    options = options or OpfOptions()
    tol = options.feastol
    Y = Y or build_admittance(case)
    base = case.base_mva
    out: list[tuple[str, float]] = []

    def report(name, amount):
        if amount > tol:
            out.append((name, float(amount)))

    dp, dq = bus_mismatch(state, case, loads, Y)
    for b, bus in enumerate(case.buses):
        report(f"balance_p[bus {bus.id}]", abs(dp[b]))
        report(f"balance_q[bus {bus.id}]", abs(dq[b]))
    ref = case.slack_index
    report("vm_ref", abs(state.vm[ref] - 1.0))
    report("va_ref", abs(state.va[ref]))
    for b, bus in enumerate(case.buses):
        report(f"max[vm bus {bus.id}]", state.vm[b] - bus.vmax)
        report(f"min[vm bus {bus.id}]", bus.vmin - state.vm[b])
    for k, br in enumerate(case.branches):
        if not br.in_service:
            continue
        label = _branch_label(case, k)
        n, m = case.bus_index[br.from_bus], case.bus_index[br.to_bus]
        diff = state.va[n] - state.va[m]
        report(f"max[angle {label}]", diff - options.angle_limit)
        report(f"min[angle {label}]", -options.angle_limit - diff)
        if br.s_max > 0:
            fl = branch_flow(state, br, Y)
            limit = br.s_max / base
            report(f"smax_from[{label}]", math.hypot(fl.p_from, fl.q_from) - limit)
            report(f"smax_to[{label}]", math.hypot(fl.p_to, fl.q_to) - limit)
    for k, g in enumerate(case.generators):
        if not g.in_service:
            continue
        label = _gen_label(case, k)
        report(f"max[pg {label}]", (state.pg[k] - g.pmax) / base)
        report(f"min[pg {label}]", (g.pmin - state.pg[k]) / base)
        report(f"max[qg {label}]", (state.qg[k] - g.qmax) / base)
        report(f"min[qg {label}]", (g.qmin - state.qg[k]) / base)
    return out


def solve_opf(case: NetworkCase, loads=None, options: OpfOptions | None = None,
              Y: AdmittanceMatrix | None = None) -> OpfSolution:
    return AcOpf(case, options, Y).solve(loads)
