"""Primal-dual interior-point method for smooth nonlinear programs.

Solves::

    min f(x)  s.t.  g(x) = 0,  h(x) <= 0

by applying Newton's method to the perturbed KKT conditions with slacks
z > 0 (h + z = 0) and a barrier parameter driven towards zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

ObjectiveFn = Callable[[np.ndarray], tuple[float, np.ndarray]]
# returns (g, h, Jg, Jh) with Jacobians shaped (n_constraints, n_vars)
ConstraintFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
HessianFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class IpmOptions:
    feastol: float = 1e-6
    gradtol: float = 1e-6
    comptol: float = 1e-6
    costtol: float = 1e-6
    # absolute bound on the equality residual, checked on top of feastol
    eqtol: float = 1e-9
    max_iter: int = 150
    xi: float = 0.99995
    sigma: float = 0.1
    z0: float = 1.0


@dataclass
class IpmResult:
    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    lam: np.ndarray
    mu: np.ndarray
    z: np.ndarray
    message: str
    history: list[dict] = field(default_factory=list)


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def solve(f_fcn: ObjectiveFn, gh_fcn: ConstraintFn, hess_fcn: HessianFn, x0: np.ndarray,
          options: IpmOptions | None = None) -> IpmResult:
    opt = options or IpmOptions()
    x = np.array(x0, dtype=float)
    f, df = f_fcn(x)
    g, h, Jg, Jh = gh_fcn(x)
    neq, niq, nx = len(g), len(h), len(x)

    gamma = 1.0
    lam = np.zeros(neq)
    z = np.full(niq, opt.z0)
    mu = np.full(niq, opt.z0)
    k = h < -opt.z0
    z[k] = -h[k]
    k = gamma / z > opt.z0
    mu[k] = gamma / z[k]
    e = np.ones(niq)
    f0 = f

    def conditions():
        Lx = df + Jg.T @ lam + Jh.T @ mu
        maxh = float(np.max(h)) if niq else 0.0
        feas = max(_inf_norm(g), maxh) / (1 + max(_inf_norm(x), _inf_norm(z)))
        grad = _inf_norm(Lx) / (1 + max(_inf_norm(lam), _inf_norm(mu)))
        comp = float(z @ mu) / (1 + _inf_norm(x))
        cost = abs(f - f0) / (1 + abs(f0))
        return Lx, feas, grad, comp, cost

    history: list[dict] = []
    Lx, feas, grad, comp, cost = conditions()
    it = 0
    message = "iteration limit reached"
    converged = False
    # runaway iterates on infeasible problems are caught by the finiteness checks
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        while True:
            history.append({"iteration": it, "f": f, "feascond": feas, "gradcond": grad,
                            "compcond": comp, "costcond": cost, "gamma": gamma,
                            "max_eq_residual": _inf_norm(g)})
            log.debug("IPM it %3d  f=%.8g feas=%.2e grad=%.2e comp=%.2e cost=%.2e", it, f,
                      feas, grad, comp, cost)
            if (feas < opt.feastol and grad < opt.gradtol and comp < opt.comptol
                    and cost < opt.costtol and _inf_norm(g) <= opt.eqtol):
                converged = True
                message = "converged"
                break
            if it >= opt.max_iter:
                break
            it += 1

            Lxx = hess_fcn(x, lam, mu)
            zinv = 1.0 / z
            dh_zinv = Jh.T * zinv[None, :]
            M = Lxx + dh_zinv @ (mu[:, None] * Jh)
            N = Lx + dh_zinv @ (mu * h + gamma * e)
            kkt = np.block([[M, Jg.T], [Jg, np.zeros((neq, neq))]])
            rhs = -np.r_[N, g]
            try:
                step = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                message = "numerically failed (non-finite Newton step)"
                break
            dx, dlam = step[:nx], step[nx:]
            dz = -h - z - Jh @ dx
            dmu = -mu + zinv * (gamma * e - mu * dz)

            alphap = alphad = 1.0
            neg = dz < 0
            if np.any(neg):
                alphap = min(opt.xi * float(np.min(-z[neg] / dz[neg])), 1.0)
            neg = dmu < 0
            if np.any(neg):
                alphad = min(opt.xi * float(np.min(-mu[neg] / dmu[neg])), 1.0)

            x = x + alphap * dx
            z = z + alphap * dz
            lam = lam + alphad * dlam
            mu = mu + alphad * dmu
            if niq:
                gamma = opt.sigma * float(z @ mu) / niq

            f0 = f
            f, df = f_fcn(x)
            g, h, Jg, Jh = gh_fcn(x)
            if not (np.isfinite(f) and np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
                message = "numerically failed (non-finite iterate)"
                break
            Lx, feas, grad, comp, cost = conditions()

    return IpmResult(x, f, converged, it, lam, mu, z, message, history)
