"""Tatonnement dynamics dp_{-l}/dt = z_{-l}(p, omega) and spectral stability."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import DEFAULT, Tolerances
from .economy import Economy, check_price
from .equilibrium import EquilibriumRecord, excess_demand_truncated
from .errors import NotRegular, StepTooLarge


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    classification: str
    max_real_part: float


def stability(rec: EquilibriumRecord, tol: Tolerances = DEFAULT) -> StabilityReport:
    if not rec.regular:
        raise NotRegular(f"equilibrium at {rec.p.tolist()} is not regular")
    eig = np.linalg.eigvals(rec.jacobian)
    top = float(np.max(eig.real))
    margin = tol.stability_margin * np.linalg.norm(rec.jacobian, np.inf)
    if top < -margin:
        label = "stable"
    elif top > margin:
        label = "unstable"
    else:
        label = "marginal"
    return StabilityReport(eig, label, top)


@dataclass
class Trajectory:
    times: np.ndarray
    prices: np.ndarray      # rows are full price vectors
    znorms: np.ndarray
    status: str             # converged | diverged | left_ball | t_max

    @property
    def endpoint(self) -> np.ndarray:
        return self.prices[-1]


def tatonnement(eco: Economy, omega, p0, dt: float | None = None, t_max: float = 1000.0,
                tol: Tolerances = DEFAULT, ball: tuple | None = None) -> Trajectory:
    """Classical RK4 integration of the price-adjustment ODE with the numeraire held at one.

    Stops when ||z_{-l}||_inf drops below the Newton tolerance (converged), a
    price falls under the orthant guard (diverged), or the path leaves
    ``ball = (center, radius)`` (left_ball).  A step whose stages leave the
    orthant is retried with half the step, at most ``tol.max_halvings`` times.
    """
    dt = tol.dt if dt is None else dt
    omega = np.ascontiguousarray(omega, dtype=float)
    p = check_price(p0, eco.l).copy()
    m = eco.l - 1
    # validates omega and incomes once; the loop then calls the kernel directly
    excess_demand_truncated(eco, omega, p)
    offset = (omega.sum(axis=0) - eco.r)[:m]
    full = np.ones(eco.l)

    def rhs(q):
        if np.any(q <= 0):
            return None
        full[:m] = q
        return kernels.backend.excess_demand(eco.coef, eco.sigma, omega, full)[:m] + offset

    t = 0.0
    q = p[:m].copy()
    f = rhs(q)
    times, path, norms = [t], [q.copy()], [float(np.max(np.abs(f)))]
    status = "t_max"
    while True:
        if norms[-1] < tol.newton:
            status = "converged"
            break
        if np.any(q < tol.orthant_guard):
            status = "diverged"
            break
        if ball is not None and np.linalg.norm(np.append(q, 1.0) - np.asarray(ball[0])) > ball[1]:
            status = "left_ball"
            break
        if t >= t_max:
            break
        h = min(dt, t_max - t)
        for _ in range(tol.max_halvings + 1):
            k1 = f
            k2 = rhs(q + 0.5 * h * k1)
            k3 = None if k2 is None else rhs(q + 0.5 * h * k2)
            k4 = None if k3 is None else rhs(q + h * k3)
            if k4 is not None:
                q_new = q + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                f_new = rhs(q_new)
                if f_new is not None:
                    break
            h *= 0.5
        else:
            raise StepTooLarge(f"RK4 step at t={t:.4g} leaves the orthant after {tol.max_halvings} halvings")
        t += h
        q, f = q_new, f_new
        times.append(t)
        path.append(q.copy())
        norms.append(float(np.max(np.abs(f))))
    prices = np.hstack([np.array(path), np.ones((len(path), 1))])
    return Trajectory(np.array(times), prices, np.array(norms), status)


def tsv_lines(traj: Trajectory) -> list[str]:
    m = traj.prices.shape[1] - 1
    lines = ["\t".join(["time"] + [f"p_{k + 1}" for k in range(m)] + ["z_inf"])]
    for t, p, z in zip(traj.times, traj.prices, traj.znorms):
        lines.append("\t".join([repr(float(t))] + [repr(float(v)) for v in p[:m]] + [f"{z:.6e}"]))
    return lines
