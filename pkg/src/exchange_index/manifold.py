"""Price-income geometry: Pareto parametrization, budget spaces and the intersection determinant.

Coordinates on the price-income hyperplane are ``(p_1..p_{l-1}, w_1..w_{n-1})``;
the last income is implied by ``w_n = p @ r - sum(w_{-n})``.

The Pareto solver works directly on the first-order conditions in allocation
space (utility gradients only, never the demand functions), so the
determinant computed here is an independent route to the equilibrium index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .economy import CES, CobbDouglas, Economy, UtilitySpec, check_price, demand, log_utility, utility, utility_gradient
from .equilibrium import excess_demand
from .errors import DomainError, Infeasible, NearSingular


@dataclass(frozen=True)
class ParetoPoint:
    x: np.ndarray          # n x l allocation
    p: np.ndarray          # supporting price, numeraire last
    state: np.ndarray      # solver unknowns, reusable as a warm start

    @property
    def incomes(self) -> np.ndarray:
        return self.x @ self.p


def _log_gradient(spec: UtilitySpec, logx: np.ndarray) -> np.ndarray:
    if isinstance(spec, CobbDouglas):
        return spec.weights @ logx + np.log(spec.weights) - logx
    t = np.log(spec.shares) + spec.rho * logx
    tmax = t.max()
    lse = tmax + np.log(np.sum(np.exp(t - tmax)))
    return lse / spec.rho + (t - lse) - logx


def _log_u(spec: UtilitySpec, logx: np.ndarray) -> float:
    if isinstance(spec, CobbDouglas):
        return float(spec.weights @ logx)
    t = np.log(spec.shares) + spec.rho * logx
    tmax = t.max()
    return float((tmax + np.log(np.sum(np.exp(t - tmax)))) / spec.rho)


def _unpack(eco: Economy, v: np.ndarray):
    n, l = eco.n, eco.l
    logx = v[: n * l].reshape(n, l)
    logp = np.append(v[n * l : n * l + l - 1], 0.0)
    logtheta = v[n * l + l - 1 :]
    return logx, logp, logtheta


def _foc_residual(eco: Economy, log_targets: np.ndarray, v: np.ndarray) -> np.ndarray:
    logx, logp, logtheta = _unpack(eco, v)
    grad = np.concatenate(
        [_log_gradient(spec, logx[i]) - logtheta[i] - logp for i, spec in enumerate(eco.utilities)]
    )
    levels = np.array([_log_u(spec, logx[i]) for i, spec in enumerate(eco.utilities[:-1])]) - log_targets
    balance = np.exp(logx).sum(axis=0) / eco.r - 1.0
    return np.concatenate([grad, levels, balance])


def _fd_jacobian(fun, v: np.ndarray, f0: np.ndarray, h: float = 1e-7) -> np.ndarray:
    J = np.empty((f0.size, v.size))
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = h
        J[:, k] = (fun(v + e) - fun(v - e)) / (2 * h)
    return J


def _newton_foc(eco: Economy, log_targets: np.ndarray, v0: np.ndarray, tol: Tolerances):
    fun = lambda v: _foc_residual(eco, log_targets, v)  # noqa: E731
    v = v0.copy()
    F = fun(v)
    for _ in range(tol.pareto_max_iter):
        if not np.all(np.isfinite(F)):
            return None
        if np.max(np.abs(F)) < tol.pareto:
            return v
        J = _fd_jacobian(fun, v, F)
        try:
            dv = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        # log coordinates: cap steps so exp() stays finite
        big = np.max(np.abs(dv))
        if big > 5.0:
            dv *= 5.0 / big
        f2 = F @ F
        t = 1.0
        for _ in range(40):
            Fc = fun(v + t * dv)
            if np.all(np.isfinite(Fc)) and Fc @ Fc <= (1.0 - 1e-4 * t) ** 2 * f2:
                break
            t *= 0.5
        else:
            return None
        v = v + t * dv
        F = Fc
    return v if np.max(np.abs(F)) < tol.pareto else None


def _default_start(eco: Economy) -> np.ndarray:
    x = np.tile(eco.r / eco.n, (eco.n, 1))
    g = np.exp(_log_gradient(eco.utilities[-1], np.log(x[-1])))
    logp = np.log(g[:-1] / g[-1])
    return np.concatenate([np.log(x).ravel(), logp, np.zeros(eco.n)])


def _random_start(eco: Economy, rng: np.random.Generator) -> np.ndarray:
    shares = rng.dirichlet(np.ones(eco.n), size=eco.l).T  # n x l, columns sum to one
    x = np.clip(shares, 1e-3, None) * eco.r
    x *= eco.r / x.sum(axis=0)
    logp = rng.uniform(-2.0, 2.0, eco.l - 1)
    return np.concatenate([np.log(x).ravel(), logp, np.zeros(eco.n)])


def pareto_point(eco: Economy, u, tol: Tolerances = DEFAULT, start: np.ndarray | None = None) -> ParetoPoint:
    """Pareto allocation giving traders 1..n-1 the utility levels ``u`` and trader n the most.

    Tries ``start`` (if given), then the equal split ``r / n``, then ten
    randomized interior starts from a fixed seed.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (eco.n - 1,):
        raise ValueError(f"need {eco.n - 1} utility levels, got shape {u.shape}")
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise Infeasible(f"utility levels must exceed the lower bound 0, got {u.tolist()}")
    log_targets = np.log(u)
    starts = [] if start is None else [np.asarray(start, dtype=float)]
    starts.append(_default_start(eco))
    rng = np.random.default_rng(20240611)
    starts.extend(_random_start(eco, rng) for _ in range(tol.pareto_restarts))
    for v0 in starts:
        v = _newton_foc(eco, log_targets, v0, tol)
        if v is not None:
            logx, logp, _ = _unpack(eco, v)
            return ParetoPoint(x=np.exp(logx), p=np.exp(logp), state=v)
    raise Infeasible(f"Pareto first-order conditions unsolved for u = {u.tolist()}")


def section_point(eco: Economy, u, tol: Tolerances = DEFAULT, start=None) -> np.ndarray:
    """Coordinates ``(p_{-l}, w_{-n})`` of the section-manifold point for utility levels ``u``."""
    pp = pareto_point(eco, u, tol, start)
    return np.concatenate([pp.p[:-1], pp.incomes[:-1]])


def section_residual(eco: Economy, coords) -> float:
    """||sum_i f_i(p, w_i) - r||_inf for a price-income point given in coordinates."""
    coords = np.asarray(coords, dtype=float)
    p = np.append(coords[: eco.l - 1], 1.0)
    w = coords[eco.l - 1 :]
    w = np.append(w, p @ eco.r - w.sum())
    total = sum(demand(spec, p, wi) for spec, wi in zip(eco.utilities, w))
    return float(np.max(np.abs(total - eco.r)))


def utility_levels_at(eco: Economy, omega, p) -> np.ndarray:
    """Utility of traders 1..n-1 at their demanded bundles, incomes ``p @ omega_i``."""
    p = check_price(p, eco.l)
    omega = np.asarray(omega, dtype=float)
    out = np.empty(eco.n - 1)
    for i in range(eco.n - 1):
        w = float(p @ omega[i])
        if not w > 0:
            raise DomainError(f"trader {i} has zero income")
        out[i] = utility(eco.utilities[i], demand(eco.utilities[i], p, w))
    return out


def _steps(u: np.ndarray, step: float | None, tol: Tolerances) -> np.ndarray:
    rel = tol.m_step if step is None else step
    return rel * (1.0 + np.abs(u))


def m_jacobian_columns(eco: Economy, u, step: float | None = None, tol: Tolerances = DEFAULT, start=None) -> np.ndarray:
    """Central-difference derivatives of the section parametrization, one column per trader 1..n-1.

    ``step`` is relative: trader i is perturbed by ``step * (1 + |u_i|)``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if start is None:
        start = pareto_point(eco, u, tol).state
    h = _steps(u, step, tol)
    cols = np.empty((eco.l + eco.n - 2, eco.n - 1))
    for i in range(eco.n - 1):
        e = np.zeros_like(u)
        e[i] = h[i]
        if u[i] - h[i] <= 0:
            raise Infeasible(f"utility level {u[i]!r} of trader {i} is within one step of its lower bound")
        up = section_point(eco, u + e, tol, start)
        dn = section_point(eco, u - e, tol, start)
        cols[:, i] = (up - dn) / (2 * h[i])
    return cols


def m_jacobian_step_change(eco: Economy, u, step: float | None = None, tol: Tolerances = DEFAULT) -> float:
    """Relative Frobenius change of the columns when the step is halved."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    rel = tol.m_step if step is None else step
    start = pareto_point(eco, u, tol).state
    a = m_jacobian_columns(eco, u, rel, tol, start)
    b = m_jacobian_columns(eco, u, rel / 2, tol, start)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def budget_basis(omega) -> np.ndarray:
    """Rows ``a_k = (e_k, omega_1^k, ..., omega_{n-1}^k)`` spanning the budget-space direction."""
    omega = np.asarray(omega, dtype=float)
    n, l = omega.shape
    return np.hstack([np.eye(l - 1), omega[: n - 1, : l - 1].T])


def _warm_state(eco: Economy, omega: np.ndarray, p: np.ndarray) -> np.ndarray:
    x = np.array([demand(spec, p, float(p @ w)) for spec, w in zip(eco.utilities, omega)])
    logx = np.log(x)
    logtheta = np.array([_log_gradient(spec, logx[i])[-1] for i, spec in enumerate(eco.utilities)])
    return np.concatenate([logx.ravel(), np.log(p[:-1]), logtheta])


def delta_matrix(eco: Economy, omega, p, tol: Tolerances = DEFAULT, step: float | None = None) -> np.ndarray:
    """Columns ``(a_1..a_{l-1}, dM/du_1..dM/du_{n-1})`` at an equilibrium; the order is significant."""
    p = check_price(p, eco.l)
    omega = eco.check_allocation(omega, tol=1e-9)
    z = excess_demand(eco, omega, p)
    if np.max(np.abs(z)) > 1e-8:
        raise DomainError(f"(p, omega) is not an equilibrium: ||z|| = {np.max(np.abs(z)):.3e}")
    u = utility_levels_at(eco, omega, p)
    cols = m_jacobian_columns(eco, u, step, tol, start=_warm_state(eco, omega, p))
    return np.hstack([budget_basis(omega).T, cols])


def near_singular_threshold(D: np.ndarray, tol: Tolerances = DEFAULT) -> float:
    return tol.near_singular * float(np.prod(np.linalg.norm(D, axis=0)))


def delta(eco: Economy, omega, p, tol: Tolerances = DEFAULT, step: float | None = None) -> float:
    """Signed intersection determinant of the budget space and the section manifold.

    Raises NearSingular rather than returning a value too small to sign.
    """
    D = delta_matrix(eco, omega, p, tol, step)
    value = float(np.linalg.det(D))
    threshold = near_singular_threshold(D, tol)
    if abs(value) <= threshold:
        raise NearSingular(f"|Delta| = {abs(value):.3e} below {threshold:.3e}", value, threshold)
    return value


def unit_expenditure(spec: UtilitySpec, p) -> float:
    """Cost of one unit of utility; both families are homogeneous of degree one."""
    p = np.asarray(p, dtype=float)
    if isinstance(spec, CobbDouglas):
        return float(np.exp(spec.weights @ (np.log(p) - np.log(spec.weights))))
    s = spec.elasticity
    return float(np.sum(spec.shares**s * p ** (1 - s)) ** (1 / (1 - s)))


def lower_boundary_columns(eco: Economy) -> np.ndarray:
    """Limit of the section derivatives as traders 1..n-1 shrink to zero consumption.

    Trader n then holds all of r, so prices are pinned by trader n's gradient
    at r and only trader i's income responds to u_i, at the rate of its unit
    expenditure.  Evaluated analytically: no demand is computed at zero income.
    """
    g = np.exp(_log_gradient(eco.utilities[-1], np.log(eco.r)))
    p_bar = g / g[-1]
    cols = np.zeros((eco.l + eco.n - 2, eco.n - 1))
    for i in range(eco.n - 1):
        cols[eco.l - 1 + i, i] = unit_expenditure(eco.utilities[i], p_bar)
    return cols


def lower_boundary_delta(eco: Economy) -> float:
    """Determinant at the allocation (0, ..., 0, r), where the budget basis reduces to unit vectors."""
    zero = np.zeros((eco.n, eco.l))
    zero[-1] = eco.r
    D = np.hstack([budget_basis(zero).T, lower_boundary_columns(eco)])
    return float(np.linalg.det(D))


def lower_boundary_price(eco: Economy) -> np.ndarray:
    g = np.exp(_log_gradient(eco.utilities[-1], np.log(eco.r)))
    return g / g[-1]


def foc_angles(eco: Economy, pp: ParetoPoint) -> np.ndarray:
    """Angle (radians) between each trader's utility gradient and the supporting price."""
    out = np.empty(eco.n)
    pn = pp.p / np.linalg.norm(pp.p)
    for i, spec in enumerate(eco.utilities):
        g = utility_gradient(spec, pp.x[i])
        g = g / np.linalg.norm(g)
        out[i] = np.arctan2(np.linalg.norm(g - (g @ pn) * pn), g @ pn)
    return out
