"""Excess demand, its price Jacobian, equilibrium solving, regularity and index."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import DEFAULT, Tolerances
from .economy import Economy, _demand_unnormalized, check_price
from .errors import DomainError, LeftDomain, NoConvergence, NotRegular


@dataclass(frozen=True)
class EquilibriumRecord:
    p: np.ndarray
    residual_norm: float
    jacobian: np.ndarray
    det_j: float
    regular: bool
    index: int | None
    iterations: int = 0

    @property
    def l(self) -> int:
        return self.p.size


def _prepare(eco: Economy, omega, p):
    p = check_price(p, eco.l)
    omega = np.ascontiguousarray(omega, dtype=float)
    incomes = omega @ p
    if np.any(incomes <= 0):
        bad = np.flatnonzero(incomes <= 0).tolist()
        raise DomainError(f"traders {bad} have zero income at these prices")
    return omega, p


def excess_demand(eco: Economy, omega, p) -> np.ndarray:
    """Aggregate demand at incomes ``p @ omega_i`` minus total resources."""
    omega, p = _prepare(eco, omega, p)
    return kernels.backend.excess_demand(eco.coef, eco.sigma, omega, p) + (omega.sum(axis=0) - eco.r)


def excess_demand_reference(eco: Economy, omega, p) -> np.ndarray:
    """Same quantity summed trader by trader from the closed-form demands (no kernels)."""
    omega, p = _prepare(eco, omega, p)
    total = sum(_demand_unnormalized(u, p, float(p @ w)) for u, w in zip(eco.utilities, omega))
    return total - eco.r


def excess_demand_truncated(eco: Economy, omega, p) -> np.ndarray:
    return excess_demand(eco, omega, p)[:-1]


def jacobian(eco: Economy, omega, p, method: str = "analytic", h: float | None = None) -> np.ndarray:
    """d z_{-l} / d p_{-l}, either analytic or by central differences with relative step ``h``."""
    omega, p = _prepare(eco, omega, p)
    if method == "analytic":
        return kernels.backend.excess_jacobian(eco.coef, eco.sigma, omega, p)
    if method != "finite_difference":
        raise ValueError(f"unknown Jacobian method {method!r}")
    h = DEFAULT.fd_step if h is None else h
    m = eco.l - 1
    J = np.empty((m, m))
    for k in range(m):
        step = h * max(1.0, p[k])
        up, dn = p.copy(), p.copy()
        up[k] += step
        dn[k] -= step
        J[:, k] = (excess_demand_truncated(eco, omega, up) - excess_demand_truncated(eco, omega, dn)) / (2 * step)
    return J


def regularity_threshold(J: np.ndarray, tol: Tolerances = DEFAULT) -> float:
    m = J.shape[0]
    return tol.regularity * (1.0 + np.linalg.norm(J, np.inf)) ** m


def sign_index(det_j: float, l: int) -> int:
    return 1 if (-1) ** (l - 1) * det_j > 0 else -1


def record_at(eco: Economy, omega, p, tol: Tolerances = DEFAULT, iterations: int = 0) -> EquilibriumRecord:
    """Build the record for a point already known to be (numerically) an equilibrium."""
    p = check_price(p, eco.l)
    z = excess_demand(eco, omega, p)
    J = jacobian(eco, omega, p)
    det_j = float(np.linalg.det(J))
    regular = abs(det_j) > regularity_threshold(J, tol)
    return EquilibriumRecord(
        p=p,
        residual_norm=float(np.max(np.abs(z))),
        jacobian=J,
        det_j=det_j,
        regular=bool(regular),
        index=sign_index(det_j, eco.l) if regular else None,
        iterations=iterations,
    )


def find_equilibrium(eco: Economy, omega, p0, tol: Tolerances = DEFAULT) -> EquilibriumRecord:
    """Damped Newton from ``p0`` on the truncated excess demand.

    Raises NoConvergence when the iteration stalls, and LeftDomain when no
    backtracked step keeps prices above the positivity floor.
    """
    omega, p0 = _prepare(eco, omega, p0)
    p, res, it, status = kernels.backend.newton(
        eco.coef, eco.sigma, omega, p0, tol.newton, tol.newton_max_iter, tol.backtrack, tol.price_floor
    )
    if status == kernels.LEFT_DOMAIN:
        raise LeftDomain(f"Newton from {p0.tolist()} could not stay in the positive orthant")
    if status != kernels.OK:
        raise NoConvergence(f"Newton from {p0.tolist()} stalled at residual {res:.3e} after {it} iterations")
    p[-1] = 1.0
    rec = record_at(eco, omega, p, tol, iterations=it)
    # the numeraire market clears only through Walras's law; reject pseudo-roots at huge prices
    if not rec.residual_norm < tol.newton:
        raise NoConvergence(f"Newton from {p0.tolist()} reached a pseudo-root with ||z|| = {rec.residual_norm:.3e}")
    return rec


@dataclass(frozen=True)
class ScanGrid:
    """Log-uniform multi-start grid over the truncated price box."""

    low: float = 1e-3
    high: float = 1e3
    points: int | None = None

    def resolution(self, l: int) -> int:
        if self.points is not None:
            return self.points
        return 15 if l <= 3 else 7

    def seeds(self, l: int):
        axis = np.geomspace(self.low, self.high, self.resolution(l))
        for combo in itertools.product(axis, repeat=l - 1):
            yield np.append(np.array(combo), 1.0)


def same_price(p, q, tol: float = DEFAULT.dedup) -> bool:
    return bool(np.max(np.abs(p - q) / np.maximum(np.abs(p), np.abs(q))) <= tol)


def find_all_equilibria(eco: Economy, omega, scan: ScanGrid | None = None, tol: Tolerances = DEFAULT) -> list[EquilibriumRecord]:
    """Multi-start Newton over a log grid, deduplicated and sorted lexicographically by price.

    Roots that no seed reaches are silently missing; the list can be empty.
    """
    scan = ScanGrid() if scan is None else scan
    found: list[EquilibriumRecord] = []
    for seed in scan.seeds(eco.l):
        try:
            rec = find_equilibrium(eco, omega, seed, tol)
        except (NoConvergence, LeftDomain, DomainError):
            continue
        if not any(same_price(rec.p, other.p, tol.dedup) for other in found):
            found.append(rec)
    return sorted(found, key=lambda rec: tuple(rec.p))


def index_of(rec: EquilibriumRecord) -> int:
    if not rec.regular:
        raise NotRegular(f"equilibrium at {rec.p.tolist()} has det J = {rec.det_j:.3e}")
    return sign_index(rec.det_j, rec.l)


CSV_FIELDS = ("residual", "det_j", "regular", "index")


def csv_header(l: int) -> list[str]:
    return [f"p_{k + 1}" for k in range(l - 1)] + list(CSV_FIELDS)


def csv_row(rec: EquilibriumRecord) -> list[str]:
    return [repr(float(v)) for v in rec.p[:-1]] + [
        f"{rec.residual_norm:.6e}",
        repr(rec.det_j),
        str(rec.regular).lower(),
        "" if rec.index is None else str(rec.index),
    ]
