"""Local equilibrium price selection and the transfer experiment.

A transfer is a *paradox* when the donor's utility at the locally selected
equilibrium goes up after giving part of its endowment away.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .config import DEFAULT, Tolerances
from .economy import Economy, check_price, demand, utility
from .errors import BranchLost, InvalidTransfer

DEFAULT_MAGNITUDES = (1e-2, 1e-3, 1e-4)


def equilibrium_selection(eco: Economy, omega, p_star, omega_prime, steps: int | None = None,
                          tol: Tolerances = DEFAULT) -> np.ndarray:
    """Follow the equilibrium through ``p_star`` along the straight path from omega to omega_prime.

    Raises BranchLost when a corrector fails or lands outside the trust radius
    around its predictor.
    """
    steps = tol.continuation_steps if steps is None else int(steps)
    if steps < 1:
        raise ValueError("continuation needs at least one step")
    p_star = check_price(p_star, eco.l)
    omega = np.ascontiguousarray(omega, dtype=float)
    omega_prime = np.ascontiguousarray(omega_prime, dtype=float)
    p, res, failed, status = kernels.backend.continuation(
        eco.coef, eco.sigma, omega, omega_prime, p_star, steps,
        tol.newton, tol.newton_max_iter, tol.backtrack, tol.price_floor, tol.trust_factor,
    )
    if status != kernels.OK:
        raise BranchLost(f"continuation from {p_star.tolist()} lost the branch at step {failed}/{steps}")
    p[-1] = 1.0
    return p


def _utility_at(eco: Economy, trader: int, p, endowment) -> float:
    spec = eco.utilities[trader]
    return utility(spec, demand(spec, p, float(p @ endowment)))


def selected_utility(eco: Economy, omega, p_star, omega_prime, trader: int,
                     steps: int | None = None, tol: Tolerances = DEFAULT) -> tuple[float, np.ndarray]:
    """Utility of ``trader`` at the selected equilibrium for ``omega_prime``, and that price."""
    p = equilibrium_selection(eco, omega, p_star, omega_prime, steps, tol)
    return _utility_at(eco, trader, p, np.asarray(omega_prime)[trader]), p


@dataclass(frozen=True)
class TransferReport:
    donor: int
    transfer: np.ndarray
    recipients: np.ndarray
    p_before: np.ndarray
    p_after: np.ndarray
    u_donor_before: float
    u_donor_after: float
    paradox: bool
    magnitude: float = float("nan")
    trial: int = -1

    @property
    def delta_u(self) -> float:
        return self.u_donor_after - self.u_donor_before

    @property
    def direction_hash(self) -> str:
        unit = self.transfer / np.linalg.norm(self.transfer)
        return hashlib.sha1(np.round(unit, 12).tobytes()).hexdigest()[:12]


def _check_transfer(eco: Economy, omega: np.ndarray, donor: int, transfer, recipients):
    if not 0 <= donor < eco.n:
        raise InvalidTransfer(f"donor {donor} out of range")
    t = np.asarray(transfer, dtype=float)
    beta = np.asarray(recipients, dtype=float)
    if t.shape != (eco.l,) or beta.shape != (eco.n,):
        raise InvalidTransfer("transfer must have one entry per good and recipients one per trader")
    if np.any(t < 0) or not np.any(t > 0):
        raise InvalidTransfer("transfer must be nonnegative and nonzero")
    given = t > 0
    if np.any(t[given] >= omega[donor, given]):
        raise InvalidTransfer("transfer must stay strictly below the donor's endowment in every good given")
    if np.any(beta < 0) or beta[donor] != 0 or abs(beta.sum() - 1.0) > 1e-12:
        raise InvalidTransfer("recipient weights must be nonnegative, exclude the donor and sum to one")
    return t, beta


def transferred(omega, donor: int, transfer, recipients) -> np.ndarray:
    omega_prime = np.array(omega, dtype=float)
    omega_prime[donor] -= transfer
    omega_prime += np.outer(recipients, transfer)
    return omega_prime


def transfer_experiment(eco: Economy, omega, p_star, donor: int, transfer, recipients,
                        steps: int | None = None, tol: Tolerances = DEFAULT,
                        magnitude: float = float("nan"), trial: int = -1) -> TransferReport:
    omega = np.asarray(omega, dtype=float)
    p_star = check_price(p_star, eco.l)
    t, beta = _check_transfer(eco, omega, donor, transfer, recipients)
    omega_prime = transferred(omega, donor, t, beta)
    u_before = _utility_at(eco, donor, p_star, omega[donor])
    u_after, p_after = selected_utility(eco, omega, p_star, omega_prime, donor, steps, tol)
    margin = tol.paradox_margin * (1.0 + abs(u_before))
    return TransferReport(
        donor=donor,
        transfer=t,
        recipients=beta,
        p_before=p_star,
        p_after=p_after,
        u_donor_before=u_before,
        u_donor_after=u_after,
        paradox=bool(u_after - u_before > margin),
        magnitude=magnitude,
        trial=trial,
    )


@dataclass(frozen=True)
class Trial:
    trial: int
    donor: int
    direction: np.ndarray
    recipients: np.ndarray


def draw_trials(omega, trials: int, seed: int, max_magnitude: float) -> list[Trial]:
    """Random (donor, direction, recipient weights) triples, generated up front from ``seed``.

    Half the recipient splits are simplex vertices (a single recipient), half
    are uniform on the simplex.  Directions only use goods the donor holds
    comfortably more of than the largest transfer.
    """
    omega = np.asarray(omega, dtype=float)
    n, l = omega.shape
    rng = np.random.default_rng(seed)
    out = []
    for k in range(trials):
        donor = int(rng.integers(n))
        scale = max_magnitude * np.linalg.norm(omega[donor])
        eligible = omega[donor] > 2.0 * scale
        raw = rng.dirichlet(np.ones(l))
        direction = np.where(eligible, raw, 0.0)
        if not direction.any():
            direction = eligible.astype(float)
        direction /= np.linalg.norm(direction)
        others = [i for i in range(n) if i != donor]
        beta = np.zeros(n)
        if rng.random() < 0.5:
            beta[others[int(rng.integers(len(others)))]] = 1.0
        else:
            beta[others] = rng.dirichlet(np.ones(len(others)))
        out.append(Trial(k, donor, direction, beta))
    return out


@dataclass
class Detection:
    found: bool
    best: TransferReport | None
    found_by_magnitude: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    skipped: int = 0

    @property
    def evaluated(self) -> int:
        return len(self.reports)


def _run_trials(args):
    eco, omega, p_star, chunk, magnitudes, steps, tol = args
    reports, skipped = [], 0
    for tr in chunk:
        norm = np.linalg.norm(omega[tr.donor])
        for mag in magnitudes:
            try:
                reports.append(
                    transfer_experiment(eco, omega, p_star, tr.donor, mag * norm * tr.direction,
                                        tr.recipients, steps, tol, magnitude=mag, trial=tr.trial)
                )
            except BranchLost:
                skipped += 1
    return reports, skipped


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("EXCHANGE_INDEX_WORKERS", "1")))
    except ValueError:
        return 1


def detect_transfer_problem(eco: Economy, omega, p_star, trials: int = 500,
                            magnitude: float | Sequence[float] = DEFAULT_MAGNITUDES, seed: int = 0,
                            steps: int | None = None, tol: Tolerances = DEFAULT,
                            workers: int | None = None) -> Detection:
    """Randomized search for a paradoxical transfer at a regular equilibrium.

    Every trial is evaluated at each magnitude (relative to the donor's
    endowment norm).  Trials whose continuation loses the branch are counted
    in ``skipped``.  Results depend only on ``seed``, not on ``workers``.
    """
    omega = np.ascontiguousarray(omega, dtype=float)
    p_star = check_price(p_star, eco.l)
    magnitudes = tuple(float(m) for m in np.atleast_1d(magnitude))
    if trials <= 0:
        return Detection(False, None, {m: False for m in magnitudes})
    plan = draw_trials(omega, trials, seed, max(magnitudes))
    workers = _workers() if workers is None else workers
    if workers > 1:
        chunks = [plan[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_trials, [(eco, omega, p_star, c, magnitudes, steps, tol) for c in chunks]))
    else:
        parts = [_run_trials((eco, omega, p_star, plan, magnitudes, steps, tol))]
    reports = [r for rs, _ in parts for r in rs]
    reports.sort(key=lambda r: (r.trial, -r.magnitude))
    skipped = sum(s for _, s in parts)
    by_mag = {m: any(r.paradox for r in reports if r.magnitude == m) for m in magnitudes}
    best = None
    if reports:
        best = max(reports, key=lambda r: r.delta_u / (1.0 + abs(r.u_donor_before)) / r.magnitude)
    return Detection(any(by_mag.values()), best, by_mag, reports, skipped)


def lies_below(omega, omega_prime, trader: int) -> bool:
    """True when trader's endowment in ``omega`` is weakly below ``omega_prime`` in every good, and differs."""
    a = np.asarray(omega, dtype=float)[trader]
    b = np.asarray(omega_prime, dtype=float)[trader]
    return bool(np.all(a <= b) and np.any(a != b))


CSV_FIELDS = ("trial", "donor", "magnitude", "direction_hash", "u_before", "u_after", "delta_u", "paradox")


def csv_header(l: int) -> list[str]:
    return list(CSV_FIELDS) + [f"p_after_{k + 1}" for k in range(l - 1)]


def csv_row(rep: TransferReport) -> list[str]:
    return [
        str(rep.trial),
        str(rep.donor),
        repr(rep.magnitude),
        rep.direction_hash,
        repr(rep.u_donor_before),
        repr(rep.u_donor_after),
        f"{rep.delta_u:.6e}",
        str(rep.paradox).lower(),
    ] + [repr(float(v)) for v in rep.p_after[:-1]]
