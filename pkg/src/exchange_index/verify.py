"""Cross-module property suite run by ``exchange-index verify``.

Each check returns a :class:`Check`; a suite passes when every check does.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import corpus
from .config import DEFAULT, Tolerances
from .dynamics import stability, tatonnement
from .economy import CES, CobbDouglas, _demand_unnormalized, make_economy
from .equilibrium import (
    EquilibriumRecord,
    ScanGrid,
    excess_demand_reference,
    find_all_equilibria,
    jacobian,
    record_at,
)
from .errors import ExchangeError, NearSingular
from .manifold import delta, m_jacobian_step_change, utility_levels_at
from .transfer import detect_transfer_problem, equilibrium_selection, transferred

PROP_SEED = 777


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        detail = json.dumps(self.detail, default=_plain)
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.seconds:.1f}s) {detail}"


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _timed(name, fn, *args, **kwargs) -> Check:
    t0 = time.perf_counter()
    passed, detail = fn(*args, **kwargs)
    return Check(name, bool(passed), detail, time.perf_counter() - t0)


@dataclass
class CorpusEquilibrium:
    entry: corpus.CorpusEntry
    rec: EquilibriumRecord


def corpus_equilibria(entries=None, tol: Tolerances = DEFAULT, scan: ScanGrid | None = None) -> list[CorpusEquilibrium]:
    entries = corpus.load() if entries is None else entries
    return [CorpusEquilibrium(e, rec) for e in entries for rec in find_all_equilibria(e.eco, e.omega, scan, tol)]


def random_demand_draw(rng: np.random.Generator):
    l = int(rng.integers(2, 6))
    spec = corpus.random_spec(rng, l)
    p = np.append(np.exp(rng.uniform(-3, 3, l - 1)), 1.0)
    w = float(np.exp(rng.uniform(-3, 3)))
    return spec, p, w


def check_walras_homogeneity(draws: int = 1000, seed: int = PROP_SEED):
    rng = np.random.default_rng(seed)
    worst_walras = worst_homog = 0.0
    for _ in range(draws):
        spec, p, w = random_demand_draw(rng)
        x = _demand_unnormalized(spec, p, w)
        worst_walras = max(worst_walras, abs(p @ x - w) / w)
        lam = rng.uniform(0.1, 10.0)
        y = _demand_unnormalized(spec, lam * p, lam * w)
        worst_homog = max(worst_homog, float(np.max(np.abs(y - x) / np.abs(x))))
    ok = worst_walras < 1e-10 and worst_homog < 1e-10
    return ok, {"walras": worst_walras, "homogeneity": worst_homog}


def check_symmetric_anchor(tol: Tolerances = DEFAULT):
    entry = corpus.e1()
    recs = find_all_equilibria(entry.eco, entry.omega, tol=tol)
    detail = {"equilibria": len(recs)}
    if len(recs) != 1:
        return False, detail
    rec = recs[0]
    d = delta(entry.eco, entry.omega, rec.p, tol)
    endpoints = []
    for p1 in (0.1, 10.0):
        traj = tatonnement(entry.eco, entry.omega, [p1, 1.0], tol=tol)
        endpoints.append((traj.status, float(traj.endpoint[0])))
    detail.update(p=rec.p.tolist(), det_j=rec.det_j, index=rec.index, delta=d, tatonnement=endpoints)
    ok = (
        np.max(np.abs(rec.p - 1.0)) < 1e-8
        and abs(rec.det_j + 0.5) < 1e-6
        and rec.index == 1
        and d > 0
        and all(s == "converged" and abs(q - 1.0) < 1e-8 for s, q in endpoints)
    )
    return ok, detail


def sign_change_roots(eco, omega, low=1e-3, high=1e3, points=20001):
    """Brackets of sign changes of z_1 along a dense log grid (l = 2 only)."""
    grid = np.geomspace(low, high, points)
    # stay off exact grid hits of symmetric roots
    grid = grid * (1.0 + 1e-7)
    vals = np.array([excess_demand_reference(eco, omega, [g, 1.0])[0] for g in grid])
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    return [(grid[k], grid[k + 1]) for k in idx]


def check_multiplicity(tol: Tolerances = DEFAULT):
    entry = corpus.e2()
    brackets = sign_change_roots(entry.eco, entry.omega)
    recs = find_all_equilibria(entry.eco, entry.omega, tol=tol)
    indices = [r.index for r in recs]
    located = len(recs) == len(brackets) and all(a <= r.p[0] <= b for r, (a, b) in zip(recs, brackets))
    detail = {"oracle_roots": len(brackets), "prices": [float(r.p[0]) for r in recs], "indices": indices}
    ok = len(brackets) == 3 and located and indices == [1, -1, 1] and sum(indices) == 1
    return ok, detail


def multiplicity_economy(rng: np.random.Generator):
    """Perturbed mirrored-CES economy, sometimes with trader 2 replicated."""
    s = rng.uniform(0.1, 0.2)
    own = rng.uniform(0.94, 0.97)
    a, b = rng.uniform(0.0, 0.05, 2)
    specs = [CES([own, 1 - own], s), CES([1 - own, own], s)]
    omega = [[1 - a, b], [a, 1 - b]]
    if rng.random() < 0.5:
        specs.append(specs[1])
        omega = [omega[0], [a / 2, (1 - b) / 2], [a / 2, (1 - b) / 2]]
    return make_economy(specs, omega)


def prop_sample(count_random: int = 110, count_multi: int = 20, seed: int = PROP_SEED):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count_random):
        eco, omega = corpus.random_economy(rng)
        out.append(corpus.CorpusEntry("rand", "random", eco, omega))
    for _ in range(count_multi):
        eco, omega = multiplicity_economy(rng)
        out.append(corpus.CorpusEntry("multi", "multiplicity", eco, omega))
    return out


def check_delta_sign(tol: Tolerances = DEFAULT, seed: int = PROP_SEED, minimum: int = 100):
    checked = mismatches = near_singular = failures = 0
    by_index = {1: 0, -1: 0}
    for item in corpus_equilibria(prop_sample(seed=seed), tol):
        rec = item.rec
        if not rec.regular:
            continue
        try:
            d = delta(item.entry.eco, item.entry.omega, rec.p, tol)
        except NearSingular:
            near_singular += 1
            continue
        except ExchangeError:
            failures += 1
            continue
        checked += 1
        by_index[rec.index] += 1
        if (d > 0) != (rec.index == 1):
            mismatches += 1
    detail = {"checked": checked, "mismatches": mismatches, "near_singular": near_singular,
              "solver_failures": failures, "by_index": by_index}
    return checked >= minimum and mismatches == 0 and failures == 0, detail


def check_transfer_equivalence(equilibria, trials: int = 500, magnitudes=(1e-3, 1e-4), seed: int = 0,
                               tol: Tolerances = DEFAULT):
    mismatches, inconsistent, skipped = [], [], 0
    counts = {1: 0, -1: 0}
    for item in equilibria:
        rec = item.rec
        if not rec.regular:
            continue
        det = detect_transfer_problem(item.entry.eco, item.entry.omega, rec.p, trials, magnitudes, seed, tol=tol)
        skipped += det.skipped
        counts[rec.index] += 1
        if det.found != (rec.index == -1):
            mismatches.append((item.entry.name, rec.p[:-1].tolist(), rec.index))
        if len(set(det.found_by_magnitude.values())) > 1:
            inconsistent.append((item.entry.name, rec.p[:-1].tolist()))
    detail = {"equilibria": counts, "mismatches": mismatches, "magnitude_inconsistent": inconsistent,
              "skipped_trials": skipped}
    return not mismatches and not inconsistent and counts[-1] > 0, detail


def check_no_trade(entries=None, tol: Tolerances = DEFAULT):
    entries = [e for e in (corpus.load() if entries is None else entries) if e.family == "notrade"]
    bad = []
    for e in entries:
        p_bar = np.array(e.meta["p_bar"])
        rec = record_at(e.eco, e.omega, p_bar, tol)
        d = delta(e.eco, e.omega, p_bar, tol)
        if not (rec.residual_norm < 1e-9 and rec.regular and rec.index == 1 and d > 0):
            bad.append(e.name)
    return len(entries) == 50 and not bad, {"count": len(entries), "failures": bad}


def check_stability_implication(equilibria, tol: Tolerances = DEFAULT):
    counts = {"stable": 0, "unstable": 0, "marginal": 0}
    violations = []
    plus_one = 0
    for item in equilibria:
        if not item.rec.regular:
            continue
        rep = stability(item.rec, tol)
        counts[rep.classification] += 1
        plus_one += item.rec.index == 1
        if rep.classification == "stable" and item.rec.index != 1:
            violations.append(item.entry.name)
    return not violations and plus_one > 0, {"classes": counts, "index_plus_one": plus_one, "violations": violations}


def check_jacobians(count: int = 200, seed: int = PROP_SEED, tol: Tolerances = DEFAULT):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 5))
        l = int(rng.integers(2, 5))
        eco, omega = make_economy([CobbDouglas(rng.dirichlet(np.ones(l))) for _ in range(n)],
                                  rng.uniform(0.05, 1.0, (n, l)))
        p = np.append(np.exp(rng.uniform(-1, 1, l - 1)), 1.0)
        a = jacobian(eco, omega, p, "analytic")
        f = jacobian(eco, omega, p, "finite_difference", h=tol.fd_step)
        worst = max(worst, float(np.linalg.norm(a - f) / np.linalg.norm(a)))
    return worst < 1e-6, {"worst_relative_frobenius": worst}


def check_m_step_halving(equilibria, limit: int = 20, tol: Tolerances = DEFAULT):
    worst = 0.0
    used = 0
    for item in equilibria[:: max(1, len(equilibria) // limit)][:limit]:
        u = utility_levels_at(item.entry.eco, item.entry.omega, item.rec.p)
        worst = max(worst, m_jacobian_step_change(item.entry.eco, u, tol=tol))
        used += 1
    return worst < 1e-5, {"points": used, "worst_relative_change": worst}


def check_selection_steps(equilibria, seed: int = PROP_SEED, tol: Tolerances = DEFAULT):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for item in equilibria:
        eco, omega = item.entry.eco, item.entry.omega
        donor = int(rng.integers(eco.n))
        held = omega[donor] > 1e-2
        t = np.where(held, rng.uniform(0.1, 1.0, eco.l), 0.0)
        t *= 1e-3 / np.linalg.norm(t)
        beta = np.zeros(eco.n)
        beta[[i for i in range(eco.n) if i != donor]] = 1.0 / (eco.n - 1)
        omega_prime = transferred(omega, donor, t, beta)
        p1 = equilibrium_selection(eco, omega, item.rec.p, omega_prime, 1, tol)
        p32 = equilibrium_selection(eco, omega, item.rec.p, omega_prime, 32, tol)
        worst = max(worst, float(np.max(np.abs(p1 - p32))))
    return worst < 1e-9, {"equilibria": len(equilibria), "worst_abs_difference": worst}


def run_all(trials: int = 500, magnitudes=(1e-3, 1e-4), seed: int = 0, tol: Tolerances = DEFAULT) -> list[Check]:
    eqs = corpus_equilibria(tol=tol)
    return [
        _timed("walras_homogeneity", check_walras_homogeneity),
        _timed("symmetric_anchor", check_symmetric_anchor, tol),
        _timed("multiplicity", check_multiplicity, tol),
        _timed("delta_sign_equals_index", check_delta_sign, tol),
        _timed("transfer_iff_index_minus_one", check_transfer_equivalence, eqs, trials, magnitudes, seed, tol),
        _timed("no_trade_index_plus_one", check_no_trade, None, tol),
        _timed("stable_implies_index_plus_one", check_stability_implication, eqs, tol),
        _timed("jacobian_analytic_vs_fd", check_jacobians, tol=tol),
        _timed("m_columns_step_halving", check_m_step_halving, eqs, tol=tol),
        _timed("selection_1_vs_32_steps", check_selection_steps, eqs, tol=tol),
    ]
