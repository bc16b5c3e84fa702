"""Pure-exchange economies: utility families, individual demand, JSON documents.

Prices live in the numeraire simplex-free normalization: every component is
strictly positive and the last good's price is exactly one.  Incomes are
``p @ omega_i``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .config import DEFAULT
from .errors import DomainError, ValidationError


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _logsumexp(v: np.ndarray) -> float:
    m = np.max(v)
    return float(m + np.log(np.sum(np.exp(v - m))))


@dataclass(frozen=True)
class CobbDouglas:
    """u(x) = prod_j x_j ** weights_j, weights positive and summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size < 2:
            raise ValidationError("Cobb-Douglas weights must be a vector of length >= 2")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError(f"Cobb-Douglas weights must be positive, got {w.tolist()}")
        if abs(w.sum() - 1.0) > DEFAULT.weight_sum:
            raise ValidationError(f"Cobb-Douglas weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @property
    def l(self) -> int:
        return self.weights.size

    @property
    def elasticity(self) -> float:
        return 1.0

    @property
    def kernel_coef(self) -> np.ndarray:
        return self.weights

    def to_json(self) -> dict:
        return {"type": "cobb_douglas", "weights": self.weights.tolist()}


@dataclass(frozen=True)
class CES:
    """u(x) = (sum_j shares_j x_j**rho) ** (1/rho), rho = (elasticity - 1) / elasticity."""

    shares: np.ndarray
    elasticity: float

    def __post_init__(self):
        a = _frozen(self.shares)
        s = float(self.elasticity)
        if a.ndim != 1 or a.size < 2:
            raise ValidationError("CES shares must be a vector of length >= 2")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValidationError(f"CES shares must be positive, got {a.tolist()}")
        if not np.isfinite(s) or s <= 0:
            raise ValidationError(f"CES elasticity must be positive, got {s!r}")
        if abs(s - 1.0) <= DEFAULT.elasticity_gap:
            raise ValidationError("CES elasticity 1 is the Cobb-Douglas case; use CobbDouglas")
        object.__setattr__(self, "shares", a)
        object.__setattr__(self, "elasticity", s)

    @property
    def l(self) -> int:
        return self.shares.size

    @property
    def rho(self) -> float:
        return (self.elasticity - 1.0) / self.elasticity

    @property
    def kernel_coef(self) -> np.ndarray:
        return self.shares**self.elasticity

    def to_json(self) -> dict:
        return {"type": "ces", "shares": self.shares.tolist(), "elasticity": self.elasticity}


UtilitySpec = Union[CobbDouglas, CES]


def spec_from_json(doc: dict) -> UtilitySpec:
    kind = doc.get("type")
    if kind == "cobb_douglas":
        return CobbDouglas(doc["weights"])
    if kind == "ces":
        return CES(doc["shares"], doc["elasticity"])
    raise ValidationError(f"unknown utility type {kind!r}")


def _check_bundle(spec: UtilitySpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.l,):
        raise DomainError(f"bundle must have length {spec.l}, got shape {x.shape}")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise DomainError(f"bundle must lie in the open positive orthant, got {x.tolist()}")
    return x


def log_utility(spec: UtilitySpec, x) -> float:
    x = _check_bundle(spec, x)
    if isinstance(spec, CobbDouglas):
        return float(spec.weights @ np.log(x))
    return _logsumexp(np.log(spec.shares) + spec.rho * np.log(x)) / spec.rho


def utility(spec: UtilitySpec, x) -> float:
    """Utility level; both families are homogeneous of degree one."""
    return float(np.exp(log_utility(spec, x)))


def utility_gradient(spec: UtilitySpec, x) -> np.ndarray:
    x = _check_bundle(spec, x)
    u = utility(spec, x)
    if isinstance(spec, CobbDouglas):
        return u * spec.weights / x
    t = np.log(spec.shares) + spec.rho * np.log(x)
    s = np.exp(t - t.max())
    s /= s.sum()
    return u * s / x


def _demand_unnormalized(spec: UtilitySpec, p: np.ndarray, w: float) -> np.ndarray:
    """Closed-form Marshallian demand at any positive price vector (no numeraire)."""
    if isinstance(spec, CobbDouglas):
        return spec.weights * w / p
    s = spec.elasticity
    # log domain keeps p**(-s) finite for extreme prices
    t = s * np.log(spec.shares) - s * np.log(p)
    num = np.exp(t - t.max())
    return w * num / (num @ p)


def check_price(p, l: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValidationError(f"price must be a vector of length >= 2, got shape {p.shape}")
    if l is not None and p.size != l:
        raise ValidationError(f"price must have length {l}, got {p.size}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValidationError(f"prices must be strictly positive, got {p.tolist()}")
    if p[-1] != 1.0:
        raise ValidationError(f"the last good is numeraire and must have price 1, got {p[-1]!r}")
    return p


def price(truncated) -> np.ndarray:
    """Full price vector from its first l-1 components."""
    q = np.atleast_1d(np.asarray(truncated, dtype=float))
    return check_price(np.append(q, 1.0))


def demand(spec: UtilitySpec, p, w: float) -> np.ndarray:
    p = check_price(p, spec.l)
    if not w > 0:
        raise DomainError(f"income must be positive, got {w!r}")
    return _demand_unnormalized(spec, p, float(w))


@dataclass(frozen=True)
class Economy:
    utilities: tuple
    r: np.ndarray
    coef: np.ndarray = field(init=False, repr=False, compare=False)
    sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        utilities = tuple(self.utilities)
        r = _frozen(self.r)
        if len(utilities) < 2:
            raise ValidationError("an economy needs at least two traders")
        if r.ndim != 1 or r.size < 2:
            raise ValidationError("total resources must be a vector with at least two goods")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise ValidationError(f"total resources must be positive, got {r.tolist()}")
        for i, spec in enumerate(utilities):
            if not isinstance(spec, (CobbDouglas, CES)):
                raise ValidationError(f"trader {i}: unsupported utility {spec!r}")
            if spec.l != r.size:
                raise ValidationError(f"trader {i}: utility has {spec.l} goods, economy has {r.size}")
        object.__setattr__(self, "utilities", utilities)
        object.__setattr__(self, "r", r)
        # uniform CES parametrization used by the compiled kernels
        object.__setattr__(self, "coef", _frozen([u.kernel_coef for u in utilities]))
        object.__setattr__(self, "sigma", _frozen([u.elasticity for u in utilities]))

    @property
    def n(self) -> int:
        return len(self.utilities)

    @property
    def l(self) -> int:
        return self.r.size

    def check_allocation(self, omega, tol: float | None = None) -> np.ndarray:
        tol = DEFAULT.resource_balance if tol is None else tol
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (self.n, self.l):
            raise ValidationError(f"allocation must have shape {(self.n, self.l)}, got {omega.shape}")
        if not np.all(np.isfinite(omega)) or np.any(omega < 0):
            raise ValidationError("endowments must be nonnegative")
        gap = np.max(np.abs(omega.sum(axis=0) - self.r))
        if gap > tol:
            raise ValidationError(f"endowments must sum to total resources (gap {gap:.3e})")
        return omega

    def incomes(self, omega, p) -> np.ndarray:
        return np.asarray(omega, dtype=float) @ np.asarray(p, dtype=float)

    def to_json(self, omega=None) -> dict:
        doc = {
            "n": self.n,
            "l": self.l,
            "r": self.r.tolist(),
            "utilities": [u.to_json() for u in self.utilities],
        }
        if omega is not None:
            doc["endowments"] = np.asarray(omega, dtype=float).tolist()
        return doc


def economy_from_json(doc: dict) -> tuple[Economy, np.ndarray | None]:
    """Parse an economy document; returns the economy and its endowments (or None)."""
    try:
        eco = Economy([spec_from_json(u) for u in doc["utilities"]], doc["r"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed economy document: {exc}") from exc
    if doc.get("n", eco.n) != eco.n or doc.get("l", eco.l) != eco.l:
        raise ValidationError("declared n/l do not match utilities and resources")
    omega = None
    if "endowments" in doc:
        omega = eco.check_allocation(doc["endowments"])
    return eco, omega


def load_problem(path: Union[str, Path]) -> tuple[Economy, np.ndarray | None]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return economy_from_json(doc)


def dump_problem(path: Union[str, Path], eco: Economy, omega=None) -> None:
    with open(path, "w") as fh:
        json.dump(eco.to_json(omega), fh, indent=2)
        fh.write("\n")


def make_economy(utilities: Sequence[UtilitySpec], omega) -> tuple[Economy, np.ndarray]:
    """Economy whose total resources are the column sums of ``omega``."""
    omega = np.asarray(omega, dtype=float)
    eco = Economy(utilities, omega.sum(axis=0))
    return eco, eco.check_allocation(omega)
