"""Numerical tolerances shared by the library, the tests and the CLI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    # economy
    weight_sum: float = 1e-12
    elasticity_gap: float = 1e-9
    resource_balance: float = 1e-10
    # equilibrium
    newton: float = 1e-10
    newton_max_iter: int = 100
    backtrack: float = 0.5
    price_floor: float = 1e-9
    regularity: float = 1e-8
    dedup: float = 1e-6
    fd_step: float = 1e-6
    # manifold
    pareto: float = 1e-12
    pareto_max_iter: int = 80
    pareto_restarts: int = 10
    m_step: float = 1e-5
    near_singular: float = 1e-8
    # transfer
    continuation_steps: int = 16
    trust_factor: float = 10.0
    paradox_margin: float = 1e-10
    # dynamics
    dt: float = 1e-2
    max_halvings: int = 20
    orthant_guard: float = 1e-6
    stability_margin: float = 1e-9

    def override(self, **changes) -> "Tolerances":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = Tolerances()
