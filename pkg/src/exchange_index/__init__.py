"""Index theory toolkit for pure-exchange economies with CES and Cobb-Douglas traders."""
from .economy import CES, CobbDouglas, Economy, demand, load_problem, make_economy, utility
from .equilibrium import find_all_equilibria, find_equilibrium
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "CES",
    "CobbDouglas",
    "Economy",
    "demand",
    "find_all_equilibria",
    "find_equilibrium",
    "load_problem",
    "make_economy",
    "utility",
]
__version__ = "0.1.0"
