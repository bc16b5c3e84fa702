import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from exchange_index import corpus
from exchange_index.config import DEFAULT
from exchange_index.economy import CES, CobbDouglas, demand, make_economy, utility
from exchange_index.equilibrium import find_all_equilibria
from exchange_index.errors import DomainError, Infeasible, NearSingular
from exchange_index.manifold import (
    budget_basis,
    delta,
    delta_matrix,
    foc_angles,
    lower_boundary_columns,
    lower_boundary_delta,
    lower_boundary_price,
    m_jacobian_columns,
    m_jacobian_step_change,
    pareto_point,
    section_point,
    section_residual,
    unit_expenditure,
    utility_levels_at,
)
from tests.strategies import economies

# E1: the contract curve is the diagonal x_1 = (t, t) with p = (1, 1) and
# w_1 = 2t, so dM/du_1 = (0, 2) against a_1 = (1, 1): Delta = 2 exactly.
E1_DELTA = 2.0
# E2 values, central differences at the default step; only signs are contractual.
E2_DELTAS = (0.1563410146605162, -0.19309257055510368, 1.375324644547426)


def contract_curve_x1(a, b, r, t):
    """Trader 1's bundle on the two-trader Cobb-Douglas contract curve with x_11 = t."""
    x12 = b[0] * a[1] * t * r[1] / (a[0] * b[1] * (r[0] - t) + b[0] * a[1] * t)
    return np.array([t, x12])


def test_e1_symmetric_pareto_point(e1):
    u = utility(CobbDouglas([0.5, 0.5]), [0.5, 0.5])
    pp = pareto_point(e1.eco, [u])
    np.testing.assert_allclose(pp.x, [[0.5, 0.5], [0.5, 0.5]], atol=1e-10)
    np.testing.assert_allclose(pp.p, [1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(section_point(e1.eco, [u]), [1.0, 1.0], atol=1e-10)


@pytest.mark.parametrize("t", [0.05, 0.3, 0.6, 1.2, 1.9])
def test_cobb_douglas_contract_curve_closed_form(t):
    a, b = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    r = np.array([2.0, 1.5])
    eco, _ = make_economy([CobbDouglas(a), CobbDouglas(b)], [[1.0, 0.5], [1.0, 1.0]])
    x1 = contract_curve_x1(a, b, r, t)
    pp = pareto_point(eco, [utility(CobbDouglas(a), x1)])
    np.testing.assert_allclose(pp.x[0], x1, rtol=1e-9)
    np.testing.assert_allclose(pp.x[1], r - x1, rtol=1e-9)


@pytest.mark.parametrize("u1", [1e-2, 1e-4, 1e-6])
def test_lower_boundary_limit(e2, u1):
    pp = pareto_point(e2.eco, [u1])
    assert np.max(pp.x[0]) < 50 * u1
    np.testing.assert_allclose(pp.x[1], e2.eco.r, atol=50 * u1)


@pytest.mark.parametrize("u", [0.0, -1.0, np.inf])
def test_infeasible_levels(e1, u):
    with pytest.raises(Infeasible):
        pareto_point(e1.eco, [u])


def test_columns_refuse_steps_past_the_boundary(e1):
    with pytest.raises(Infeasible):
        m_jacobian_columns(e1.eco, [1e-6])


@pytest.mark.parametrize(
    "omega, expected",
    [
        ([[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0]]),
        ([[0.25, 0.0], [0.25, 0.0], [0.5, 1.0]], [[1.0, 0.25, 0.25]]),
    ],
)
def test_budget_basis_examples(omega, expected):
    np.testing.assert_allclose(budget_basis(omega), expected)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_budget_basis_full_rank(n, l, seed):
    omega = np.random.default_rng(seed).uniform(0.0, 2.0, (n, l))
    B = budget_basis(omega)
    assert B.shape == (l - 1, l + n - 2)
    assert np.linalg.matrix_rank(B) == l - 1


def test_delta_e1(e1):
    assert delta(e1.eco, e1.omega, [1.0, 1.0]) == pytest.approx(E1_DELTA, rel=1e-8)


def test_delta_e2_signs_match_indices(e2, e2_equilibria):
    values = [delta(e2.eco, e2.omega, rec.p) for rec in e2_equilibria]
    np.testing.assert_allclose(values, E2_DELTAS, rtol=1e-7)
    assert [np.sign(v) for v in values] == [rec.index for rec in e2_equilibria]


def test_delta_column_order_matters(e2, e2_equilibria):
    D = delta_matrix(e2.eco, e2.omega, e2_equilibria[1].p)
    assert np.linalg.det(D[:, ::-1]) == pytest.approx(-np.linalg.det(D))


def test_delta_off_equilibrium_rejected(e1):
    with pytest.raises(DomainError):
        delta(e1.eco, e1.omega, [2.0, 1.0])


def test_near_singular_is_flagged(e1):
    with pytest.raises(NearSingular) as info:
        delta(e1.eco, e1.omega, [1.0, 1.0], DEFAULT.override(near_singular=1.0))
    assert info.value.value == pytest.approx(E1_DELTA, rel=1e-8)


@pytest.mark.parametrize("entry", [corpus.e1(), corpus.e2(), corpus.e2_family()[2], corpus.e2_family()[3]],
                         ids=lambda e: e.name)
def test_lower_boundary_block_structure(entry):
    eco = entry.eco
    cols = lower_boundary_columns(eco)
    m = eco.l - 1
    assert np.all(cols[:m] == 0)
    w_rows = cols[m:]
    assert np.all(np.diag(w_rows) > 0)
    assert np.all(w_rows[~np.eye(eco.n - 1, dtype=bool)] == 0)
    assert lower_boundary_delta(eco) == pytest.approx(np.prod(np.diag(w_rows)))
    assert lower_boundary_delta(eco) > 0


def test_lower_boundary_matches_numeric_columns(e1):
    numeric = m_jacobian_columns(e1.eco, [1e-6], step=1e-8)
    np.testing.assert_allclose(numeric, lower_boundary_columns(e1.eco), atol=1e-5)


@pytest.mark.parametrize("spec", [CobbDouglas([0.3, 0.7]), CES([0.4, 0.9], 0.5), CES([0.4, 0.9], 2.5)])
def test_unit_expenditure_buys_one_util(spec):
    p = np.array([1.7, 1.0])
    c = unit_expenditure(spec, p)
    assert utility(spec, demand(spec, p, c)) == pytest.approx(1.0, rel=1e-12)


def test_lower_boundary_price_supports_trader_n(e2):
    p = lower_boundary_price(e2.eco)
    x = demand(e2.eco.utilities[-1], p, float(p @ e2.eco.r))
    np.testing.assert_allclose(x, e2.eco.r, rtol=1e-10)


def test_utility_levels_at_e1(e1):
    np.testing.assert_allclose(utility_levels_at(e1.eco, e1.omega, [1.0, 1.0]), [0.5])
    richer = np.array([[2.0, 0.0], [0.0, 1.0]])
    assert utility_levels_at(e1.eco, richer, [1.0, 1.0])[0] > 0.5


def _random_point(problem, seed):
    eco, omega = problem
    p = np.append(np.random.default_rng(seed).uniform(0.5, 2.0, eco.l - 1), 1.0)
    return eco, utility_levels_at(eco, omega, p)


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(economies(max_n=3, max_l=3), st.integers(0, 1000))
def test_section_points_lie_on_the_manifold(problem, seed):
    eco, u = _random_point(problem, seed)
    try:
        pp = pareto_point(eco, u)
    except Infeasible:
        return  # levels outside U(r) for this endowment draw
    coords = np.concatenate([pp.p[:-1], pp.incomes[:-1]])
    assert section_residual(eco, coords) < 1e-8
    assert np.max(foc_angles(eco, pp)) < 1e-7


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(economies(max_n=3, max_l=3))
def test_section_round_trip_at_equilibria(problem):
    eco, omega = problem
    for rec in find_all_equilibria(eco, omega)[:2]:
        coords = section_point(eco, utility_levels_at(eco, omega, rec.p))
        expected = np.concatenate([rec.p[:-1], (omega @ rec.p)[:-1]])
        np.testing.assert_allclose(coords, expected, rtol=1e-7, atol=1e-9)


@settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(economies(max_n=3, max_l=3))
def test_column_step_halving(problem):
    eco, omega = problem
    recs = find_all_equilibria(eco, omega)
    if recs:
        u = utility_levels_at(eco, omega, recs[0].p)
        assert m_jacobian_step_change(eco, u) < 1e-5
