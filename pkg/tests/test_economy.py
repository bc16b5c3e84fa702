import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exchange_index.economy import (
    CES,
    CobbDouglas,
    Economy,
    _demand_unnormalized,
    demand,
    dump_problem,
    economy_from_json,
    load_problem,
    log_utility,
    make_economy,
    price,
    utility,
    utility_gradient,
)
from exchange_index.errors import DomainError, ValidationError
from tests.strategies import prices, specs

# Frozen oracle values.  CES_GRADIENT_14 comes from central differences on
# ``utility`` (step 1e-6); CES_DEMAND_21 from a dense line search over the
# budget segment 2 x1 + x2 = 3 (2e6 points).
CES_GRADIENT_14 = (3.0, 1.5)
CES_DEMAND_21 = (0.8786796564403575, 1.2426406871192852)


def fd_gradient(spec, x, rel=1e-6):
    out = np.empty_like(x)
    for j in range(x.size):
        h = rel * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (utility(spec, x + e) - utility(spec, x - e)) / (2 * h)
    return out


@pytest.mark.parametrize(
    "spec, x, expected",
    [
        (CobbDouglas([0.5, 0.5]), [1.0, 1.0], 1.0),
        (CobbDouglas([0.3, 0.7]), [2.0, 1.0], 2.0**0.3),
        (CES([1.0, 1.0], 2.0), [1.0, 4.0], 9.0),
    ],
)
def test_utility_values(spec, x, expected):
    assert utility(spec, x) == pytest.approx(expected, rel=1e-14)


def test_cobb_douglas_log_domain_oracle():
    spec = CobbDouglas([0.3, 0.7])
    assert log_utility(spec, [2.0, 1.0]) == pytest.approx(0.3 * np.log(2.0), rel=1e-15)
    # bundles whose plain product overflows stay finite in the log domain
    assert np.isfinite(log_utility(spec, [1e300, 1e300]))


def test_ces_symmetry():
    spec = CES([1.0, 1.0], 0.5)
    assert utility(spec, [0.3, 2.0]) == pytest.approx(utility(spec, [2.0, 0.3]), rel=1e-15)
    assert utility(spec, [1.0, 1.0]) == pytest.approx(0.5)


def test_gradient_examples():
    np.testing.assert_allclose(utility_gradient(CobbDouglas([0.5, 0.5]), [1.0, 1.0]), [0.5, 0.5])
    np.testing.assert_allclose(utility_gradient(CES([1.0, 1.0], 2.0), [1.0, 4.0]), CES_GRADIENT_14, rtol=1e-14)


def test_gradient_oracle_agrees_with_frozen_value():
    np.testing.assert_allclose(fd_gradient(CES([1.0, 1.0], 2.0), np.array([1.0, 4.0])), CES_GRADIENT_14, rtol=1e-8)


@pytest.mark.parametrize(
    "spec, p, w, expected",
    [
        (CobbDouglas([0.5, 0.5]), [1.0, 1.0], 1.0, (0.5, 0.5)),
        (CobbDouglas([0.5, 0.5]), [2.0, 1.0], 4.0, (1.0, 2.0)),
        (CES([1.0, 1.0], 0.5), [2.0, 1.0], 3.0, CES_DEMAND_21),
    ],
)
def test_demand_examples(spec, p, w, expected):
    np.testing.assert_allclose(demand(spec, p, w), expected, rtol=1e-12)


def test_ces_demand_line_search_oracle():
    spec = CES([1.0, 1.0], 0.5)
    x1 = np.linspace(1e-6, 1.5 - 1e-6, 200_001)
    x2 = 3.0 - 2.0 * x1
    # vectorised CES value with rho = -1
    u = 1.0 / (1.0 / x1 + 1.0 / x2) ** 1.0
    k = int(np.argmax(u))
    assert x1[k] == pytest.approx(CES_DEMAND_21[0], abs=1e-5)
    assert x2[k] == pytest.approx(CES_DEMAND_21[1], abs=2e-5)


@pytest.mark.parametrize(
    "bad",
    [[0.0, 1.0], [-1.0, 1.0], [np.nan, 1.0], [1.0, 1.0, 1.0]],
)
def test_utility_domain_errors(bad):
    with pytest.raises(DomainError):
        utility(CobbDouglas([0.5, 0.5]), bad)
    with pytest.raises(DomainError):
        utility_gradient(CES([1.0, 1.0], 0.5), bad)


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_demand_rejects_nonpositive_income(w):
    with pytest.raises(DomainError):
        demand(CobbDouglas([0.5, 0.5]), [1.0, 1.0], w)


@pytest.mark.parametrize(
    "make",
    [
        lambda: CobbDouglas([0.5, 0.6]),
        lambda: CobbDouglas([1.0, 0.0]),
        lambda: CobbDouglas([1.0]),
        lambda: CES([1.0, -1.0], 0.5),
        lambda: CES([1.0, 1.0], 1.0),
        lambda: CES([1.0, 1.0], 1.0 + 1e-12),
        lambda: CES([1.0, 1.0], -2.0),
    ],
)
def test_invalid_specs(make):
    with pytest.raises(ValidationError):
        make()


@pytest.mark.parametrize("bad", [[1.0, 2.0], [0.5, 1.0, 1.0], [-1.0, 1.0], [1.0]])
def test_price_validation(bad):
    with pytest.raises(ValidationError):
        demand(CobbDouglas([0.5, 0.5]), bad, 1.0)


def test_price_helper_appends_numeraire():
    np.testing.assert_array_equal(price([0.5, 2.0]), [0.5, 2.0, 1.0])


def test_economy_invariants():
    with pytest.raises(ValidationError):
        Economy([CobbDouglas([0.5, 0.5])], [1.0, 1.0])
    with pytest.raises(ValidationError):
        Economy([CobbDouglas([0.5, 0.5])] * 2, [1.0, 0.0])
    with pytest.raises(ValidationError):
        Economy([CobbDouglas([0.5, 0.5]), CobbDouglas([0.2, 0.3, 0.5])], [1.0, 1.0])
    eco, _ = make_economy([CobbDouglas([0.5, 0.5])] * 2, [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        eco.check_allocation([[1.0, 0.0], [0.0, 1.1]])
    with pytest.raises(ValidationError):
        eco.check_allocation([[1.1, -0.1], [0.0, 1.1]])
    eco.check_allocation([[1.0, 0.0], [0.0, 1.0 + 5e-11]])


def test_json_round_trip(tmp_path, e2):
    path = tmp_path / "e2.json"
    dump_problem(path, e2.eco, e2.omega)
    doc = json.loads(path.read_text())
    assert set(doc) == {"n", "l", "r", "utilities", "endowments"}
    assert doc["utilities"][0]["type"] == "ces"
    eco, omega = load_problem(path)
    assert eco.to_json(omega) == e2.eco.to_json(e2.omega)
    np.testing.assert_array_equal(omega, e2.omega)


@pytest.mark.parametrize(
    "doc",
    [
        {"n": 2, "l": 2, "r": [1, 1]},
        {"n": 3, "l": 2, "r": [1, 1], "utilities": [{"type": "cobb_douglas", "weights": [0.5, 0.5]}] * 2},
        {"r": [1, 1], "utilities": [{"type": "leontief", "weights": [0.5, 0.5]}] * 2},
        {"r": [1, 1], "utilities": [{"type": "ces", "shares": [1, 1]}] * 2},
        {"r": [1, 1], "utilities": [{"type": "cobb_douglas", "weights": [0.5, 0.5]}] * 2, "endowments": [[1, 1], [1, 1]]},
    ],
)
def test_malformed_documents(doc):
    with pytest.raises(ValidationError):
        economy_from_json(doc)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_walras_law(data):
    spec = data.draw(specs())
    p = data.draw(prices(spec.l))
    w = data.draw(st.floats(0.01, 100.0))
    assert abs(p @ demand(spec, p, w) - w) / w < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_demand_homogeneous_of_degree_zero(data):
    spec = data.draw(specs())
    p = data.draw(prices(spec.l))
    w = data.draw(st.floats(0.01, 100.0))
    lam = data.draw(st.floats(0.1, 10.0))
    base = _demand_unnormalized(spec, p, w)
    np.testing.assert_allclose(_demand_unnormalized(spec, lam * p, lam * w), base, rtol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_gradient_matches_finite_differences(data):
    spec = data.draw(specs())
    x = np.array(data.draw(st.lists(st.floats(0.1, 10.0), min_size=spec.l, max_size=spec.l)))
    g = utility_gradient(spec, x)
    assert np.all(g > 0)
    # relative to the gradient's scale: tiny components carry only rounding noise
    assert np.max(np.abs(fd_gradient(spec, x) - g)) <= 1e-5 * np.max(np.abs(g))


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_demand_beats_budget_line(data):
    spec = data.draw(specs(l=2))
    p = data.draw(prices(2))
    w = data.draw(st.floats(0.1, 10.0))
    best = utility(spec, demand(spec, p, w))
    x1 = np.linspace(0.0, w / p[0], 10_002)[1:-1]
    bundles = np.column_stack([x1, (w - p[0] * x1) / p[1]])
    values = np.array([utility(spec, b) for b in bundles])
    assert np.all(values <= best + 1e-8)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_utility_strictly_increasing(data):
    spec = data.draw(specs())
    x = np.array(data.draw(st.lists(st.floats(0.1, 10.0), min_size=spec.l, max_size=spec.l)))
    j = data.draw(st.integers(0, spec.l - 1))
    y = x.copy()
    y[j] *= 1.01
    assert utility(spec, y) > utility(spec, x)
