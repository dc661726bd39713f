import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from hmmar import HmMarModel, InvalidModel, NonErgodicChain, derive_matrices, shipped_model, stationary_distribution, validate
from hmmar.errors import UnsupportedOrder
from hmmar.model import spectral_radius

from conftest import P_SHIPPED, two_regime


def test_uniform_transition_is_valid():
    m = HmMarModel(2, 1, [[0, 0.5], [0, 0.3]], [1, 1], [[0.5, 0.5], [0.5, 0.5]], [1, 0])
    assert validate(m) == []


def test_row_sum_violation_message():
    m = HmMarModel(2, 1, [[0, 0.5], [0, 0.3]], [1, 1], [[0.8, 0.3], [0.5, 0.5]], [1, 0])
    msgs = [v.message for v in validate(m)]
    assert "row 0 sums to 1.1" in msgs
    v = next(v for v in validate(m) if v.message == "row 0 sums to 1.1")
    assert v.path == "transition[0]"
    assert_allclose(v.magnitude, 0.1, rtol=1e-12)


def test_sigma_violation_message():
    m = HmMarModel(2, 1, [[0, 0.5], [0, 0.3]], [1.0, 0.0], [[0.5, 0.5], [0.5, 0.5]], [1, 0])
    (v,) = validate(m)
    assert v.message == "sigma[1] not strictly positive"
    assert v.path == "sigmas[1]"
    with pytest.raises(InvalidModel):
        m.check()


def test_shape_and_rho_violations():
    bad = HmMarModel(2, 1, [[0, 0.5, 1.0], [0, 0.3, 1.0]], [1, 1], [[0.5, 0.5], [0.5, 0.5]], [1, 0])
    assert [v.path for v in validate(bad)] == ["coeffs"]
    bad_rho = HmMarModel(2, 1, [[0, 0.5], [0, 0.3]], [1, 1], [[0.5, 0.5], [0.5, 0.5]], [0.7, 0.7])
    assert any(v.path == "rho" for v in validate(bad_rho))


def test_arrays_are_read_only(shipped):
    with pytest.raises(ValueError):
        shipped.coeffs[0, 0] = 1.0


def test_shipped_model_fields(shipped):
    assert (shipped.k, shipped.p) == (2, 2)
    assert_array_equal(shipped.coeffs, [[0, 0.7, 0.2], [0, 0.5, 0.2]])
    assert_array_equal(shipped.transition, P_SHIPPED)
    assert_array_equal(shipped.rho, [1, 0])
    assert_array_equal(shipped.sigmas, [1, 1])


def test_json_round_trip_and_strictness(shipped, tmp_path):
    path = tmp_path / "m.json"
    shipped.save(path)
    assert HmMarModel.load(path) == shipped
    d = json.loads(path.read_text())
    d["extra"] = 1
    with pytest.raises(InvalidModel, match="unknown"):
        HmMarModel.from_dict(d)
    del d["extra"], d["rho"]
    with pytest.raises(InvalidModel, match="missing"):
        HmMarModel.from_dict(d)


def test_scientific_notation_accepted():
    text = '{"k": 1, "p": 1, "coeffs": [[1e-3, 5E-1]], "sigmas": [1.0e0], "transition": [[1]], "rho": [1]}'
    m = HmMarModel.loads(text)
    assert_array_equal(m.coeffs, [[0.001, 0.5]])


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=True)


@given(
    k=st.integers(1, 4),
    p=st.integers(0, 3),
    data=st.data(),
)
@settings(max_examples=60, deadline=None)
def test_serialization_round_trip_is_bit_exact(k, p, data):
    coeffs = np.array(data.draw(st.lists(finite, min_size=k * (p + 1), max_size=k * (p + 1)))).reshape(k, p + 1)
    sig = data.draw(st.lists(st.floats(1e-300, 1e6), min_size=k, max_size=k))
    raw = np.array(data.draw(st.lists(st.floats(0.01, 1.0), min_size=k * k, max_size=k * k))).reshape(k, k)
    P = raw / raw.sum(axis=1, keepdims=True)
    m = HmMarModel(k, p, coeffs, sig, P, np.full(k, 1.0 / k))
    back = HmMarModel.loads(m.dumps())
    for name in ("coeffs", "sigmas", "transition", "rho"):
        assert np.array_equal(getattr(back, name), getattr(m, name))
        assert getattr(back, name).tobytes() == getattr(m, name).tobytes()


def test_stationary_identical_rows():
    row = [0.2, 0.5, 0.3]
    assert_allclose(stationary_distribution([row, row, row]), row, atol=1e-15)


def test_stationary_two_state_closed_form():
    P = np.array(P_SHIPPED)
    p12, p21 = P[0, 1], P[1, 0]
    expected = np.array([p21, p12]) / (p12 + p21)
    assert_allclose(stationary_distribution(P), expected, rtol=1e-14)


@pytest.mark.parametrize(
    "P",
    [np.eye(2), np.eye(3), [[0.0, 1.0], [1.0, 0.0]], [[0, 1, 0], [0, 0, 1], [1, 0, 0]]],
    ids=["identity2", "identity3", "flip", "cycle3"],
)
def test_stationary_rejects_reducible_or_periodic(P):
    with pytest.raises(NonErgodicChain):
        stationary_distribution(P)


def test_stationary_allows_transient_states():
    # state 0 is transient; the recurrent class {1, 2} is aperiodic
    P = [[0.5, 0.25, 0.25], [0.0, 0.3, 0.7], [0.0, 0.6, 0.4]]
    mu = stationary_distribution(P)
    assert mu[0] == 0.0
    assert_allclose(mu @ np.asarray(P), mu, atol=1e-12)


@st.composite
def ergodic_matrices(draw):
    k = draw(st.integers(1, 6))
    raw = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=k * k, max_size=k * k))).reshape(k, k)
    raw = raw + 0.02  # strictly positive, hence primitive
    return raw / raw.sum(axis=1, keepdims=True)


@given(ergodic_matrices())
@settings(max_examples=100, deadline=None)
def test_stationary_is_fixed_point(P):
    mu = stationary_distribution(P)
    assert np.all(mu >= 0)
    assert abs(mu.sum() - 1.0) <= 1e-12
    assert np.max(np.abs(mu @ P - mu)) <= 1e-10


@given(ergodic_matrices(), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_power_iteration_converges_to_stationary(P, seed):
    x = np.random.default_rng(seed).dirichlet(np.ones(P.shape[0]))
    for _ in range(20000):
        nxt = x @ P
        if np.max(np.abs(nxt - x)) < 1e-15:
            break
        x = nxt
    assert_allclose(x, stationary_distribution(P), atol=1e-8)


def test_lambda_from_shipped_values():
    dm = derive_matrices(two_regime(a1=(0.7, 0.5)))
    expected = max(0.8077 * 0.49 + 0.1923 * 0.25, 0.7619 * 0.49 + 0.2381 * 0.25)
    assert_allclose(dm.lam, expected, rtol=1e-15)
    assert_array_equal(np.diag(dm.phi1), [0.7, 0.5])
    assert_array_equal(np.diag(dm.phi1_abs), [0.7, 0.5])


def test_lambda_zero_and_scalar():
    assert derive_matrices(two_regime(a1=(0.0, 0.0))).lam == 0.0
    m = HmMarModel(1, 1, [[0.3, -0.6]], [1], [[1]], [1])
    assert_allclose(derive_matrices(m).lam, 0.36, rtol=1e-15)


@given(
    a1=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    P=ergodic_matrices().filter(lambda P: P.shape[0] == 3),
)
@settings(max_examples=50, deadline=None)
def test_lambda_is_max_of_P_phi1_squared_ones(a1, P):
    m = HmMarModel(3, 1, np.column_stack([np.zeros(3), a1]), np.ones(3), P, np.full(3, 1 / 3))
    dm = derive_matrices(m)
    # same quantity, different summation order
    assert_allclose(dm.lam, np.max(P @ dm.phi1 @ dm.phi1 @ np.ones(3)), rtol=1e-14, atol=1e-300)


def test_derive_matrices_order_guard(shipped):
    dm = derive_matrices(shipped)
    assert dm.phi1 is None and dm.lam is None
    with pytest.raises(UnsupportedOrder):
        derive_matrices(shipped, require_order_one=True)


def test_spectral_radius_complex_pair():
    # rotation-like matrix: eigenvalues 0.9 * exp(+-i pi/2)
    M = np.array([[0.0, -0.9], [0.9, 0.0]])
    assert_allclose(spectral_radius(M), 0.9, rtol=1e-14)
