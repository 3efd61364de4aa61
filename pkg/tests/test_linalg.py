import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from relu_unwrap.linalg import (
    ShapeError,
    as_matrix,
    as_tensor,
    hadamard,
    kron,
    tucker_contract,
    tucker_contract_sequential,
    tucker_matrix,
    unfold,
    fold,
    unvec,
    vec,
)

small_ints = st.integers(-9, 9).map(float)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def int_matrix(rows, cols):
    return arrays(np.float64, (rows, cols), elements=small_ints)


def test_vec_column_stacking():
    assert vec(np.array([[1, 2], [3, 4]])).tolist() == [1, 3, 2, 4]
    assert vec(np.array([[5], [6]])).tolist() == [5, 6]


def test_unvec_inverts_vec(rng):
    x = rng.normal(size=(3, 4))
    assert np.array_equal(unvec(vec(x), x.shape), x)
    with pytest.raises(ShapeError):
        unvec(np.zeros(5), (2, 3))


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4).flatmap(
    lambda shape: arrays(np.float64, tuple(shape), elements=finite)))
def test_vec_roundtrip_any_shape(x):
    assert np.array_equal(unvec(vec(x), x.shape), x)


def test_kron_examples():
    assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))
    assert kron(np.array([[1, 2]]), np.array([[3], [4]])).tolist() == [[3, 6], [4, 8]]


@given(int_matrix(2, 3), int_matrix(3, 2))
def test_kron_matches_numpy(a, b):
    assert np.array_equal(kron(a, b), np.kron(a, b))


@given(int_matrix(2, 2), int_matrix(1, 3), int_matrix(2, 1))
def test_kron_associative_exact(a, b, c):
    assert np.array_equal(kron(kron(a, b), c), kron(a, kron(b, c)))


def test_vec_trick_integer_exact():
    a = np.array([[1, -2], [3, 0]], dtype=float)
    x = np.array([[2, 1], [-1, 4]], dtype=float)
    b = np.array([[0, 5], [1, -3]], dtype=float)
    # both sides by direct multiplication
    assert np.array_equal(vec(a @ x @ b), kron(b.T, a) @ vec(x))


@settings(max_examples=50)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_vec_trick_real(p, q, r, s, seed):
    g = np.random.default_rng(seed)
    a, x, b = g.normal(size=(p, q)), g.normal(size=(q, r)), g.normal(size=(r, s))
    lhs, rhs = vec(a @ x @ b), kron(b.T, a) @ vec(x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_hadamard(rng):
    x = rng.normal(size=(3, 2))
    assert np.array_equal(hadamard(x, np.ones_like(x)), x)
    assert np.array_equal(hadamard(x, np.zeros_like(x)), np.zeros_like(x))
    a, b = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    assert np.array_equal(vec(hadamard(a, b)), hadamard(vec(a), vec(b)))
    with pytest.raises(ShapeError):
        hadamard(np.ones((2, 2)), np.ones((2, 3)))


def test_tucker_identity_and_order_one(rng):
    x = rng.normal(size=(2, 3, 4))
    assert np.allclose(tucker_contract(x, [np.eye(2), np.eye(3), np.eye(4)]), x, rtol=0, atol=0)
    v, a = rng.normal(size=3), rng.normal(size=(3, 5))
    assert np.allclose(tucker_contract(v, [a]), a.T @ v, rtol=1e-14)


def test_tucker_vectorized_identity(rng):
    x = rng.normal(size=(2, 3))
    a1, a2 = rng.normal(size=(2, 2)), rng.normal(size=(3, 2))
    # order 2: [[X; A1, A2]] = A1^T X A2, and vec of that is kron(A2^T, A1^T) vec(X)
    direct = a1.T @ x @ a2
    assert np.allclose(tucker_contract(x, [a1, a2]), direct, rtol=1e-13, atol=1e-13)
    assert np.allclose(vec(direct), tucker_matrix([a1, a2]) @ vec(x), rtol=1e-13, atol=1e-13)


def test_tucker_errors(rng):
    with pytest.raises(ShapeError):
        tucker_contract(rng.normal(size=(2, 3)), [np.eye(2)])
    with pytest.raises(ShapeError):
        tucker_contract(rng.normal(size=(2, 3)), [np.eye(2), np.eye(2)])


@settings(max_examples=40)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=4), st.integers(0, 2**32 - 1))
def test_tucker_sequential_and_kron_forms(shape, seed):
    g = np.random.default_rng(seed)
    x = g.normal(size=shape)
    mats = [g.normal(size=(d, g.integers(1, 4))) for d in shape]
    once = tucker_contract(x, mats)
    seq = tucker_contract_sequential(x, mats)
    scale = max(1.0, np.max(np.abs(once)))
    assert np.max(np.abs(once - seq)) <= 1e-12 * scale
    assert np.max(np.abs(vec(once) - tucker_matrix(mats) @ vec(x))) <= 1e-12 * scale


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4).flatmap(
    lambda shape: st.tuples(arrays(np.float64, tuple(shape), elements=finite),
                            st.integers(0, len(shape) - 1))))
def test_fold_inverts_unfold(args):
    x, mode = args
    u = unfold(x, mode)
    assert u.shape[0] == x.shape[mode]
    assert np.array_equal(fold(u, mode, x.shape), x)


def test_constructors_reject_nonfinite():
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_tensor([np.inf])
    with pytest.raises(ShapeError):
        as_tensor(np.zeros((2, 0)))
    m = as_matrix([[1, 2]])
    with pytest.raises(ValueError):
        m[0, 0] = 3.0
