import itertools

import numpy as np
import pytest

from goldilocks_qca.pfaffian import NotSkewSymmetricError, pfaffian, pfaffian_batch


def random_skew(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return A - A.T


def pfaffian_by_matchings(A):
    """Sum over perfect matchings, for small matrices."""
    n = A.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    for j in range(1, n):
        rest = [k for k in range(1, n) if k != j]
        total += (-1) ** (j - 1) * A[0, j] * pfaffian_by_matchings(A[np.ix_(rest, rest)])
    return total


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_matches_matching_expansion(n):
    A = random_skew(n, n)
    assert np.isclose(pfaffian(A), pfaffian_by_matchings(A), rtol=1e-12)


@pytest.mark.parametrize("n,seed", list(itertools.product([4, 10, 20], [0, 1])))
def test_square_is_determinant(n, seed):
    A = random_skew(n, seed)
    assert np.isclose(pfaffian(A) ** 2, np.linalg.det(A), rtol=1e-9)


def test_four_by_four_formula():
    A = random_skew(4, 5)
    expected = A[0, 1] * A[2, 3] - A[0, 2] * A[1, 3] + A[0, 3] * A[1, 2]
    assert np.isclose(pfaffian(A), expected)


def test_odd_dimension_is_zero():
    assert pfaffian(random_skew(5, 0)) == 0.0


def test_canonical_block():
    J = np.kron(np.eye(3), [[0, 1], [-1, 0]])
    assert pfaffian(J) == pytest.approx(1.0)


def test_rejects_non_skew():
    with pytest.raises(NotSkewSymmetricError):
        pfaffian(np.eye(2))


def test_batch_agrees_with_single():
    stack = np.stack([random_skew(6, s) for s in range(7)])
    assert np.allclose(pfaffian_batch(stack), [pfaffian(A) for A in stack])


def test_zero_pivot_handled():
    A = np.zeros((4, 4))
    A[0, 3], A[1, 2] = 2.0, 3.0
    A = A - A.T
    assert np.isclose(pfaffian(A), 6.0)
