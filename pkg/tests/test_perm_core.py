import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx, mark
from scipy.stats import chisquare

from perm_core import (
    DimensionError, EnumerationLimitError, Permutation, PermutationError, SwapSpec,
    all_swaps, compose, compose_arrays, enumerate_array, enumerate_permutations,
    fixed_points, from_text, identity, inverse, restrict, reverse, sample_array,
    sample_uniform, stream_id, swap, swap_array, swaps_of_width, to_text,
)

_log = logging.getLogger(__name__)


def perms_of_size(n, count):
    return st.tuples(*[st.permutations(range(1, n + 1)) for _ in range(count)])


triples = st.integers(1, 8).flatmap(lambda n: perms_of_size(n, 3))


def test_identity_and_reverse():
    assert identity(4).image == (1, 2, 3, 4)
    assert reverse(4).image == (4, 3, 2, 1)
    assert fixed_points(identity(3)) == [1, 2, 3]
    assert fixed_points(reverse(3)) == [2]


def test_text_round_trip():
    sigma = from_text(" 2,1,3,4,5 ")
    assert sigma.image == (2, 1, 3, 4, 5)
    assert to_text(sigma) == "2,1,3,4,5"
    assert str(sigma) == "2,1,3,4,5"


@pytest.mark.parametrize("text", ["", "1,1,3", "0,1,2", "1,2,4", "a,b", "1;2"])
def test_from_text_rejects(text):
    with pytest.raises(PermutationError):
        from_text(text)


def test_call_is_one_based():
    sigma = Permutation((3, 1, 2))
    assert sigma(1) == 3
    with pytest.raises(PermutationError):
        sigma(4)


def test_compose_and_inverse():
    sigma = Permutation((2, 3, 1))
    nu = Permutation((3, 1, 2))
    # sigma o nu: i -> sigma(nu(i))
    assert compose(sigma, nu).image == (1, 2, 3)
    assert inverse(sigma) == nu
    with pytest.raises(DimensionError):
        compose(identity(3), identity(4))


@given(triples)
def test_group_laws(perms):
    a, b, c = (Permutation(p) for p in perms)
    ident = identity(a.n)
    assert compose(compose(a, b), c) == compose(a, compose(b, c))
    assert compose(a, ident) == a == compose(ident, a)
    assert compose(a, inverse(a)) == ident
    assert inverse(inverse(a)) == a


@given(st.integers(2, 8).flatmap(lambda n: perms_of_size(n, 2)))
@settings(max_examples=50)
def test_compose_arrays_matches_scalar(perms):
    a, b = (Permutation(p) for p in perms)
    batch = compose_arrays(a.as_array(), b.as_array())
    assert tuple(batch[0]) == compose(a, b).image


def test_swaps():
    assert swap(4, SwapSpec(1, 3)).image == (3, 2, 1, 4)
    assert tuple(swap_array(4, 2, 3)) == (1, 3, 2, 4)
    assert SwapSpec(2, 5).width == 3
    assert str(SwapSpec(1, 2)) == "(1 2)"
    with pytest.raises(PermutationError):
        SwapSpec(2, 2)
    with pytest.raises(PermutationError):
        swap(3, SwapSpec(1, 4))


def test_swap_lists():
    assert [str(s) for s in swaps_of_width(5, 2)] == ["(1 3)", "(2 4)", "(3 5)"]
    assert len(all_swaps(6)) == 15


def test_restrict():
    sigma = Permutation((3, 1, 2))
    assert restrict(sigma, 2) == (3, 1)
    with pytest.raises(PermutationError):
        restrict(sigma, 0)
    with pytest.raises(PermutationError):
        restrict(sigma, 4)


def test_enumeration():
    perms = enumerate_permutations(3)
    assert len(perms) == 6
    assert perms[0] == identity(3)
    assert perms[-1] == reverse(3)
    assert enumerate_array(4).shape == (24, 4)


def test_enumeration_limit():
    with pytest.raises(EnumerationLimitError):
        enumerate_array(9, limit=8)
    with pytest.raises(EnumerationLimitError):
        enumerate_permutations(5, limit=4)


def test_sampling_is_deterministic():
    first = sample_array(12, 20, seed=7, stream=3)
    again = sample_array(12, 20, seed=7, stream=3)
    other_seed = sample_array(12, 20, seed=8, stream=3)
    other_stream = sample_array(12, 20, seed=7, stream=4)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other_seed)
    assert not np.array_equal(first, other_stream)
    for row in first:
        assert sorted(row) == list(range(1, 13))


def test_sampling_draws_are_independent_of_partition():
    whole = sample_array(10, 9, seed=1, stream=2)
    tail = sample_array(10, 4, seed=1, stream=2, start=5)
    assert np.array_equal(whole[5:], tail)


def test_sample_uniform_returns_permutations():
    perms = sample_uniform(6, 5, seed=3)
    assert len(perms) == 5
    assert all(isinstance(p, Permutation) and p.n == 6 for p in perms)


@mark.slow
def test_sampling_is_uniform():
    draws = sample_array(5, 100_000, seed=42)
    for position in range(5):
        frequencies = np.bincount(draws[:, position], minlength=6)[1:] / len(draws)
        assert frequencies == approx(np.full(5, 0.2), abs=0.01)
    _, counts = np.unique(draws, axis=0, return_counts=True)
    assert len(counts) == 120
    statistic, p_value = chisquare(counts)
    _log.info(f"chi-square over S_5: {statistic:.1f}, p = {p_value:.3g}")
    assert p_value > 1e-4


def test_stream_id_is_stable():
    assert stream_id("agreement", "pairs") == stream_id("agreement", "pairs")
    assert stream_id("agreement", "pairs") != stream_id("agreement", "rankings")
