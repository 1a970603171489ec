import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbds.mask import build_mask, complement, offblock_energy, offblock_ratio

labels = st.lists(st.integers(1, 4), min_size=1, max_size=12)


def test_definition_example():
    a = build_mask([1, 1, 2], [1, 2])
    np.testing.assert_array_equal(a.matrix, [[0, 1], [0, 1], [1, 0]])


def test_identical_labels_give_zero_mask():
    assert np.all(build_mask([2, 2, 2], [2, 2]).matrix == 0)


def test_empty_rejected():
    with pytest.raises(ValueError):
        build_mask([], [1])


def test_complement_examples():
    np.testing.assert_array_equal(complement(build_mask([1], [1, 2])), [[1, 0]])
    np.testing.assert_array_equal(complement(build_mask([1, 1], [2, 3])), np.zeros((2, 2)))


@settings(max_examples=80, deadline=None)
@given(labels, labels)
def test_mask_plus_complement_is_ones(al, sl):
    a = build_mask(al, sl)
    np.testing.assert_array_equal(a.matrix + complement(a), np.ones((len(al), len(sl))))
    assert set(np.unique(a.matrix)) <= {0.0, 1.0}
    for i, ai in enumerate(al):
        for j, sj in enumerate(sl):
            assert (a.matrix[i, j] == 0) == (ai == sj)


@settings(max_examples=40, deadline=None)
@given(labels, labels)
def test_sorted_labels_block_structure(al, sl):
    al, sl = sorted(al), sorted(sl)
    a = build_mask(al, sl).matrix
    for c in set(al) | set(sl):
        ri = [i for i, v in enumerate(al) if v == c]
        cj = [j for j, v in enumerate(sl) if v == c]
        if ri and cj:
            assert np.all(a[np.ix_(ri, cj)] == 0)
        other = [j for j, v in enumerate(sl) if v != c]
        if ri and other:
            assert np.all(a[np.ix_(ri, other)] == 1)


def test_offblock_energy_examples():
    a = build_mask([1, 2], [1, 2])
    assert offblock_energy(np.ones((2, 2)), a) == 2.0
    z0 = build_mask([1, 1], [1, 1])
    assert offblock_energy(np.arange(4.0).reshape(2, 2), z0) == 0.0
    with pytest.raises(ValueError):
        offblock_energy(np.ones((3, 2)), a)


def test_offblock_energy_loop_oracle(rng):
    al = rng.integers(1, 4, size=6)
    sl = rng.integers(1, 4, size=9)
    a = build_mask(al, sl)
    Z = rng.standard_normal((6, 9))
    expected = 0.0
    for i in range(6):
        for j in range(9):
            if al[i] != sl[j]:
                expected += Z[i, j] ** 2
    assert offblock_energy(Z, a) == pytest.approx(expected, rel=1e-14)


def test_offblock_zero_iff_masked_entries_zero(rng):
    a = build_mask([1, 1, 2], [1, 2, 2])
    Z = rng.standard_normal((3, 3)) * (1 - a.matrix)
    assert offblock_energy(Z, a) == 0.0
    Z[0, 1] = 1e-3
    assert offblock_energy(Z, a) > 0
    assert 0 < offblock_ratio(Z, a) < 1
    assert offblock_ratio(np.zeros((3, 3)), a) == 0.0
