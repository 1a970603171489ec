import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rbds.matrix_io import (LabeledDataset, MatrixFormatError, load_labels, load_matrix,
                            one_hot, save_labels, save_matrix)

finite = st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite))


def test_csv_transcription(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("2,2\n1,2\n3,4\n")
    np.testing.assert_array_equal(load_matrix(p, "csv"), [[1, 2], [3, 4]])


def test_empty_file_is_parse_error(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(MatrixFormatError, match="empty"):
        load_matrix(p, "csv")


@pytest.mark.parametrize("body, where", [
    ("2,2\n1,2\n3,x\n", "row 2, column 2"),
    ("2,2\n1,2\n3\n", "row 2"),
    ("2,2\n1,2\n", "found 1"),
])
def test_malformed_csv_names_location(tmp_path, body, where):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(MatrixFormatError, match=where):
        load_matrix(p, "csv")


def test_non_finite_value_rejected(tmp_path):
    p = tmp_path / "nan.csv"
    p.write_text("1,2\n1,nan\n")
    with pytest.raises(ValueError, match="non-finite"):
        load_matrix(p, "csv")


def test_identity_csv_layout(tmp_path):
    p = tmp_path / "eye.csv"
    save_matrix(np.eye(3), p, "csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "3,3"
    assert len(lines[1:]) == 3


def test_zero_rows_rejected_before_write(tmp_path):
    p = tmp_path / "z.csv"
    with pytest.raises(ValueError):
        save_matrix(np.zeros((0, 4)), p, "csv")
    assert not p.exists()


def test_rawbin_header_layout(tmp_path):
    p = tmp_path / "m.bin"
    a = np.arange(6.0).reshape(2, 3)
    save_matrix(a, p, "rawbin")
    raw = p.read_bytes()
    assert raw[:8] == b"RBDSMAT0"
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 3
    assert np.frombuffer(raw[24:], "<f8").tolist() == a.ravel().tolist()


@pytest.mark.parametrize("shape", [(5, 7), (10, 10)])
def test_rawbin_round_trip_bit_identical(tmp_path, rng, shape):
    a = rng.standard_normal(shape)
    p = tmp_path / "r.bin"
    save_matrix(a, p, "rawbin")
    b = load_matrix(p, "rawbin")
    assert b.tobytes() == a.tobytes()
    assert np.max(np.abs(a - b)) == 0


def test_rawbin_truncated(tmp_path):
    p = tmp_path / "t.bin"
    save_matrix(np.ones((3, 3)), p, "rawbin")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(MatrixFormatError):
        load_matrix(p, "rawbin")


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_round_trip_property(tmp_path_factory, a):
    d = tmp_path_factory.mktemp("rt")
    save_matrix(a, d / "a.bin", "rawbin")
    assert load_matrix(d / "a.bin", "rawbin").tobytes() == a.tobytes()
    save_matrix(a, d / "a.csv", "csv")
    b = load_matrix(d / "a.csv", "csv")
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=0)


def test_unwritable_destination_has_path_context(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        save_matrix(np.ones((2, 2)), blocker / "sub" / "m.csv", "csv")


def test_labels_round_trip(tmp_path):
    save_labels([1, 2, 2, 3], tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text() == "1\n2\n2\n3\n"
    assert load_labels(tmp_path / "l.csv").tolist() == [1, 2, 2, 3]


def test_one_hot_examples():
    ds = LabeledDataset(np.ones((2, 3)), [1, 2, 1])
    np.testing.assert_array_equal(one_hot(ds), [[1, 0, 1], [0, 1, 0]])
    ds = LabeledDataset(np.ones((2, 3)), [1, 1, 1])
    np.testing.assert_array_equal(one_hot(ds), [[1, 1, 1]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=40))
def test_one_hot_columns_sum_to_one(labels):
    C = max(labels)
    labels = labels + list(range(1, C + 1))  # every class present
    ds = LabeledDataset(np.zeros((1, len(labels))), labels)
    H = one_hot(ds)
    assert H.shape == (C, len(labels))
    np.testing.assert_array_equal(H.sum(axis=0), 1)
    assert np.all((H == 0) | (H == 1))
    assert np.all(np.count_nonzero(H, axis=0) == 1)


def test_dataset_invariants():
    with pytest.raises(ValueError, match="one label per column"):
        LabeledDataset(np.ones((2, 3)), [1, 2])
    with pytest.raises(ValueError, match="without samples"):
        LabeledDataset(np.ones((2, 3)), [1, 3, 3])
    ds = LabeledDataset(np.ones((2, 4)), [1, 2, 2, 1])
    assert ds.class_sizes().sum() == ds.n_samples
    with pytest.raises(ValueError):
        ds.data[0, 0] = 5.0
