import numpy as np
import pytest
import scipy.sparse as sp

from dddopt import (
    DataGrid,
    EmptyDataError,
    LabelError,
    ParseError,
    generate_synthetic,
    load_dataset,
    save_dataset,
)


def test_generator_deterministic():
    a = generate_synthetic(200, 12, seed=5)
    b = generate_synthetic(200, 12, seed=5)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)


def test_generator_seed_changes_data():
    a = generate_synthetic(200, 12, seed=5)
    b = generate_synthetic(200, 12, seed=6)
    assert not np.array_equal(a.X, b.X)


def test_generator_labels_are_signs():
    g = generate_synthetic(500, 10, seed=1, flip_prob=0.0)
    assert set(np.unique(g.y)) <= {-1.0, 1.0}


def test_generator_flip_fraction_within_binomial_band():
    # same seed means identical features and hidden weights, so the flip-free
    # run recovers the unflipped labels and the disagreement rate is exactly
    # the realized flip fraction
    clean = generate_synthetic(10000, 20, seed=7, flip_prob=0.0)
    noisy = generate_synthetic(10000, 20, seed=7, flip_prob=0.01)
    np.testing.assert_array_equal(clean.X, noisy.X)
    frac = float(np.mean(clean.y != noisy.y))
    assert 0.005 <= frac <= 0.015


def test_generator_unit_population_variance():
    g = generate_synthetic(300, 7, seed=2)
    np.testing.assert_allclose(g.X.var(axis=0), 1.0, rtol=0, atol=1e-9)


def test_generator_warns_on_dead_column():
    # N=1 makes every column zero-variance
    with pytest.warns(RuntimeWarning):
        generate_synthetic(1, 4, seed=0)


def test_generator_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_synthetic(0, 4, seed=0)
    with pytest.raises(ValueError):
        generate_synthetic(4, 4, seed=0, flip_prob=1.5)


def test_dense_roundtrip_bit_exact(tmp_path):
    g = generate_synthetic(40, 6, seed=9)
    path = tmp_path / "data.ddg"
    save_dataset(g, path, "dense")
    back = load_dataset(path, "dense")
    np.testing.assert_array_equal(back.X, g.X)
    np.testing.assert_array_equal(back.y, g.y)


def test_dense_regression_labels_kept_raw(tmp_path):
    X = np.arange(12, dtype=float).reshape(4, 3)
    y = np.array([0.25, -3.5, 2.0, 0.125])
    path = tmp_path / "reg.ddg"
    save_dataset(DataGrid(X, y), path, "dense", label_kind="regression")
    back = load_dataset(path, "dense")
    np.testing.assert_array_equal(back.y, y)


def test_sparse_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    X = rng.normal(size=(15, 9))
    X[rng.random((15, 9)) < 0.6] = 0.0
    y = np.where(rng.random(15) < 0.5, -1.0, 1.0)
    path = tmp_path / "data.txt"
    save_dataset(DataGrid(X, y), path, "sparse")
    back = load_dataset(path, "sparse", n_features=9)
    np.testing.assert_array_equal(np.asarray(back.X.todense()), X)
    np.testing.assert_array_equal(back.y, y)


def test_sparse_line_layout(tmp_path):
    path = tmp_path / "one.txt"
    path.write_text("+1 3:0.5 7:-1.25\n")
    g = load_dataset(path, "sparse", n_features=10)
    assert g.N == 1 and g.M == 10
    row = np.asarray(g.X.todense())[0]
    assert row[2] == 0.5 and row[6] == -1.25
    assert np.count_nonzero(row) == 2
    assert g.y[0] == 1.0


def test_sparse_infers_width_from_max_index(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("-1 2:1.0\n+1 5:2.0\n")
    assert load_dataset(path, "sparse").M == 5


def test_sparse_index_out_of_range(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("+1 11:0.5\n")
    with pytest.raises(ParseError):
        load_dataset(path, "sparse", n_features=10)


@pytest.mark.parametrize(
    "line,lineno,offset",
    [
        ("x 1:0.5", 1, 0),        # unparseable label
        ("+1 junk", 1, 1),        # missing colon
        ("+1 a:0.5", 1, 1),       # bad index
        ("+1 0:0.5", 1, 1),       # 1-based indices start at 1
        ("+1 2:0.5 2:1.0", 1, 2), # duplicate
    ],
)
def test_sparse_parse_errors_carry_location(tmp_path, line, lineno, offset):
    path = tmp_path / "bad.txt"
    path.write_text("-1 1:1.0\n".replace("-1 1:1.0", line, 1))
    with pytest.raises(ParseError) as err:
        load_dataset(path, "sparse", n_features=10)
    assert err.value.line == lineno
    assert err.value.offset == offset


def test_sparse_error_on_second_line(tmp_path):
    path = tmp_path / "bad2.txt"
    path.write_text("+1 1:1.0\n-1 0:2.0\n")
    with pytest.raises(ParseError) as err:
        load_dataset(path, "sparse")
    assert err.value.line == 2


def test_zero_one_labels_map_to_signs(tmp_path):
    path = tmp_path / "zo.txt"
    path.write_text("0 1:1.0\n1 2:1.0\n")
    g = load_dataset(path, "sparse", n_features=2)
    np.testing.assert_array_equal(g.y, [-1.0, 1.0])


def test_label_outside_convention_rejected(tmp_path):
    path = tmp_path / "bad_label.txt"
    path.write_text("2 1:1.0\n")
    with pytest.raises(LabelError):
        load_dataset(path, "sparse", n_features=2)


def test_regression_mode_skips_label_mapping(tmp_path):
    path = tmp_path / "reg.txt"
    path.write_text("2.5 1:1.0\n-0.75 2:1.0\n")
    g = load_dataset(path, "sparse", n_features=2, label_kind="regression")
    np.testing.assert_array_equal(g.y, [2.5, -0.75])


def test_empty_sparse_file_rejected_at_partitioning(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    g = load_dataset(path, "sparse", n_features=4)
    assert g.N == 0
    with pytest.raises(EmptyDataError):
        g.with_scheme(1, 1)


def test_dense_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ParseError):
        load_dataset(path, "dense")


def test_dense_truncated_payload(tmp_path):
    g = generate_synthetic(10, 4, seed=0)
    path = tmp_path / "trunc.ddg"
    save_dataset(g, path, "dense")
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(ParseError):
        load_dataset(path, "dense")


def test_unknown_format_rejected(tmp_path):
    g = generate_synthetic(10, 4, seed=0)
    with pytest.raises(ValueError):
        save_dataset(g, tmp_path / "x", "parquet")
    with pytest.raises(ValueError):
        load_dataset(tmp_path / "x", "parquet")
