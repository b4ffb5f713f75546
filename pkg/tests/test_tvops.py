import numpy as np
import pytest

from cwss.tvops import (
    build_tv_operator,
    total_variation_operator_norm,
    total_variation_sum,
    unvec_columns,
    vec_columns,
)


def test_small_blocks_match_printed_forms():
    v = build_tv_operator(2, 1)
    assert np.array_equal(v.block(0).toarray(), [[1, 0], [-1, 1]])
    assert np.array_equal(v.block(2).toarray(), [[1, -1], [0, 1]])
    # single period: temporal blocks degenerate to lone diagonal entries
    assert np.array_equal(v.block(1).toarray(), [[-1, 0], [0, -1]])
    assert np.array_equal(v.block(3).toarray(), [[1, 0], [0, 1]])


def test_shapes_and_row_sparsity():
    v = build_tv_operator(8, 3)
    assert v.shape == (8 * 3 * 8 // 2, 24)  # 8TN x 2TN with 2N = 8, T = 3
    nnz_per_row = np.diff(v.v.indptr)
    assert set(nnz_per_row.tolist()) <= {1, 2}
    assert set(np.unique(v.v.data).tolist()) <= {-1.0, 1.0}


def test_frequency_blocks_stay_within_columns():
    n2, t = 6, 3
    v = build_tv_operator(n2, t)
    for block_index in (0, 2):
        block = v.block(block_index).tocoo()
        rows = {}
        for r, c in zip(block.row, block.col):
            rows.setdefault(r, []).append(c)
        for cols in rows.values():
            assert len({c // n2 for c in cols}) == 1


def test_temporal_blocks_couple_2n_apart():
    n2, t = 4, 3
    v = build_tv_operator(n2, t)
    for block_index in (1, 3):
        block = v.block(block_index).tocoo()
        rows = {}
        for r, c in zip(block.row, block.col):
            rows.setdefault(r, []).append(c)
        for cols in rows.values():
            if len(cols) == 2:
                assert abs(cols[1] - cols[0]) == n2


def test_zero_vector_maps_to_zero():
    for n2, t in ((2, 1), (8, 2), (16, 4)):
        v = build_tv_operator(n2, t)
        assert total_variation_operator_norm(v, np.zeros(n2 * t)) == 0.0


def test_sum_form_examples():
    assert total_variation_sum(np.zeros((5, 3))) == 0.0
    assert total_variation_sum(np.array([[1.0, 0.0], [0.0, 0.0]])) == 4.0
    assert total_variation_sum(np.full((6, 4), 3.7)) == 0.0


def test_sum_form_single_column_interior_spike():
    p = np.zeros((8, 1))
    p[3, 0] = 2.5
    assert total_variation_sum(p) == 4 * 2.5


def test_operator_equals_sum_on_interior_support():
    rng = np.random.default_rng(0)
    for n2, t in ((8, 2), (16, 4), (6, 3)):
        v = build_tv_operator(n2, t)
        for _ in range(25):
            # dyadic values: both summation orders are exact in float64
            p = np.zeros((n2, t))
            p[1 : n2 - 1, : t - 1] = rng.integers(0, 48, size=(n2 - 2, t - 1)) / 16.0
            assert total_variation_operator_norm(v, vec_columns(p)) == total_variation_sum(p)
        for _ in range(10):
            p = np.zeros((n2, t))
            p[1 : n2 - 1, : t - 1] = rng.uniform(0.0, 3.0, size=(n2 - 2, t - 1))
            lhs = total_variation_operator_norm(v, vec_columns(p))
            rhs = total_variation_sum(p)
            assert lhs == pytest.approx(rhs, rel=1e-12)


def test_operator_norm_length_check():
    v = build_tv_operator(4, 2)
    with pytest.raises(ValueError):
        total_variation_operator_norm(v, np.zeros(7))


def test_homogeneity():
    rng = np.random.default_rng(1)
    v = build_tv_operator(8, 2)
    p = rng.standard_normal(16)
    for alpha in (-2.5, 0.0, 0.3):
        assert total_variation_operator_norm(v, alpha * p) == pytest.approx(
            abs(alpha) * total_variation_operator_norm(v, p), rel=1e-12, abs=1e-12
        )


def test_sparsity_promotion_on_block_constant_input():
    # K blocks per column: the TV image has O(KT) nonzeros, far below ||p||_0
    n2, t = 32, 2
    v = build_tv_operator(n2, t)
    p = np.zeros((n2, t))
    for lo, hi in ((4, 12), (20, 28)):  # K = 2 blocks of width 8
        p[lo:hi, :] = 1.0
    image = v.apply(vec_columns(p))
    nnz_image = np.count_nonzero(np.abs(image) > 1e-12)
    nnz_p = np.count_nonzero(p)
    assert nnz_image < nnz_p
    assert nnz_image <= 8 * 2 * t  # a few entries per block edge per column


def test_vec_round_trip():
    rng = np.random.default_rng(2)
    p = rng.standard_normal((6, 3))
    assert np.array_equal(unvec_columns(vec_columns(p), 6, 3), p)


def test_coo_dump(tmp_path):
    v = build_tv_operator(4, 1)
    path = tmp_path / "v.csv"
    v.dump_coo_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "row,col,val"
    assert len(lines) == 1 + v.v.nnz
