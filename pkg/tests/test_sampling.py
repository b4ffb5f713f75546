import numpy as np
import pytest

from cwss.model import NyquistFrame
from cwss.sampling import (
    MeasurementMatrix,
    compress_frame,
    make_subsampling_matrix,
    rate_to_m,
)


def test_full_sampling_is_identity():
    phi = make_subsampling_matrix(6, 6, seed=0)
    assert np.array_equal(phi.selected_rows, np.arange(6))
    assert np.array_equal(phi.dense(), np.eye(6))


def test_single_row_cases():
    rows = {int(make_subsampling_matrix(1, 2, seed=s).selected_rows[0]) for s in range(50)}
    assert rows == {0, 1}


def test_row_inclusion_frequency():
    counts = np.zeros(16)
    n_seeds = 10_000
    for s in range(n_seeds):
        counts[make_subsampling_matrix(4, 16, seed=s).selected_rows] += 1
    freq = counts / n_seeds
    assert np.all(np.abs(freq - 0.25) < 0.02)


def test_invalid_m():
    with pytest.raises(ValueError):
        make_subsampling_matrix(5, 4, seed=0)
    with pytest.raises(ValueError):
        make_subsampling_matrix(0, 4, seed=0)


def test_compress_identity():
    phi = make_subsampling_matrix(3, 3, seed=1)
    x = NyquistFrame(0, np.array([1.0 + 1j, 2.0, 3.0]))
    assert np.array_equal(compress_frame(phi, x).samples, x.samples)


def test_compress_selects_coordinates():
    phi = MeasurementMatrix(m=1, n=2, selected_rows=np.array([1]))
    y = compress_frame(phi, NyquistFrame(0, np.array([3.0, 7.0])))
    assert np.array_equal(y.samples, [7.0])


def test_compress_is_contraction_and_matches_dense():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        m = int(rng.integers(1, n + 1))
        phi = make_subsampling_matrix(m, n, seed=int(rng.integers(0, 2**31)))
        x = NyquistFrame(0, rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = compress_frame(phi, x)
        assert np.linalg.norm(y.samples) <= np.linalg.norm(x.samples) + 1e-15
        assert np.array_equal(y.samples, phi.dense() @ x.samples)


def test_compress_length_mismatch():
    phi = make_subsampling_matrix(2, 4, seed=0)
    with pytest.raises(ValueError):
        compress_frame(phi, NyquistFrame(0, np.zeros(3)))


def test_rate_to_m():
    assert rate_to_m(0.25, 128) == 32
    assert rate_to_m(1.0, 7) == 7
    assert rate_to_m(0.001, 10) == 1
    with pytest.raises(ValueError):
        rate_to_m(0.0, 10)
    with pytest.raises(ValueError):
        rate_to_m(1.2, 10)


def test_json_round_trip():
    phi = make_subsampling_matrix(3, 9, seed=5)
    back = MeasurementMatrix.from_json_dict(phi.to_json_dict())
    assert (back.m, back.n) == (phi.m, phi.n)
    assert np.array_equal(back.selected_rows, phi.selected_rows)
