import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inr_recovery.spectral import (
    Measurements, TrigPoly, box_analysis, build_feature_map, dft_coeffs, eval_gamma, full_box,
    grid_samples, half_space, weights_to_box,
)


def test_full_box_small_cases():
    assert full_box(2, 1).freqs[:, 0].tolist() == [-2, -1, 0, 1, 2]
    assert full_box(0, 3).freqs.tolist() == [[0, 0, 0]]
    assert len(full_box(2, 2)) == 25


def test_full_box_is_lexicographic():
    f = full_box(2, 3).freqs
    assert [tuple(k) for k in f] == sorted(tuple(k) for k in f)
    assert np.all(np.abs(f) <= 2)


@pytest.mark.parametrize("K,d", [(1, 1), (3, 1), (1, 2), (2, 2), (1, 3)])
def test_half_space_one_of_each_pair(K, d):
    hs = half_space(K, d).freqs
    assert len(hs) == ((2 * K + 1) ** d - 1) // 2
    keys = {tuple(k) for k in hs}
    for k in hs:
        assert tuple(-k) not in keys
        assert k[np.flatnonzero(k)[0]] > 0


def test_dilation_and_containment():
    box = full_box(2, 2)
    assert box.dilate(3) == full_box(6, 2)
    assert full_box(6, 2).contains(box)
    assert not box.contains(full_box(3, 2))


@pytest.mark.parametrize("K0,d,p", [(2, 1, 2), (0, 1, 0), (1, 2, 4)])
def test_feature_map_sizes(K0, d, p):
    fm = build_feature_map(K0, d)
    assert fm.p == p
    assert fm.D == 2 * p + 1
    assert len(fm.freqs) == p


def test_gamma_values():
    fm = build_feature_map(2, 1)
    np.testing.assert_allclose(eval_gamma(fm, 0.0), [1, np.sqrt(2), np.sqrt(2), 0, 0], atol=1e-15)
    np.testing.assert_allclose(eval_gamma(build_feature_map(1, 1), 0.25), [1, 0, np.sqrt(2)], atol=1e-15)


@pytest.mark.parametrize("K0,d", [(2, 1), (3, 2), (1, 3)])
def test_gamma_norm_and_periodicity(K0, d):
    fm = build_feature_map(K0, d)
    x = np.random.default_rng(0).uniform(-3, 3, size=(100, d))
    g = eval_gamma(fm, x)
    np.testing.assert_allclose(np.sum(g ** 2, axis=1), fm.D, atol=1e-12)
    shift = np.zeros(d)
    shift[-1] = 1.0
    np.testing.assert_allclose(eval_gamma(fm, x + shift), g, atol=1e-12)


def test_trigpoly_matches_gamma_inner_product():
    fm = build_feature_map(2, 2)
    rng = np.random.default_rng(1)
    w = rng.standard_normal(fm.D)
    x = rng.uniform(size=(50, 2))
    np.testing.assert_allclose(TrigPoly(fm, w)(x), eval_gamma(fm, x) @ w, atol=1e-12)


def test_grid_samples():
    np.testing.assert_array_equal(grid_samples(lambda x: np.ones_like(x), 4, 1), [1, 1, 1, 1])
    np.testing.assert_allclose(grid_samples(lambda x: np.cos(2 * np.pi * x), 4, 1), [1, 0, -1, 0], atol=1e-15)


def test_grid_samples_match_pointwise():
    fm = build_feature_map(2, 1)
    tp = TrigPoly(fm, np.random.default_rng(2).standard_normal(fm.D))
    s = grid_samples(tp, 8, 1)
    for m in range(8):
        assert s[m] == pytest.approx(float(tp(np.array([m / 8]))[0]), abs=1e-14)


def test_dft_constant_and_cosine():
    c = dft_coeffs(np.ones(16), full_box(2, 1))
    np.testing.assert_allclose(c.vals, [0, 0, 1, 0, 0], atol=1e-14)
    x = np.arange(16) / 16
    c = dft_coeffs(np.sqrt(2) * np.cos(2 * np.pi * x), full_box(2, 1))
    np.testing.assert_allclose(c.vals, [0, np.sqrt(2) / 2, 0, np.sqrt(2) / 2, 0], atol=1e-14)


def test_dft_rejects_small_grid():
    with pytest.raises(ValueError):
        dft_coeffs(np.ones(4), full_box(2, 1))


def _analytic_coeffs(w, fm, K):
    # independent map: w0 at DC, (w1 -+ i w2)/sqrt2 at +-k_j, zero elsewhere
    box = full_box(K, fm.dim)
    out = np.zeros(len(box), dtype=complex)
    idx = {tuple(k): i for i, k in enumerate(box.freqs)}
    out[idx[(0,) * fm.dim]] = w[0]
    for j, k in enumerate(fm.freqs.freqs):
        out[idx[tuple(k)]] = (w[1 + j] - 1j * w[1 + fm.p + j]) / np.sqrt(2)
        out[idx[tuple(-k)]] = (w[1 + j] + 1j * w[1 + fm.p + j]) / np.sqrt(2)
    return out


@pytest.mark.parametrize("M", [16, 15, 12])
@pytest.mark.parametrize("d", [1, 2])
def test_dft_exact_on_trig_polys(M, d):
    fm = build_feature_map(2, d)
    rng = np.random.default_rng(M + d)
    for _ in range(5):
        w = rng.standard_normal(fm.D)
        s = grid_samples(TrigPoly(fm, w), M, d)
        c = dft_coeffs(s, full_box(3, d))
        np.testing.assert_allclose(c.vals, _analytic_coeffs(w, fm, 3), atol=1e-13)


def test_weights_to_box_matches_independent_map():
    fm = build_feature_map(2, 2)
    w = np.random.default_rng(3).standard_normal(fm.D)
    np.testing.assert_allclose(weights_to_box(w, fm), _analytic_coeffs(w, fm, 2), atol=1e-15)


@pytest.mark.parametrize("d", [1, 2])
def test_fft_and_direct_paths_agree(d):
    s = np.random.default_rng(4).standard_normal((32,) * d)
    fs = full_box(5, d)
    fft = dft_coeffs(s, fs).vals
    direct = box_analysis(s, 5, d).reshape(-1)
    np.testing.assert_allclose(fft, direct, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=11, max_value=40), st.integers(0, 2 ** 32 - 1))
def test_dft_hermitian_on_real_samples(M, seed):
    s = np.random.default_rng(seed).standard_normal(M)
    assert dft_coeffs(s, full_box(5, 1)).hermitian_error() < 1e-12


def test_measurements_csv_roundtrip(tmp_path):
    fs = full_box(2, 2)
    rng = np.random.default_rng(5)
    m = Measurements(fs, rng.standard_normal(len(fs)) + 1j * rng.standard_normal(len(fs)))
    p = tmp_path / "y.csv"
    m.to_csv(p)
    back = Measurements.from_csv(p)
    assert back.freqs == fs
    np.testing.assert_array_equal(back.vals, m.vals)
    assert p.read_text().splitlines()[0] == "k1,k2,re,im"


def test_measurements_indexing():
    fs = full_box(2, 1)
    m = Measurements(fs, np.arange(5) + 0j)
    assert m[-2] == 0 and m[2] == 4
    with pytest.raises(KeyError):
        m[3]
