import numpy as np
import pytest

from inr_recovery.forward_op import (
    ForwardConfig, find_positive_intervals, grid_operator, inr_coeffs, make_config, unit_coeffs,
    unit_coeffs_batch, zero_fill_synthesis,
)
from inr_recovery.model import InrParams, eval_inr, random_teacher, sample_sphere
from inr_recovery.spectral import (
    Measurements, TrigPoly, build_feature_map, dft_coeffs, full_box, grid_samples,
)

FM = build_feature_map(2, 1)
GRID = make_config(6, 1, 4096)
ANALYTIC = make_config(6, 1, backend="analytic1d")


def _e(j, D=FM.D, s=1.0):
    w = np.zeros(D)
    w[j] = s
    return w


def test_config_validation():
    with pytest.raises(ValueError):
        make_config(6, 1, 12).check(FM)
    with pytest.raises(ValueError):
        make_config(2, 2, backend="analytic1d")
    assert make_config(4, 1).M == 4096
    assert make_config(4, 2).M == 512


@pytest.mark.parametrize("cfg", [GRID, ANALYTIC], ids=["grid", "analytic"])
def test_constant_units(cfg):
    one = unit_coeffs(_e(0), FM, cfg)
    expect = np.zeros(13)
    expect[6] = 1
    np.testing.assert_allclose(one.vals, expect, atol=1e-14)
    np.testing.assert_allclose(unit_coeffs(_e(0, s=-1.0), FM, cfg).vals, 0, atol=1e-15)


# half-wave rectified cosine: 1/pi + cos/2 + (2/pi) sum_n (-1)^(n+1) cos(2 n x)/(4n^2 - 1)
HALF_WAVE = {0: 1 / np.pi, 1: 0.25, 2: 1 / (3 * np.pi), 3: 0.0, 4: -1 / (15 * np.pi),
             5: 0.0, 6: 1 / (35 * np.pi)}


def _half_wave_expected():
    return np.array([HALF_WAVE[abs(k)] for k in range(-6, 7)], dtype=complex)


def test_half_wave_cosine_analytic():
    w = _e(1, s=1 / np.sqrt(2))
    np.testing.assert_allclose(unit_coeffs(w, FM, ANALYTIC).vals, _half_wave_expected(), atol=1e-14)


def test_half_wave_cosine_quadrature_oracle():
    # fine rectangle rule on the explicit function, independent of the unit code path
    M = 2 ** 20
    x = np.arange(M) / M
    c = dft_coeffs(np.maximum(np.cos(2 * np.pi * x), 0), full_box(6, 1)).vals
    np.testing.assert_allclose(c, _half_wave_expected(), atol=1e-11)
    np.testing.assert_allclose(unit_coeffs(_e(1, s=1 / np.sqrt(2)), FM, make_config(6, 1, M)).vals, c, atol=1e-13)


def test_inr_coeffs_matches_sampled_dft():
    t = random_teacher(3, FM, 4, lambda w: np.linalg.norm(w, axis=-1))
    a = inr_coeffs(t, GRID)
    b = dft_coeffs(grid_samples(lambda x: eval_inr(t, x), GRID.M, 1), GRID.omega)
    np.testing.assert_allclose(a.vals, b.vals, atol=1e-12)


def test_inr_coeffs_matches_sampled_dft_2d():
    fm = build_feature_map(1, 2)
    cfg = make_config(3, 2, 32)
    rng = np.random.default_rng(0)
    p = InrParams(fm, rng.standard_normal(4), rng.standard_normal((4, fm.D)))
    b = dft_coeffs(grid_samples(lambda x: eval_inr(p, x), 32, 2), cfg.omega)
    np.testing.assert_allclose(inr_coeffs(p, cfg).vals, b.vals, atol=1e-12)


def test_inr_coeffs_cancellation_and_zero():
    w = sample_sphere(np.random.default_rng(0), 1, FM.D)
    assert np.all(inr_coeffs(InrParams(FM, [0.0, 0.0], np.vstack([w, w])), GRID).vals == 0)
    np.testing.assert_allclose(inr_coeffs(InrParams(FM, [0.7, -0.7], np.vstack([w, w])), GRID).vals, 0, atol=1e-15)


@pytest.mark.parametrize("cfg", [GRID, ANALYTIC], ids=["grid", "analytic"])
def test_linearity_in_outer_weights(cfg):
    t = random_teacher(3, FM, 9, lambda w: np.linalg.norm(w, axis=-1))
    by_units = sum(a * unit_coeffs(w, FM, cfg).vals for a, w in t.units)
    np.testing.assert_allclose(inr_coeffs(t, cfg).vals, by_units, atol=1e-12)


def test_outputs_are_hermitian():
    ws = sample_sphere(np.random.default_rng(1), 20, FM.D)
    for cfg in (GRID, ANALYTIC):
        for w in ws:
            assert unit_coeffs(w, FM, cfg).hermitian_error() < 1e-13


def test_grid_operator_half_layout_2d():
    fm = build_feature_map(2, 2)
    op = grid_operator(fm, 4, 16)
    rng = np.random.default_rng(3)
    w = rng.standard_normal((3, fm.D))
    tau = op.tau(w).reshape(3, 16, 16)
    direct = np.stack([grid_samples(TrigPoly(fm, wi), 16, 2) for wi in w])
    np.testing.assert_allclose(tau, direct, atol=1e-12)
    g = rng.standard_normal((2, 256))
    full = np.stack([dft_coeffs(gi.reshape(16, 16), full_box(4, 2)).vals for gi in g])
    np.testing.assert_allclose(op.to_full(op.analyze(g)), full, atol=1e-14)
    # moments = grid average of g * gamma
    from inr_recovery.spectral import eval_gamma, grid_points
    gam = eval_gamma(fm, grid_points(16, 2).reshape(-1, 2))
    np.testing.assert_allclose(op.moments(g), g @ gam / 256, atol=1e-14)


def test_positive_intervals_simple():
    assert find_positive_intervals(TrigPoly(FM, _e(0))) == [(0.0, 1.0)]
    iv = find_positive_intervals(TrigPoly(FM, _e(1, s=1 / np.sqrt(2))))
    assert len(iv) == 1
    s, e = iv[0]
    assert s == pytest.approx(0.75, abs=1e-14) and e == pytest.approx(1.25, abs=1e-14)
    assert find_positive_intervals(TrigPoly(FM, _e(0, s=-1.0))) == []


def test_positive_interval_measure_matches_grid_indicator():
    rng = np.random.default_rng(5)
    M = 2 ** 22
    x = np.arange(M) / M
    for w in sample_sphere(rng, 5, FM.D):
        tp = TrigPoly(FM, w)
        total = sum(e - s for s, e in find_positive_intervals(tp))
        assert total == pytest.approx(np.mean(tp(x) > 0), abs=1e-6)


def test_tangential_zero_reported():
    # tau = 1 + cos(2 pi x) touches zero at x = 1/2 without changing sign
    w = _e(0) + _e(1, s=1 / np.sqrt(2))
    report = []
    iv = find_positive_intervals(TrigPoly(FM, w), report=report)
    assert report and report[0] == pytest.approx(0.5)
    assert len(iv) == 1 and iv[0][1] - iv[0][0] == pytest.approx(1.0)


def test_backend_agreement_and_second_order_convergence():
    ws = sample_sphere(np.random.default_rng(0), 50, FM.D)
    ana = unit_coeffs_batch(ws, FM, ANALYTIC)
    rms = []
    for e in range(10, 15):
        err = unit_coeffs_batch(ws, FM, make_config(6, 1, 2 ** e)) - ana
        rms.append(np.sqrt(np.mean(np.abs(err) ** 2)))
        if e == 14:
            assert np.max(np.abs(err)) <= 1e-6
    ratios = np.array(rms[:-1]) / np.array(rms[1:])
    assert np.all(ratios >= 3), ratios


def test_zero_fill_synthesis():
    fs = full_box(3, 1)
    y = Measurements(fs, np.eye(7)[3])
    np.testing.assert_allclose(zero_fill_synthesis(y, 16), 1.0, atol=1e-14)
    tp = TrigPoly(FM, np.random.default_rng(2).standard_normal(FM.D))
    y = dft_coeffs(grid_samples(tp, 64, 1), fs)
    np.testing.assert_allclose(zero_fill_synthesis(y, 64), grid_samples(tp, 64, 1), atol=1e-13)


def test_zero_fill_of_unit_rings():
    w = sample_sphere(np.random.default_rng(8), 1, FM.D)[0]
    y = unit_coeffs(w, FM, GRID)
    img = zero_fill_synthesis(y, 1024)
    true = np.maximum(grid_samples(TrigPoly(FM, w), 1024, 1), 0)
    assert np.mean((img - true) ** 2) > 1e-8


def test_zero_fill_rejects_non_hermitian():
    y = Measurements(full_box(1, 1), [1j, 0, 0])
    with pytest.raises(ValueError):
        zero_fill_synthesis(y, 8)


def test_forward_config_is_hashable_and_cached():
    cfg = ForwardConfig(full_box(3, 1), "grid", 64)
    assert cfg.operator(FM) is cfg.operator(FM)
