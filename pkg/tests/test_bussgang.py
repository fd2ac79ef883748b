import math

import numpy as np
import pytest

from onebit_dmimo import bussgang, waveform
from onebit_dmimo.params import build_grid, dbm_to_mw, make_params


def make(osr=9, B=4, U=1, ed_db=0.0, seed=2, scale=1e-5):
    N0 = dbm_to_mw(-94)
    p = make_params(
        f_c=2.4e9, W=24e6, S=9, B=B, U=U,
        Ebar_s=dbm_to_mw(20), E_d=N0 * 10 ** (ed_db / 10), N_0=N0, osr=osr,
    )
    rng = np.random.default_rng(seed)
    H = scale * (rng.standard_normal((B, U)) + 1j * rng.standard_normal((B, U)))
    return p, build_grid(p), H


def full_chain(p, grid, H):
    ry = bussgang.ry_rf(grid, H, p.E_s, p.N_0, p.f_c, p.f_s)
    rq = bussgang.rq(ry, p.E_d)
    gain = bussgang.bussgang_gain(rq.data[0])
    rz = bussgang.rz_arcsine(rq)
    re = bussgang.re_seq(rz, rq, gain)
    return ry, rq, gain, rz, re


def test_ry_lag0_is_signal_plus_noise_power():
    p, grid, H = make()
    ry = bussgang.ry_rf(grid, H, p.E_s, p.N_0, p.f_c, p.f_s)
    expect = (grid.S / grid.N) * (
        p.E_s * (np.abs(H) ** 2).sum(axis=1) + p.N_0
    )
    assert np.allclose(np.diagonal(ry.data[0]), expect, rtol=1e-12)


def test_rq_adds_dither_only_at_lag_zero():
    p, grid, H = make()
    ry = bussgang.ry_rf(grid, H, p.E_s, p.N_0, p.f_c, p.f_s)
    rq = bussgang.rq(ry, p.E_d)
    assert np.allclose(
        np.diagonal(rq.data[0]) - np.diagonal(ry.data[0]), p.E_d / 2
    )
    assert np.array_equal(rq.data[1:], ry.data[1:])


def test_arcsine_identities():
    p, grid, H = make()
    _, rq, gain, rz, re = full_chain(p, grid, H)
    # unit diagonal at lag 0 (a hard quantizer has unit output power)
    assert np.allclose(np.diagonal(rz.data[0]), 1.0, atol=1e-14)
    # per-branch error power at lag 0 is exactly 1 - 2/pi
    assert np.allclose(np.diagonal(re.data[0]), 1.0 - 2.0 / math.pi, atol=1e-12)
    # gain matches closed form
    d = np.diagonal(rq.data[0]).real
    assert np.allclose(gain.g, math.sqrt(2 / math.pi) / np.sqrt(d))


def test_arcsine_argument_guard():
    bad = bussgang.AutocovSequence(
        data=np.array([[[1.0, 1.5], [1.5, 1.0]]]), signal="q"
    )
    with pytest.raises(bussgang.NumericalValidityError):
        bussgang.rz_arcsine(bad)


def test_singular_configuration_raises():
    Rq0 = np.diag([1.0, 0.0])
    with pytest.raises(bussgang.SingularConfigurationError):
        bussgang.bussgang_gain(Rq0)


def test_ce_spectrum_matches_naive_sum():
    # direct per-bin lag summation (independent of the FFT evaluation)
    p, grid, H = make(osr=5)
    _, _, _, _, re = full_chain(p, grid, H)
    spec = bussgang.ce_spectrum(re, grid, p.f_c, p.f_s)
    m = np.arange(grid.N)
    for i, k in enumerate(grid.bin_set):
        phase = np.exp(-2j * np.pi * (k / grid.N + p.f_c / p.f_s) * m)
        naive = 2.0 * np.einsum("m,mbc->bc", phase, re.data)
        assert np.allclose(spec.data[i], naive, rtol=1e-9, atol=1e-18)


def test_ce_spectrum_hermitian_psd():
    p, grid, H = make(osr=9, B=3)
    _, _, _, _, re = full_chain(p, grid, H)
    spec = bussgang.ce_spectrum(re, grid, p.f_c, p.f_s)
    for C in spec.data:
        assert np.allclose(C, C.conj().T, atol=1e-12 * np.abs(C).max())
        w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
        assert w.min() > -1e-8 * np.trace(C).real
    bussgang.check_ce_psd(spec)  # should not warn


def test_flat_path_matches_generic_chain():
    for osr, B, ed_db in [(9, 4, 0), (36, 2, -10), (9, 3, 10)]:
        p, grid, H = make(osr=osr, B=B, U=2, ed_db=ed_db)
        _, rq, gain, _, re = full_chain(p, grid, H)
        spec = bussgang.ce_spectrum(re, grid, p.f_c, p.f_s)
        Y, pvec = bussgang.flat_quant_sums(
            H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s
        )
        flat_gain = bussgang.flat_bussgang_gain(pvec)
        assert np.allclose(flat_gain.g, gain.g, rtol=1e-10)
        scale = np.abs(spec.data).max()
        assert np.abs((4 / math.pi) * Y - spec.data).max() < 1e-7 * scale


def test_flat_quant_sums_lag_truncation_bound():
    p, grid, H = make(osr=144, B=4, ed_db=0)
    Y_full, _ = bussgang.flat_quant_sums(H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s)
    tol = 1e-6
    Y_trunc, pvec = bussgang.flat_quant_sums(
        H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s, lag_tol=tol
    )
    X_err = 2.0 * np.outer(pvec, pvec) * np.abs(Y_full - Y_trunc)
    assert X_err.max() <= tol * (p.N_0 + p.E_d)


def test_flat_ce_entry_matches_quant_sums():
    p, grid, H = make(osr=9, B=3)
    aux = bussgang.flat_aux(H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s)
    Y, _ = bussgang.flat_quant_sums(H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s)
    for i, k in enumerate(grid.bin_set):
        ce = bussgang.flat_ce_entry(aux, k, grid, p.f_c, p.f_s)
        assert np.allclose(ce, (4 / math.pi) * Y[i], rtol=1e-10)


def test_flat_aux_r_diag_lag0():
    p, grid, H = make()
    aux = bussgang.flat_aux(H, p.E_s, p.N_0, p.E_d, grid, p.f_c, p.f_s)
    # s has unit diagonal at lag 0, so r = arcsin(s) - s hits pi/2 - 1 there
    assert np.allclose(np.diagonal(aux.r[0]), math.pi / 2 - 1, atol=1e-12)
    assert np.all(aux.gamma >= aux.p)


def test_dirichlet_kernel_values():
    c = bussgang.dirichlet_c(45, 9)
    assert c[0] == pytest.approx(9.0)  # all S cosines add at m=0
    k = np.arange(1, 5)
    m = 7
    expect = 1 + 2 * np.cos(2 * np.pi * m * k / 45).sum()
    assert c[m] == pytest.approx(expect)


def test_empirical_sign_correlation_matches_arcsine():
    # Monte-Carlo over frames: E[z z^T] at a few lags vs the analytic R_z
    p, grid, H = make(osr=9, B=2, ed_db=0, seed=11)
    _, _, _, rz, _ = full_chain(p, grid, H)
    n_frames = 400
    emp = waveform.empirical_autocov(
        H, p, n_frames, np.random.default_rng(123), grid, n_lags=4, signal="z_rf"
    )
    # z entries are +-1; within-frame samples are correlated through the
    # shared symbols, so allow a few times 1/sqrt(N n_frames)
    sigma = 1.0 / math.sqrt(grid.N * n_frames)
    assert np.abs(emp - rz.data[:4]).max() < 6 * sigma
