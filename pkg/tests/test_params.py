import math

import numpy as np
import pytest

from onebit_dmimo import params as pr


def test_db_conversions_roundtrip():
    assert pr.db_to_lin(0) == 1.0
    assert pr.lin_to_db(pr.db_to_lin(7.3)) == pytest.approx(7.3)
    assert pr.dbm_to_mw(-94) == pytest.approx(10 ** (-9.4))


def make(**kw):
    base = dict(
        f_c=2.4e9, W=24e6, S=9, B=4, U=1,
        Ebar_s=pr.dbm_to_mw(20), E_d=1e-10, N_0=pr.dbm_to_mw(-94),
    )
    base.update(kw)
    return pr.make_params(**base)


def test_params_validation():
    with pytest.raises(pr.ConfigError):
        make(S=8, osr=10)  # even S
    with pytest.raises(pr.ConfigError):
        make(f_c=2.41e9, osr=10)  # f_c/W not integer
    with pytest.raises(pr.ConfigError):
        make(N_0=0.0, osr=10)
    with pytest.raises(pr.ConfigError):
        make(osr=10, f_s=240e6)  # both given
    with pytest.raises(pr.ConfigError):
        make()  # none given


def test_energy_normalization():
    p = make(B=16, osr=10)
    assert p.E_s == pytest.approx(p.Ebar_s / 16)
    assert pr.energy_per_sample(2.0, 4) == 0.5


def test_fronthaul_to_osr_floor_and_error():
    # 86.4 Gbit/s over B=4 APs at W=24 MHz gives O=900 exactly
    assert pr.fronthaul_to_osr(86.4e9, 4, 24e6) == 900
    assert pr.fronthaul_to_osr(86.4e9 + 1e6, 4, 24e6) == 900  # floors
    with pytest.raises(pr.FronthaulBudgetError):
        pr.fronthaul_to_osr(1e6, 4, 24e6)


def test_grid_construction():
    p = make(osr=12)
    g = pr.build_grid(p)
    assert g.N == 12 * 9 and g.O == 12 and g.S == 9
    assert g.bin_set == (0, 1, 2, 3, 4, 104, 105, 106, 107)
    assert len(set(g.bin_set)) == 9
    assert g.T == pytest.approx(g.N / p.f_s)


def test_bin_set_symmetric_halves():
    bs = pr.build_bin_set(40, 5)
    assert bs == (0, 1, 2, 38, 39)


def test_bandpass_sampling_direct_and_subsampled():
    # direct sampling: f_s >= 2 f_c + W
    v = pr.validate_bandpass_sampling(2.4e9, 24e6, 2 * 2.4e9 + 24e6)
    assert v.valid and v.ell == 1
    # known-valid subsampled rate
    v = pr.validate_bandpass_sampling(2.4e9, 24e6, 9 * 24e6)
    assert v.valid and v.ell is not None and v.ell > 1
    # integer 2 f_c / f_s folds the image onto the signal band: invalid
    v = pr.validate_bandpass_sampling(2.4e9, 24e6, 8 * 24e6)
    assert not v.valid


def test_bandpass_window_edges():
    f_c, W = 1e9, 1e6
    ell = 40
    lo = (2 * f_c + W) / ell
    hi = (2 * f_c - W) / (ell - 1)
    assert pr.validate_bandpass_sampling(f_c, W, lo).valid
    assert pr.validate_bandpass_sampling(f_c, W, hi).valid
    assert lo < hi


def test_carrier_ratio_and_osr():
    p = make(osr=9)
    assert p.osr == 9
    assert p.carrier_ratio == pytest.approx(2.4e9 / (9 * 24e6))
