import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from transeig import radial as rd
from transeig.special_fn import bessel_zero
from oracles import lommel_integral

# frozen from an mpmath bisection of J_{m-1}(k)J_m(kn) - nJ_m(k)J_{m-1}(kn)
K_N30_M10 = 1.0060196397975812
K_N2_M0 = 3.3841948395401736
K_NHALF_M0 = 6.7683896790803473
K_N2_M50 = 86.254785526775977


def fm_oracle(m, k, n, r0=1.0):
    x = k * r0
    return jv(m - 1, x) * jv(m, n * x) - n * jv(m, x) * jv(m - 1, n * x)


def test_fm_unit_index_vanishes():
    med = rd.RadialMedium(1.0, validate=False)
    k = np.linspace(0.1, 20, 50)
    for m in (0, 3, 12):
        assert np.max(np.abs(rd.fm_value(m, k, med))) < 1e-15


@pytest.mark.parametrize("m", [0, 1, 4, 17])
def test_fm_matches_recurrence_form(m):
    med = rd.RadialMedium(2.5, r0=0.7)
    k = np.linspace(0.3, 15, 40)
    assert np.allclose(rd.fm_value(m, k, med), fm_oracle(m, k, 2.5, 0.7), atol=1e-13)


def test_fm_at_bessel_zero():
    j = bessel_zero(5, 1)
    med = rd.RadialMedium(2.0)
    assert rd.fm_value(5, j, med) == pytest.approx(jv(4, j) * jv(5, 2 * j), abs=1e-14)


def test_fm_sign_change_near_1008():
    med = rd.RadialMedium(30.0)
    assert any(rd.fm_value(m, 1.0, med) * rd.fm_value(m, 1.02, med) < 0 for m in range(21))


def test_medium_invariants():
    with pytest.raises(rd.RadialDomainError):
        rd.RadialMedium(1.0)
    with pytest.raises(rd.RadialDomainError):
        rd.RadialMedium(2.0, r0=0.0)
    with pytest.raises(rd.RadialDomainError):
        rd.RadialMedium(2.0, d=4)


def test_find_eigs_n30():
    pairs = rd.find_radial_eigs(rd.RadialMedium(30.0), 0.9, 1.1, 20)
    ks = np.array([p.k for p in pairs])
    assert np.all(np.diff(ks) >= 0)
    assert np.min(np.abs(ks - 1.0080)) <= 5e-3
    p10 = [p for p in pairs if p.m == 10]
    assert p10[0].k == pytest.approx(K_N30_M10, abs=1e-9)
    for p in pairs:
        assert p.residual <= 1e-8
        assert p.m in p.multiplicity


def test_find_eigs_empty_cases():
    med = rd.RadialMedium(30.0)
    assert rd.find_radial_eigs(med, 1e-4, 0.01, 20) == []
    assert rd.find_radial_eigs(med, 1.0, 1.0, 5) == []
    # dense independent scan shows no sign change either
    k = np.linspace(1e-4, 0.01, 4000)
    for m in range(21):
        vals = fm_oracle(m, k, 30.0)
        nz = vals[vals != 0]
        assert np.all(np.sign(nz) == np.sign(nz[0]))


def test_frozen_eigenvalues():
    pairs = rd.find_radial_eigs(rd.RadialMedium(2.0), 3.3, 3.45, 0)
    assert pairs[0].k == pytest.approx(K_N2_M0, abs=1e-9)
    pairs = rd.find_radial_eigs(rd.RadialMedium(0.5), 6.7, 6.8, 0)
    assert pairs[0].k == pytest.approx(K_NHALF_M0, abs=1e-9)


def test_bracket_sequence_indices():
    seq = rd.BracketSequence(50, 0.5, 0.8)
    assert (seq.s, seq.s_prime) == (7, 22)
    seq = rd.BracketSequence(100, 0.5, 0.8)
    assert (seq.s, seq.s_prime) == (10, 39)
    with pytest.raises(rd.RadialDomainError):
        rd.BracketSequence(2, 0.5, 0.8)
    with pytest.raises(rd.RadialDomainError):
        rd.BracketSequence(50, 0.8, 0.5)


def test_sequence_root_in_bracket():
    med = rd.RadialMedium(2.0)
    seq = rd.BracketSequence(50, 0.5, 0.8)
    pair = rd.sequence_eigenpair(med, seq)
    lo, hi = seq.interval()
    assert lo < pair.k < hi
    assert pair.k == pytest.approx(K_N2_M50, abs=1e-8)


def test_field_center_and_boundary():
    pairs = rd.find_radial_eigs(rd.RadialMedium(4.0), 2.0, 8.0, 6)
    for p in pairs:
        w, v = rd.eig_field_eval(p, [[0.0, 0.0]])
        if p.m >= 1:
            assert w[0] == 0 and v[0] == 0
        th = np.linspace(0, 2 * np.pi, 17)
        pts = np.c_[np.cos(th), np.sin(th)]
        w, v = rd.eig_field_eval(p, pts)
        scale = np.maximum(np.abs(w), np.abs(v))
        assert np.all(np.abs(w - v) <= 1e-8 * np.maximum(scale, 1e-300) + 1e-14)


def test_normal_derivative_match():
    pairs = rd.find_radial_eigs(rd.RadialMedium(3.0), 2.0, 6.0, 4)
    h = 1e-6
    for p in pairs:
        pts = np.array([[1 - h, 0.0], [1 - 2 * h, 0.0], [1.0, 0.0]])
        w, v = rd.eig_field_eval(p, pts)
        dw = (3 * w[2] - 4 * w[0] + w[1]) / (2 * h)
        dv = (3 * v[2] - 4 * v[0] + v[1]) / (2 * h)
        assert abs(dw - dv) <= 1e-6 * max(1.0, abs(dw))


def test_point_outside_rejected():
    p = rd.find_radial_eigs(rd.RadialMedium(4.0), 2.0, 8.0, 2)[0]
    with pytest.raises(rd.RadialDomainError):
        rd.eig_field_eval(p, [[1.1, 0.0]])


def test_v_normalised():
    p = rd.find_radial_eigs(rd.RadialMedium(2.0), 3.0, 6.0, 3)[-1]
    mass = 2 * np.pi * lommel_integral(p.m, p.k, 0.0, 1.0) * abs(p.beta) ** 2
    assert mass == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("m,k,eps", [(0, 3.0, 0.1), (7, 12.5, 0.2), (40, 55.0, 0.1)])
def test_localization_matches_lommel(m, k, eps):
    med = rd.RadialMedium(2.0)
    pair = rd.RadialEigenpair(m, k, 1.0, 1.0, med)
    ref = math.sqrt(lommel_integral(m, k, 1 - eps, 1.0) / lommel_integral(m, k, 0.0, 1.0))
    assert rd.localization_ratio(pair, eps, "v").ratio == pytest.approx(ref, rel=1e-6)


def test_localization_constant_field():
    n = 801
    x = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(x, x)
    r = np.hypot(X, Y)
    inside = r < 1
    rep = rd.localization_ratio(np.ones(inside.sum()), 0.1, "w", dist=1 - r[inside])
    assert rep.ratio == pytest.approx(math.sqrt(0.19), abs=5e-3)
    with pytest.raises(rd.UndefinedRatioError):
        rd.localization_ratio(np.zeros(inside.sum()), 0.1, dist=1 - r[inside])


def test_localization_bad_eps():
    p = rd.RadialEigenpair(2, 4.0, 1.0, 1.0, rd.RadialMedium(2.0))
    with pytest.raises(rd.RadialDomainError):
        rd.localization_ratio(p, 1.5)


def test_dual_map():
    dual = rd.dual_small_n(rd.RadialMedium(0.25))
    assert dual.dual.n == 4.0
    assert dual.to_original(1.5) == pytest.approx(6.0)
    assert dual.to_dual(6.0) == pytest.approx(1.5)
    with pytest.raises(rd.RadialDomainError):
        rd.dual_small_n(rd.RadialMedium(2.0))


def test_dual_eigenvalues_and_roles():
    small = rd.RadialMedium(0.25)
    dual = rd.dual_small_n(small)
    orig = rd.find_radial_eigs(small, 4.0, 12.0, 6)
    dpairs = rd.find_radial_eigs(dual.dual, 1.0, 3.0, 6)
    assert [p.m for p in orig] == [p.m for p in dpairs]
    assert np.allclose(dual.to_original([p.k for p in dpairs]), [p.k for p in orig], atol=1e-9)
    for a, b in zip(orig, dpairs):
        ra = rd.localization_ratio(a, 0.1, "w").ratio
        rb = rd.localization_ratio(b, 0.1, "v").ratio
        assert ra == pytest.approx(rb, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(rho=st.floats(0.3, 3.0), n=st.sampled_from([2.0, 5.0, 0.5]))
def test_scaling_law(rho, n):
    base = rd.find_radial_eigs(rd.RadialMedium(n), 2.0, 6.0, 3)
    scaled = rd.find_radial_eigs(rd.RadialMedium(n, r0=rho), 2.0 / rho, 6.0 / rho, 3)
    assert len(base) == len(scaled)
    assert np.allclose([p.k / rho for p in base], [p.k for p in scaled], atol=1e-9)


def test_ball_eigenpairs():
    med = rd.RadialMedium(2.0, d=3)
    pairs = rd.find_radial_eigs(med, 2.0, 8.0, 3)
    assert pairs
    for p in pairs:
        assert p.residual <= 1e-8
        pts = np.array([[0.0, 0.6, 0.8], [1.0, 0.0, 0.0]])
        w, v = rd.eig_field_eval(p, pts)
        assert np.allclose(w, v, atol=1e-9)


def test_never_both_localized():
    # observational: no pair has both w and v concentrated at the boundary
    for n in (2.0, 10.0, 30.0):
        for p in rd.find_radial_eigs(rd.RadialMedium(n), 1.0, 6.0, 30):
            rv = rd.localization_ratio(p, 0.1, "v").ratio
            rw = rd.localization_ratio(p, 0.1, "w").ratio
            assert not (rv >= 0.9 and rw >= 0.9)


def test_csv_exports(tmp_path):
    pairs = rd.find_radial_eigs(rd.RadialMedium(30.0), 0.99, 1.01, 20)
    path = rd.write_eigs_csv(tmp_path / "eigs.csv", pairs)
    lines = path.read_text().splitlines()
    assert lines[0] == "m,s_index,k,residual"
    assert len(lines) == len(pairs) + 1
    path = rd.write_localization_csv(tmp_path / "loc.csv", rd.localization_sweep(pairs, 0.1))
    assert path.read_text().splitlines()[0] == "m,k,eps0,ratio_v,ratio_w"
