import numpy as np
import pytest

from twophase import asymptotics as asym
from twophase import spectral as sp


def _spec(label):
    return next(e for e in asym.expansion_catalog() if e.label == label)


def test_catalog_covers_all_branches():
    labels = {e.label for e in asym.expansion_catalog()}
    assert labels == {
        "r1_low", "r2_low", "r3_low", "r4_low",
        "r1_high", "r2_high", "r3_high", "r4_high",
        "kappa1_low", "kappa2_low", "kappa1_high", "kappa2_high",
    }


def test_printed_coefficients_canonical(dp):
    # r2 low: -(alpha1/(alpha1+alpha2)) s^2 = -(2/3) s^2
    s = 0.05
    assert asym.expansion_eval(_spec("r2_low"), dp, s) == pytest.approx(
        -(2.0 / 3.0) * s * s)
    # r3 low: real s^2 coefficient -13/24, imaginary leading c s
    v = asym.expansion_eval(_spec("r3_low"), dp, s)
    assert v.real == pytest.approx(-(13.0 / 24.0) * s * s)
    assert v.imag == pytest.approx(dp.c * s)
    # high-frequency constants: r1 -> -alpha1/nu = -1, r2 -> -nu s^2 (+0)
    assert asym.expansion_eval(_spec("r1_high"), dp, 20.0) == -1.0
    assert asym.expansion_eval(_spec("r2_high"), dp, 20.0) == pytest.approx(
        -2.0 * 400.0)
    # kappa2 low ~ -0.5 s^2
    assert asym.expansion_eval(_spec("kappa2_low"), dp, s) == pytest.approx(
        -0.5 * s * s)


def test_regime_enforced(dp):
    with pytest.raises(asym.RegimeError):
        asym.expansion_eval(_spec("r2_low"), dp, 1.0)
    with pytest.raises(asym.RegimeError):
        asym.expansion_eval(_spec("r1_high"), dp, 1.0)


def test_remainder_orders_canonical(dp):
    for spec in asym.expansion_catalog():
        for fit in asym.remainder_order_check(spec, dp):
            assert fit.passed, (fit.label, fit.part, fit.measured)


def test_r2_low_slope_value(dp):
    fits = asym.remainder_order_check(_spec("r2_low"), dp,
                                      s_sequence=[0.1, 0.05, 0.025, 0.0125])
    assert fits[0].measured == pytest.approx(4.0, abs=0.05)


def test_im_r3_low_slope_three(dp):
    fits = asym.remainder_order_check(_spec("r3_low"), dp)
    imag = next(f for f in fits if f.part == "imag")
    assert imag.measured == pytest.approx(3.0, abs=0.05)


def test_kappa2_low_slope_four(dp):
    fits = asym.remainder_order_check(_spec("kappa2_low"), dp)
    assert fits[0].measured == pytest.approx(4.0, abs=0.05)


def test_remainder_orders_random_sets(random_param_sets):
    for d in random_param_sets:
        for spec in asym.expansion_catalog():
            for fit in asym.remainder_order_check(spec, d):
                assert fit.passed, (d.raw, fit.label, fit.part, fit.measured)


def test_projector_leading_terms(dp):
    fits = asym.projector_leading_check(dp)
    by_label = {f.label: f for f in fits}
    assert set(by_label) == {"P1_low", "P2_low", "P3_low", "P4_low",
                             "Q1_low", "Q2_low", "Q1_high", "Q2_high"}
    for f in fits:
        assert f.passed, (f.label, f.measured)
    for name in ("P1_low", "P2_low", "P3_low", "P4_low"):
        assert by_label[name].measured >= 0.7


def test_projector_leading_matrices_complete(dp):
    P = asym.projector_leading_low(dp)
    assert np.abs(sum(P) - np.eye(4)).max() < 1e-14
    Q = asym.q_leading_low(dp)
    assert np.abs(sum(Q) - np.eye(2)).max() < 1e-14
    # P4 is the conjugate of P3, and P1/P2 are real
    assert np.array_equal(P[3], P[2].conj())
    assert np.abs(P[0].imag).max() == 0 and np.abs(P[1].imag).max() == 0


def test_eigenvalue_sum_matches_trace(dp, random_param_sets):
    # printed quadratic coefficients reproduce the Vieta sum identically
    for d in [dp] + random_param_sets:
        for s in (0.1, 0.03, 0.01):
            assert asym.eigenvalue_sum_identity_error(d, s) < 1e-12


def test_singular_weight_density_block(dp):
    w = asym.singular_weight(dp, (3, 3), 1.0)
    assert w.value == pytest.approx(np.exp(-1.0), abs=1e-6)
    w2 = asym.singular_weight(dp, (1, 3), 1.0)
    assert abs(w2.value) < 1e-4


def test_singular_weight_transverse(dp):
    for t in (1.0, 2.5):
        w = asym.singular_weight(dp, (2, 2), t)
        assert w.value == pytest.approx(np.exp(-t), abs=1e-6)


def test_singular_weight_menu_and_convergence(dp):
    with pytest.raises(ValueError):
        asym.singular_weight(dp, (1, 2), 1.0)
    # the density self-block oscillates at high frequency: extrapolation
    # must report non-convergence rather than a bogus limit
    with pytest.raises(asym.ExtrapolationError):
        asym.singular_weight(dp, (1, 1), 1.0)


def test_expansions_match_nearest_root_identity(dp):
    # sanity: the matcher picks roots that converge to the expansions
    for label, s in (("r1_high", 100.0), ("r2_high", 100.0), ("kappa1_high", 100.0)):
        spec = _spec(label)
        exact = asym.exact_branch_value(spec, dp, s)
        approx = spec.value(dp, s)
        assert abs(exact - approx) < 1e-2 * max(1.0, abs(approx))
