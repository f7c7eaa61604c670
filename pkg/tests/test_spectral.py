import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from twophase import spectral as sp
from twophase.model import ModelParams, derive


def test_compressible_symbol_entries(dp):
    A = sp.symbol_compressible(dp, 0.0)
    expect = np.zeros((4, 4))
    expect[1, 1] = -1.0
    expect[1, 3] = 1.0
    expect[3, 1] = 1.0
    expect[3, 3] = -1.0
    assert np.array_equal(A, expect)

    A1 = sp.symbol_compressible(dp, 1.0)
    assert A1[3, 3] == -3.0          # -nu - alpha2
    for s in (0.2, 1.0, 7.5):
        As = sp.symbol_compressible(dp, s)
        assert np.trace(As) == pytest.approx(-(dp.nu * s * s + dp.alpha2 + 1.0))


def test_incompressible_symbol(dp):
    assert np.array_equal(sp.symbol_incompressible(dp, 0.0),
                          np.array([[-1.0, 1.0], [1.0, -1.0]]))
    A = sp.symbol_incompressible(dp, 1.0)
    assert A[1, 1] == -2.0
    assert np.linalg.det(A) == pytest.approx(dp.mu_bar)  # mu_bar s^2 at s=1


def test_full_symbol_at_zero(dp):
    A = sp.symbol_full(dp, np.zeros(3))
    assert np.all(A[0] == 0) and np.all(A[4] == 0)
    assert np.allclose(A[1:4, 1:4], -np.eye(3))
    assert np.allclose(A[1:4, 5:8], dp.alpha2 * np.eye(3))
    assert np.allclose(A[5:8, 1:4], np.eye(3))
    assert np.allclose(A[5:8, 5:8], -dp.alpha2 * np.eye(3))


def test_full_symbol_trace_and_conjugate_symmetry(dp):
    rng = np.random.default_rng(3)
    for _ in range(100):
        xi = rng.normal(size=3) * rng.uniform(0.1, 5)
        A = sp.symbol_full(dp, xi)
        s2 = xi @ xi
        tr = -3.0 * (dp.mu_bar * s2 + dp.alpha2) - (dp.mu_bar + dp.lambda_bar) * s2 - 3.0
        assert np.trace(A) == pytest.approx(tr, rel=1e-12)
        assert np.allclose(sp.symbol_full(dp, -xi), A.conj(), atol=0)


def test_spectrum_at_zero_and_trivial_vieta(dp):
    spec = sp.spectrum(dp, 0.0)
    assert sorted(spec.r.real) == pytest.approx([-2.0, 0.0, 0.0, 0.0])

    spec1 = sp.spectrum(dp, 1.0)
    assert spec1.r.sum() == pytest.approx(-4.0, rel=1e-12)
    assert spec1.r.prod() == pytest.approx(2.0, rel=1e-12)


def test_incompressible_roots_canonical(dp):
    k1, k2 = sp.incompressible_roots(dp, 1.0)
    assert k1 == pytest.approx((-3 - np.sqrt(5)) / 2, rel=1e-12)
    assert k2 == pytest.approx((-3 + np.sqrt(5)) / 2, rel=1e-12)


def test_vieta_identities_random(dp, random_param_sets):
    for d in [dp] + random_param_sets[:5]:
        for s in np.geomspace(1e-3, 50, 40):
            r = sp.compressible_roots(d, s)
            coef = sp.char_poly_compressible(d, s)
            scale = max(1.0, np.abs(r).max())
            assert abs(r.sum() + coef[1]) < 1e-10 * scale
            assert abs(r.prod() - coef[4]) < 1e-10 * max(1.0, abs(coef[4]))
            k1, k2 = sp.incompressible_roots(d, s)
            assert k1 + k2 == pytest.approx(-(d.alpha2 + 1 + d.mu_bar * s * s), rel=1e-12)
            assert k1 * k2 == pytest.approx(d.mu_bar * s * s, rel=1e-12, abs=1e-15)


def test_branch_labels_follow_low_frequency_expansions(dp):
    spec = sp.spectrum(dp, 1e-3)
    assert spec.labeled
    assert spec.r[0].real == pytest.approx(-2.0, abs=1e-5)
    assert spec.r[1].real == pytest.approx(-(2.0 / 3.0) * 1e-6, rel=1e-2)
    assert spec.r[2].imag > 0 > spec.r[3].imag
    assert spec.r[2].imag == pytest.approx(dp.c * 1e-3, rel=1e-5)


def test_collision_flagging_near_origin(dp):
    spec = sp.spectrum(dp, 1e-5)
    assert not spec.labeled           # gap below tolerance: unlabeled
    assert len(spec.r) == 4           # roots still returned
    with pytest.raises(sp.CollisionError):
        sp.projectors(dp, 1e-5)


def test_projector_algebra(dp):
    for which, dim in (("compressible", 4), ("incompressible", 2)):
        for s in (0.05, 0.5, 2.0, 10.0):
            ps = sp.projectors(dp, s, which)
            total = ps.matrices.sum(axis=0)
            assert np.abs(total - np.eye(dim)).max() < 1e-8
            A = (sp.symbol_compressible if which == "compressible"
                 else sp.symbol_incompressible)(dp, s)
            recon = sum(r * P for r, P in zip(ps.eigenvalues, ps.matrices))
            assert np.abs(recon - A).max() < 1e-8
            for i in range(dim if which == "compressible" else 2):
                for j in range(len(ps.matrices)):
                    prod = ps.matrices[i] @ ps.matrices[j]
                    expect = ps.matrices[i] if i == j else np.zeros_like(prod)
                    assert np.abs(prod - expect).max() < 1e-8


def test_projector_low_frequency_leading_terms(dp):
    # row 1 of P2 and the incompressible Q2 approach their printed limits
    ps = sp.projectors(dp, 0.005)
    row = ps.matrices[1][0].real
    lead = np.array([dp.alpha1, 0, -dp.alpha1 * dp.alpha2, 0]) / (dp.alpha1 + dp.alpha2)
    assert np.abs(row - lead).max() < 0.01

    qs = sp.projectors(dp, 0.005, "incompressible")
    q2_lead = np.array([[dp.alpha2, dp.alpha2], [1, 1]]) / (dp.alpha2 + 1)
    assert np.abs(qs.matrices[1].real - q2_lead).max() < 1e-4


def test_propagator_identity_and_closed_form(dp):
    assert np.allclose(sp.propagator(dp, 1.3, 0.0), np.eye(4), atol=1e-14)

    t = 0.8
    E = sp.propagator(dp, 0.0, t)
    sub = E[np.ix_([1, 3], [1, 3])].real
    P0 = np.array([[1.0, 1.0], [1.0, 1.0]]) / 2
    P1 = np.eye(2) - P0
    assert np.abs(sub - (P0 + np.exp(-2 * t) * P1)).max() < 1e-12


def test_propagator_spectral_vs_expm_vs_ode(dp):
    for s, t in [(0.4, 1.5), (2.0, 0.7), (8.0, 0.2)]:
        E_spec = sp.propagator(dp, s, t)
        A = sp.symbol_compressible(dp, s)
        E_dense = expm(t * A)
        assert np.abs(E_spec - E_dense).max() < 1e-8

        sol = solve_ivp(lambda _, y: (A @ y.reshape(4, 4)).ravel(), (0, t),
                        np.eye(4).ravel(), rtol=1e-12, atol=1e-13,
                        method="DOP853")
        E_ode = sol.y[:, -1].reshape(4, 4)
        assert np.abs(E_spec - E_ode).max() < 1e-6


def test_propagator_total_at_collision(dp):
    # near-collision frequency: the dense fallback still returns exp(tA)
    E = sp.propagator(dp, 1e-5, 1.0)
    assert np.abs(E - expm(sp.symbol_compressible(dp, 1e-5))).max() < 1e-10


def test_semigroup_property(dp):
    for which in ("compressible", "incompressible"):
        E1 = sp.propagator(dp, 1.3, 0.7, which)
        E2 = sp.propagator(dp, 1.3, 1.1, which)
        E12 = sp.propagator(dp, 1.3, 1.8, which)
        assert np.abs(E1 @ E2 - E12).max() < 1e-8


def test_full_propagator_hodge_recombination(dp):
    # longitudinal data evolves by the 4x4 block, transverse by the 2x2 block
    rng = np.random.default_rng(11)
    xi = np.array([0.4, -0.7, 1.1])
    t = 2.0
    s = np.linalg.norm(xi)
    e = xi / s
    Pf = sp.propagator(dp, xi, t, "full")

    rho0, n0 = rng.normal() + 1j * rng.normal(), rng.normal() + 1j * rng.normal()
    a, b = rng.normal() + 1j * rng.normal(), rng.normal() + 1j * rng.normal()
    U0 = np.concatenate([[rho0], a * e, [n0], b * e])
    v0 = np.array([rho0, 1j * a, n0, 1j * b])
    v1 = sp.propagator(dp, s, t) @ v0
    expect = np.concatenate([[v1[0]], -1j * v1[1] * e, [v1[2]], -1j * v1[3] * e])
    assert np.abs(Pf @ U0 - expect).max() < 1e-8

    eperp = np.cross(e, [1.0, 0.0, 0.0])
    eperp /= np.linalg.norm(eperp)
    U0t = np.concatenate([[0], a * eperp, [0], b * eperp])
    vt = sp.propagator(dp, s, t, "incompressible") @ np.array([a, b])
    expect_t = np.concatenate([[0], vt[0] * eperp, [0], vt[1] * eperp])
    assert np.abs(Pf @ U0t - expect_t).max() < 1e-8


def test_propagator_tables_match_dense(dp):
    svals = np.array([0.0, 1e-3, 0.3, 1.7, 9.0, 40.0])
    t = 0.6
    tab = sp.propagator_table(dp, svals, t)
    tab_i = sp.incompressible_propagator_table(dp, svals, t)
    for k, s in enumerate(svals):
        assert np.abs(tab[k] - expm(t * sp.symbol_compressible(dp, s))).max() < 1e-12
        assert np.abs(tab_i[k] - expm(t * sp.symbol_incompressible(dp, s))).max() < 1e-12


def test_stability_scan(dp):
    grid = np.geomspace(1e-3, 50.0, 500)
    scan = sp.stability_scan(dp, grid)
    assert np.all(scan.max_re < 0)
    assert scan.nonnegative_at.size == 0
    # max Re -> 0 as s -> 0; for canonical constants the slowest branch is
    # the sound envelope -theta s^2 with theta = 13/24 (< alpha1/(alpha1+alpha2))
    assert scan.max_re_compressible[0] == pytest.approx(
        -(13.0 / 24.0) * grid[0] ** 2, rel=1e-3)
    # transverse branch kappa2 ~ -mu_bar s^2/(alpha2+1)
    assert scan.max_re_incompressible[0] == pytest.approx(
        -dp.mu_bar * grid[0] ** 2 / (dp.alpha2 + 1.0), rel=1e-3)


def test_labeled_scan_marches_without_ambiguity(dp):
    grid = np.geomspace(1e-3, 50.0, 200)
    roots, ok = sp.labeled_scan(dp, grid)
    assert ok.all()
    assert np.all(roots[:, 2].imag >= 0)
    # labels connect continuously: increments stay small along the grid
    steps = np.abs(np.diff(roots, axis=0))
    scale = np.maximum(1.0, np.abs(roots[1:]).max(axis=1, keepdims=True))
    assert np.all(steps / scale < 0.5)
