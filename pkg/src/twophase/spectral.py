"""Fourier symbols of the linearized two-phase system, their spectra and propagators.

The linearized system splits, for each wavenumber xi, into a 4x4 compressible
block (densities and longitudinal momenta, a function of s = |xi| only), a 2x2
incompressible block (transverse momenta), and the full 8x8 symbol acting on
(rho, m, n, w).  This module builds those matrices, computes exact spectra with
branch labels assigned by continuation from the low-frequency expansions,
forms spectral projectors, and exponentiates the symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linear_sum_assignment

from .model import DerivedParams

__all__ = [
    "CompressibleSpectrum",
    "IncompressibleSpectrum",
    "ProjectorSet",
    "StabilityScan",
    "CollisionError",
    "symbol_compressible",
    "symbol_incompressible",
    "symbol_full",
    "char_poly_compressible",
    "compressible_roots",
    "incompressible_roots",
    "spectrum",
    "projectors",
    "propagator",
    "propagator_table",
    "incompressible_propagator_table",
    "labeled_scan",
    "stability_scan",
    "DEFAULT_COLLISION_TOL",
]

# Relative eigenvalue-gap threshold below which projectors are refused and the
# propagator falls back to a dense matrix exponential.
DEFAULT_COLLISION_TOL = 1e-4


class CollisionError(RuntimeError):
    """Eigenvalue gap below the collision tolerance; projectors are ill-posed."""


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------

def symbol_compressible(dp: DerivedParams, s: float) -> np.ndarray:
    """4x4 real symbol acting on (rho, phi, n, psi) at s = |xi| >= 0."""
    if s < 0:
        raise ValueError("s must be >= 0")
    a1, a2, nu = dp.alpha1, dp.alpha2, dp.nu
    return np.array(
        [
            [0.0, -s, 0.0, 0.0],
            [s, -1.0, 0.0, a2],
            [0.0, 0.0, 0.0, -s],
            [0.0, 1.0, a1 * s, -nu * s * s - a2],
        ]
    )


def symbol_incompressible(dp: DerivedParams, s: float) -> np.ndarray:
    """2x2 real symbol acting on the transverse momentum pair at s = |xi| >= 0."""
    if s < 0:
        raise ValueError("s must be >= 0")
    a2, mu = dp.alpha2, dp.mu_bar
    return np.array([[-1.0, a2], [1.0, -a2 - mu * s * s]])


def symbol_full(dp: DerivedParams, xi) -> np.ndarray:
    """8x8 complex symbol acting on (rho, m1..m3, n, w1..w3).

    Entries are polynomials in i*xi with real coefficients, so
    A(-xi) = conj(A(xi)) and synthesized fields come out real.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise ValueError("xi must be a 3-vector")
    a1, a2 = dp.alpha1, dp.alpha2
    mu, lam = dp.mu_bar, dp.lambda_bar
    s2 = float(xi @ xi)
    ixi = 1j * xi

    A = np.zeros((8, 8), dtype=complex)
    A[0, 1:4] = -ixi
    A[1:4, 0] = -ixi
    A[1:4, 1:4] = -np.eye(3)
    A[1:4, 5:8] = a2 * np.eye(3)
    A[4, 5:8] = -ixi
    A[5:8, 1:4] = np.eye(3)
    A[5:8, 4] = -a1 * ixi
    A[5:8, 5:8] = -(mu * s2 + a2) * np.eye(3) - (mu + lam) * np.outer(xi, xi)
    return A


def char_poly_compressible(dp: DerivedParams, s: float) -> np.ndarray:
    """Coefficients (descending powers) of det(r I - A1(s)) for the 4x4 block."""
    a1, a2, nu = dp.alpha1, dp.alpha2, dp.nu
    s2 = s * s
    return np.array(
        [
            1.0,
            nu * s2 + a2 + 1.0,
            (nu + a1 + 1.0) * s2,
            nu * s2 * s2 + (a1 + a2) * s2,
            a1 * s2 * s2,
        ]
    )


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompressibleSpectrum:
    """Four eigenvalues of the compressible block at one frequency.

    When ``labeled`` is True the order is (r1, r2, r3, r4): r1 the branch near
    -(alpha2+1) at s -> 0, r2 the diffusive branch, r3 the sound branch with
    Im >= 0, r4 its conjugate.  When branch continuation hits a collision the
    roots are returned in unspecified order with ``labeled = False``.
    """

    s: float
    r: np.ndarray
    gap: float
    labeled: bool


@dataclass(frozen=True)
class IncompressibleSpectrum:
    """Eigenvalue pair of the transverse block; kappa2 is the branch vanishing
    as s -> 0 (the two branches never collide: gap >= 2 sqrt(alpha2))."""

    s: float
    kappa1: float
    kappa2: float
    gap: float


@dataclass(frozen=True)
class ProjectorSet:
    """Spectral projectors P_i = prod_{j != i} (A - r_j I)/(r_i - r_j)."""

    which: str
    s: float
    eigenvalues: np.ndarray
    matrices: np.ndarray  # shape (k, n, n)


def compressible_roots(dp: DerivedParams, s: float) -> np.ndarray:
    """Unlabeled roots of the compressible characteristic quartic.

    Computed as companion-matrix eigenvalues of the printed polynomial, which
    stays stable near branch collisions where closed-form radicals cancel.
    """
    return np.roots(char_poly_compressible(dp, s))


def incompressible_roots(dp: DerivedParams, s: float) -> tuple[float, float]:
    """(kappa1, kappa2) with kappa2 the branch through 0; both always real.

    kappa2 comes from the cancellation-free form of the quadratic formula,
    so the Vieta product survives at tiny s.
    """
    b = dp.alpha2 + 1.0 + dp.mu_bar * s * s
    disc = b * b - 4.0 * dp.mu_bar * s * s
    kappa1 = -(b + math.sqrt(disc)) / 2.0
    kappa2 = dp.mu_bar * s * s / kappa1 if s > 0 else 0.0
    return kappa1, kappa2


def _low_anchor(dp: DerivedParams, s: float) -> np.ndarray:
    """Two-term low-frequency eigenvalue expansions used to seed labeling."""
    a1, a2, nu, c = dp.alpha1, dp.alpha2, dp.nu, dp.c
    beta = a2 + 1.0
    e1 = (-a2 * beta * nu + a1 * a2 + 1.0) / beta**2
    e2 = -a1 / (a1 + a2)
    theta = (nu * (a1 + a2) * beta + a2 * (a1 - 1.0) ** 2) / (2.0 * (a1 + a2) * beta**2)
    s2 = s * s
    return np.array(
        [
            -beta + e1 * s2,
            e2 * s2,
            -theta * s2 + 1j * c * s,
            -theta * s2 - 1j * c * s,
        ],
        dtype=complex,
    )


def _match(prev: np.ndarray, roots: np.ndarray) -> tuple[np.ndarray, float]:
    """Assign roots to previous labels by minimal total distance.

    Returns the reordered roots and the assignment margin (second-best minus
    best column choice, minimized over rows); a small margin flags ambiguity.
    """
    cost = np.abs(prev[:, None] - roots[None, :])
    rows, cols = linear_sum_assignment(cost)
    ordered = roots[cols[np.argsort(rows)]]
    margin = np.inf
    for i in range(len(prev)):
        d = np.sort(cost[i])
        margin = min(margin, d[1] - d[0])
    return ordered, margin


def _track_labels(dp: DerivedParams, s: float, collision_tol: float) -> tuple[np.ndarray, bool]:
    """Continuation labeling from the low-frequency anchor up to s."""
    s_anchor = min(1e-2, s)
    n_oct = max(1.0, math.log2(s / s_anchor)) if s > s_anchor else 1.0
    n_steps = int(max(8, round(16 * n_oct)))
    grid = np.geomspace(s_anchor, s, n_steps) if s > s_anchor else np.array([s])

    labels = _low_anchor(dp, grid[0])
    ok = True
    for sk in grid:
        roots = compressible_roots(dp, sk)
        scale = max(1.0, float(np.max(np.abs(roots))))
        labels, margin = _match(labels, roots)
        if margin <= collision_tol * scale:
            ok = False
    # orient the conjugate pair: r3 carries the nonneg imaginary part
    if labels[2].imag < labels[3].imag:
        labels = labels[[0, 1, 3, 2]]
    return labels, ok


def _pairwise_gap(vals: np.ndarray) -> float:
    diffs = np.abs(vals[:, None] - vals[None, :])
    diffs[np.diag_indices_from(diffs)] = np.inf
    return float(diffs.min())


def spectrum(dp: DerivedParams, s: float, which: str = "compressible",
             collision_tol: float = DEFAULT_COLLISION_TOL):
    """Exact spectrum at s = |xi|, with branch labels where trackable.

    which = "compressible" returns a CompressibleSpectrum; labels follow the
    s -> 0 expansions by continuation along a geometric s-grid.  A collision
    within the tracking tolerance yields labeled=False with roots intact.
    which = "incompressible" returns an IncompressibleSpectrum.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    if which == "incompressible":
        k1, k2 = incompressible_roots(dp, s)
        return IncompressibleSpectrum(s=s, kappa1=k1, kappa2=k2, gap=abs(k1 - k2))
    if which != "compressible":
        raise ValueError(f"unknown spectrum kind {which!r}")

    if s == 0.0:
        r = np.array([-(dp.alpha2 + 1.0), 0.0, 0.0, 0.0], dtype=complex)
        return CompressibleSpectrum(s=s, r=r, gap=0.0, labeled=True)

    labels, ok = _track_labels(dp, s, collision_tol)
    return CompressibleSpectrum(s=s, r=labels, gap=_pairwise_gap(labels), labeled=ok)


# ---------------------------------------------------------------------------
# Projectors and propagators
# ---------------------------------------------------------------------------

def _projector_matrices(A: np.ndarray, eigs: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    P = np.empty((len(eigs), n, n), dtype=complex)
    for i, ri in enumerate(eigs):
        M = np.eye(n, dtype=complex)
        for j, rj in enumerate(eigs):
            if j == i:
                continue
            M = M @ (A - rj * np.eye(n)) / (ri - rj)
        P[i] = M
    return P


def projectors(dp: DerivedParams, s: float, which: str = "compressible",
               collision_tol: float = DEFAULT_COLLISION_TOL) -> ProjectorSet:
    """Spectral projectors of the 4x4 or 2x2 symbol at one frequency.

    Raises CollisionError when the eigenvalue gap is below
    collision_tol * max(1, |r|_max); callers should then use the robust
    matrix-exponential path instead of the spectral formula.
    """
    if which == "compressible":
        spec = spectrum(dp, s, "compressible", collision_tol)
        eigs = spec.r
        A = symbol_compressible(dp, s).astype(complex)
    elif which == "incompressible":
        k1, k2 = incompressible_roots(dp, s)
        eigs = np.array([k1, k2], dtype=complex)
        A = symbol_incompressible(dp, s).astype(complex)
    else:
        raise ValueError(f"unknown projector kind {which!r}")

    scale = max(1.0, float(np.max(np.abs(eigs))))
    gap = _pairwise_gap(eigs)
    if gap <= collision_tol * scale:
        raise CollisionError(
            f"eigenvalue gap {gap:.3e} below tolerance at s={s} ({which})"
        )
    return ProjectorSet(which=which, s=s, eigenvalues=eigs,
                        matrices=_projector_matrices(A, eigs))


def propagator(dp: DerivedParams, arg, t: float, which: str = "compressible",
               collision_tol: float = DEFAULT_COLLISION_TOL) -> np.ndarray:
    """exp(t A) for the requested symbol.

    which = "compressible" / "incompressible": arg is s = |xi|; uses the
    spectral formula sum_i e^{r_i t} P_i away from collisions and falls back
    to scipy's scaling-and-squaring expm at them, so the map is total.
    which = "full": arg is the 3-vector xi; dense expm of the 8x8 symbol.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if which == "full":
        return expm(t * symbol_full(dp, arg))
    try:
        ps = projectors(dp, float(arg), which, collision_tol)
    except CollisionError:
        A = (symbol_compressible if which == "compressible" else symbol_incompressible)(dp, float(arg))
        return expm(t * A).astype(complex)
    out = np.zeros_like(ps.matrices[0])
    for ri, Pi in zip(ps.eigenvalues, ps.matrices):
        out += np.exp(ri * t) * Pi
    return out


def _batched_expm_real(mats: np.ndarray) -> np.ndarray:
    """expm of a batch of small real matrices via batched eigendecomposition,
    with scipy expm fallback where the eigenbasis is ill-conditioned."""
    w, V = np.linalg.eig(mats)
    E = V @ (np.exp(w)[..., None] * np.linalg.inv(V))
    # residual check against defective/near-defective cases
    recon = V @ (w[..., None] * np.linalg.inv(V))
    err = np.abs(recon - mats).max(axis=(-2, -1))
    scale = np.abs(mats).max(axis=(-2, -1)) + 1.0
    bad = np.nonzero(err > 1e-10 * scale)[0]
    for k in bad:
        E[k] = expm(mats[k])
    return E


def propagator_table(dp: DerivedParams, s_values: np.ndarray, t: float) -> np.ndarray:
    """exp(t A1(s)) for an array of frequencies; shape (len(s), 4, 4) complex.

    Vectorized over s for lattice-scale tabulation; falls back to scipy expm
    pointwise wherever the batched eigendecomposition is unreliable.
    """
    s = np.asarray(s_values, dtype=float)
    a1, a2, nu = dp.alpha1, dp.alpha2, dp.nu
    mats = np.zeros(s.shape + (4, 4))
    mats[..., 0, 1] = -s
    mats[..., 1, 0] = s
    mats[..., 1, 1] = -1.0
    mats[..., 1, 3] = a2
    mats[..., 2, 3] = -s
    mats[..., 3, 1] = 1.0
    mats[..., 3, 2] = a1 * s
    mats[..., 3, 3] = -nu * s * s - a2
    return _batched_expm_real(t * mats)


def incompressible_propagator_table(dp: DerivedParams, s_values: np.ndarray, t: float) -> np.ndarray:
    """exp(t A2(s)) for an array of frequencies; shape (len(s), 2, 2) real.

    Uses the two-projector closed form; the transverse branches never collide
    (gap >= 2 sqrt(alpha2)), so this is uniformly stable.
    """
    s = np.asarray(s_values, dtype=float)
    a2, mu = dp.alpha2, dp.mu_bar
    b = a2 + 1.0 + mu * s * s
    root = np.sqrt(b * b - 4.0 * mu * s * s)
    k1 = (-b - root) / 2.0
    k2 = (-b + root) / 2.0

    A = np.zeros(s.shape + (2, 2))
    A[..., 0, 0] = -1.0
    A[..., 0, 1] = a2
    A[..., 1, 0] = 1.0
    A[..., 1, 1] = -a2 - mu * s * s

    eye = np.eye(2)
    Q1 = (A - k2[..., None, None] * eye) / (k1 - k2)[..., None, None]
    Q2 = (A - k1[..., None, None] * eye) / (k2 - k1)[..., None, None]
    return (np.exp(k1 * t)[..., None, None] * Q1
            + np.exp(k2 * t)[..., None, None] * Q2)


# ---------------------------------------------------------------------------
# Stability scan
# ---------------------------------------------------------------------------

def labeled_scan(dp: DerivedParams, s_grid: np.ndarray,
                 collision_tol: float = DEFAULT_COLLISION_TOL):
    """Continuation-labeled compressible roots along an increasing s-grid.

    Returns (roots, ok): roots[k] ordered (r1..r4) by continuation from the
    low-frequency anchor, ok[k] False from the first ambiguous match on.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be strictly increasing")
    out = np.empty((len(s_grid), 4), dtype=complex)
    ok = np.ones(len(s_grid), dtype=bool)
    labels, good = _track_labels(dp, s_grid[0], collision_tol)
    out[0] = labels
    ok[0] = good
    for k in range(1, len(s_grid)):
        roots = compressible_roots(dp, s_grid[k])
        scale = max(1.0, float(np.max(np.abs(roots))))
        labels, margin = _match(labels, roots)
        if margin <= collision_tol * scale:
            ok[k:] = False
        if labels[2].imag < labels[3].imag:
            labels = labels[[0, 1, 3, 2]]
        out[k] = labels
    return out, ok


@dataclass(frozen=True)
class StabilityScan:
    s: np.ndarray
    max_re_compressible: np.ndarray
    max_re_incompressible: np.ndarray

    @property
    def max_re(self) -> np.ndarray:
        return np.maximum(self.max_re_compressible, self.max_re_incompressible)

    @property
    def nonnegative_at(self) -> np.ndarray:
        """Frequencies s > 0 where some eigenvalue has nonnegative real part."""
        return self.s[(self.s > 0) & (self.max_re >= 0)]


def stability_scan(dp: DerivedParams, s_grid: np.ndarray) -> StabilityScan:
    """Max real part of all six eigenvalues at each frequency of the grid."""
    s_grid = np.asarray(s_grid, dtype=float)
    mc = np.empty_like(s_grid)
    mi = np.empty_like(s_grid)
    for k, s in enumerate(s_grid):
        mc[k] = compressible_roots(dp, s).real.max()
        k1, k2 = incompressible_roots(dp, s)
        mi[k] = max(k1, k2)
    return StabilityScan(s=s_grid, max_re_compressible=mc, max_re_incompressible=mi)
