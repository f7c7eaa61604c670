"""Physical parameters of the two-phase model and derived linearization constants.

The model couples a damped isothermal Euler phase (density ``rho``, momentum
``m``) to an isentropic Navier-Stokes phase (density ``n``, momentum ``w``)
through a mutual drag term.  Everything downstream (symbols, spectra, Green's
function, solver) is parameterized by the handful of constants derived here.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

__all__ = [
    "ModelParams",
    "DerivedParams",
    "InvalidParams",
    "derive",
    "canonical_params",
]


class InvalidParams(ValueError):
    """Raised when a parameter record violates an admissibility condition."""


@dataclass(frozen=True)
class ModelParams:
    """Raw physical constants.

    rho_bar : background density of the Euler phase (> 0)
    n_bar   : background density of the NS phase (> 0)
    a_coef  : pressure coefficient A in P(n) = A n^gamma (> 0)
    gamma   : adiabatic exponent (>= 1)
    mu      : shear viscosity (> 0)
    lam     : bulk viscosity; must satisfy 2/3 mu + lam >= 0
    """

    rho_bar: float
    n_bar: float
    a_coef: float = 1.0
    gamma: float = 2.0
    mu: float = 1.0
    lam: float = 0.0

    def validate(self) -> None:
        checks = [
            (self.rho_bar > 0, "rho_bar > 0"),
            (self.n_bar > 0, "n_bar > 0"),
            (self.a_coef > 0, "a_coef > 0"),
            (self.gamma >= 1, "gamma >= 1"),
            (self.mu > 0, "mu > 0"),
            (2.0 / 3.0 * self.mu + self.lam >= 0, "2/3*mu + lam >= 0"),
        ]
        for ok, cond in checks:
            if not ok:
                raise InvalidParams(f"parameter record violates {cond}: {self}")

    def pressure(self, n: float) -> float:
        """P(n) = A n^gamma."""
        return self.a_coef * n**self.gamma

    def pressure_slope(self, n: float) -> float:
        """P'(n) = A gamma n^(gamma-1)."""
        return self.a_coef * self.gamma * n ** (self.gamma - 1.0)


@dataclass(frozen=True)
class DerivedParams:
    """Linearization constants, all derived from a validated ModelParams.

    alpha1     = P'(n_bar)
    alpha2     = rho_bar / n_bar
    mu_bar     = mu / n_bar
    lambda_bar = lam / n_bar
    nu         = 2 mu_bar + lambda_bar
    c          = sound speed, c^2 = (alpha1 + alpha2) / (alpha2 + 1)
    """

    alpha1: float
    alpha2: float
    mu_bar: float
    lambda_bar: float
    nu: float
    c: float
    raw: ModelParams

    def validate(self) -> None:
        checks = [
            (self.alpha1 > 0, "alpha1 > 0"),
            (self.alpha2 > 0, "alpha2 > 0"),
            (self.nu > 0, "nu > 0"),
            (self.c > 0, "c > 0"),
        ]
        for ok, cond in checks:
            if not ok:
                raise InvalidParams(f"derived record violates {cond}: {self}")


def derive(params: ModelParams) -> DerivedParams:
    """Validate raw parameters and derive the linearization constants.

    The sound speed is computed from both closed forms,
    sqrt((alpha1+alpha2)/(alpha2+1)) and
    sqrt((n_bar P'(n_bar) + rho_bar)/(n_bar + rho_bar)),
    and they are required to agree to relative 1e-12.
    """
    params.validate()
    alpha1 = params.pressure_slope(params.n_bar)
    alpha2 = params.rho_bar / params.n_bar
    mu_bar = params.mu / params.n_bar
    lambda_bar = params.lam / params.n_bar
    nu = 2.0 * mu_bar + lambda_bar

    c = math.sqrt((alpha1 + alpha2) / (alpha2 + 1.0))
    c_alt = math.sqrt(
        (params.n_bar * params.pressure_slope(params.n_bar) + params.rho_bar)
        / (params.n_bar + params.rho_bar)
    )
    if abs(c - c_alt) > 1e-12 * c_alt:
        raise InvalidParams(
            f"sound-speed closed forms disagree: {c!r} vs {c_alt!r}"
        )

    dp = DerivedParams(
        alpha1=alpha1,
        alpha2=alpha2,
        mu_bar=mu_bar,
        lambda_bar=lambda_bar,
        nu=nu,
        c=c,
        raw=params,
    )
    dp.validate()
    return dp


def canonical_params() -> DerivedParams:
    """The default parameter set used throughout tests and demos.

    rho_bar = n_bar = A = mu = 1, gamma = 2, lam = 0, giving
    alpha1 = 2, alpha2 = 1, nu = 2, c = sqrt(3/2).
    """
    return derive(ModelParams(rho_bar=1.0, n_bar=1.0, a_coef=1.0, gamma=2.0, mu=1.0, lam=0.0))
