"""Numerical certification of the convolution inequalities behind the
nonlinear coupling.

Two families are covered: the initial-propagation estimates (convolving a
spreading envelope with algebraically localized data) and the three
space-time kernels that couple diffusion and Huygens waves along the Duhamel
integral.  Everything reduces, through bipolar coordinates, to nested 1D
adaptive quadrature of radial power-law kernels; the best constants are
estimated by sampling, never asserted sharp.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import hyp2f1

__all__ = [
    "RadialKernel",
    "ConvSpec",
    "ConvSample",
    "ConstantEstimate",
    "radial_product_integral",
    "lemma52_eval",
    "k_eval",
    "constant_estimate",
    "default_sample_grid",
    "DEFAULT_FRONT_SPEED",
]

# canonical-parameter sound speed sqrt(3/2); ConvSpec carries its own value
DEFAULT_FRONT_SPEED = float(np.sqrt(1.5))


@dataclass(frozen=True)
class RadialKernel:
    """amplitude * (1 + (r - center)^2 / width2)^(-power) on r >= 0.

    The r-weighted integral over an interval has a closed form (an odd piece
    plus a hypergeometric even piece), which keeps the bipolar convolution a
    single outer quadrature.
    """

    power: float
    center: float = 0.0
    width2: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.power <= 1.0:
            raise ValueError("power must exceed 1 for integrable moments")
        if self.width2 <= 0:
            raise ValueError("width2 must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * (1.0 + (r - self.center) ** 2 / self.width2) ** (-self.power)

    def _even_anti(self, u):
        # int_0^u (1+v^2)^(-p) dv
        return u * hyp2f1(0.5, self.power, 1.5, -u * u)

    def _odd_anti(self, u):
        # antiderivative of v (1+v^2)^(-p)
        return -((1.0 + u * u) ** (1.0 - self.power)) / (2.0 * (self.power - 1.0))

    def r_moment(self, a: float, b: float) -> float:
        """int_a^b r k(r) dr in closed form."""
        if b <= a:
            return 0.0
        w = np.sqrt(self.width2)
        ua, ub = (a - self.center) / w, (b - self.center) / w
        odd = self.width2 * (self._odd_anti(ub) - self._odd_anti(ua))
        even = self.center * w * (self._even_anti(ub) - self._even_anti(ua))
        return self.amplitude * (odd + even)


def _breakpoints(g, f, r0: float) -> list[float]:
    """Radii where the outer integrand changes character."""
    pts = {g.center, abs(r0 - f.center), r0 + f.center}
    for base in (g.center, abs(r0 - f.center), r0 + f.center):
        for off in (np.sqrt(g.width2), np.sqrt(f.width2)):
            pts.add(base + off)
            pts.add(max(base - off, 0.0))
    return sorted(p for p in pts if p > 0.0)


def radial_product_integral(f, g, r0: float, abs_tol: float = 1e-8) -> float:
    """int_{R^3} f(|x - y|) g(|y|) dy for radial f, g, at |x| = r0.

    Bipolar reduction: (2 pi / r0) int_0^inf r g(r)
    [int_{|r-r0|}^{r+r0} s f(s) ds] dr, with the inner moment in closed form
    for RadialKernel and by adaptive quadrature for generic callables; the
    r0 = 0 limit is 4 pi int f g r^2 dr.
    """
    if r0 < 0:
        raise ValueError("r0 must be >= 0")

    if isinstance(f, RadialKernel):
        inner = f.r_moment
    else:
        def inner(a, b):
            val, _ = quad(lambda s: s * f(s), a, b, epsabs=abs_tol * 1e-2,
                          epsrel=1e-10, limit=200)
            return val

    if r0 == 0.0:
        integrand = lambda r: 4.0 * np.pi * r * r * f(r) * g(r)
    else:
        integrand = lambda r: (2.0 * np.pi / r0) * r * g(r) * inner(abs(r - r0), r + r0)

    if isinstance(f, RadialKernel) and isinstance(g, RadialKernel):
        pts = _breakpoints(g, f, r0)
    else:
        pts = sorted({r0, 1.0})
    r_far = max(pts) * 2.0 + 50.0

    total = 0.0
    achieved = 0.0
    lo = 0.0
    for p in [q for q in pts if q < r_far] + [r_far]:
        if p <= lo:
            continue
        val, err = quad(integrand, lo, p, epsabs=abs_tol, epsrel=1e-10, limit=200)
        total += val
        achieved += err
        lo = p
    val, err = quad(integrand, r_far, np.inf, epsabs=abs_tol, epsrel=1e-10, limit=200)
    total += val
    achieved += err
    if achieved > 50.0 * abs_tol:
        raise RuntimeError(
            f"radial convolution quadrature reached only abs error {achieved:.2e}"
        )
    return total


@dataclass(frozen=True)
class ConvSpec:
    """One inequality instance: which display, its exponents and front speed.

    which = "L52a": kernel1 power n1 at scale 1+t, data power n2, bound
        power min(n1, n2); needs n1, n2 > 3/2.
    which = "L52b": front kernel power N at scale 1+t, data power r1, bound
        power 3/2; needs N >= r1 > 21/10.
    which = "K1"/"K2"/"K3": the space-time kernels; K3's front kernel power
        N > 0 is free.
    """

    which: str
    n1: float = 2.0
    n2: float = 2.0
    N: float = 3.0
    r1: float = 2.2
    c: float = DEFAULT_FRONT_SPEED

    def __post_init__(self):
        if self.which not in ("L52a", "L52b", "K1", "K2", "K3"):
            raise ValueError(f"unknown spec {self.which!r}")
        if self.which == "L52a" and not (self.n1 > 1.5 and self.n2 > 1.5):
            raise ValueError("L52a needs n1, n2 > 3/2")
        if self.which == "L52b" and not (self.N >= self.r1 > 2.1):
            raise ValueError("L52b needs N >= r1 > 21/10")
        if self.which == "K3" and not self.N > 0:
            raise ValueError("K3 needs N > 0")
        if self.c <= 0:
            raise ValueError("front speed must be positive")


def _d_envelope(x: float, t: float, p: float) -> float:
    return (1.0 + x * x / (1.0 + t)) ** (-p)


def _h_envelope(x: float, t: float, p: float, c: float) -> float:
    return (1.0 + (x - c * t) ** 2 / (1.0 + t)) ** (-p)


def lemma52_eval(spec: ConvSpec, x_mag: float, t: float,
                 abs_tol: float = 1e-8) -> tuple[float, float, float]:
    """(lhs, rhs, ratio) of an initial-propagation display with C = 1."""
    if spec.which == "L52a":
        f = RadialKernel(power=spec.n1, width2=1.0 + t)
        g = RadialKernel(power=spec.n2, width2=1.0)
        lhs = radial_product_integral(f, g, x_mag, abs_tol)
        rhs = _d_envelope(x_mag, t, min(spec.n1, spec.n2))
    elif spec.which == "L52b":
        f = RadialKernel(power=spec.N, center=spec.c * t, width2=1.0 + t)
        g = RadialKernel(power=spec.r1, width2=1.0)
        lhs = radial_product_integral(f, g, x_mag, abs_tol)
        rhs = _h_envelope(x_mag, t, 1.5, spec.c)
    else:
        raise ValueError(f"{spec.which} is a space-time kernel; use k_eval")
    return lhs, rhs, lhs / rhs


def _k_kernels(spec: ConvSpec, s: float, t: float):
    """(propagating kernel at age t-s, source kernel at age s)."""
    age = t - s
    if spec.which in ("K1", "K2"):
        f = RadialKernel(power=2.0, width2=1.0 + age,
                         amplitude=(1.0 + age) ** -2.0)
    else:  # K3: front-located propagator with the extra half-power of decay
        f = RadialKernel(power=spec.N, center=spec.c * age, width2=1.0 + age,
                         amplitude=(1.0 + age) ** -2.5)
    if spec.which == "K1":
        g = RadialKernel(power=3.0, width2=1.0 + s, amplitude=(1.0 + s) ** -3.0)
    else:
        g = RadialKernel(power=3.0, center=spec.c * s, width2=1.0 + s,
                         amplitude=(1.0 + s) ** -4.0)
    return f, g


def k_eval(spec: ConvSpec, x_mag: float, t: float,
           abs_tol: float = 1e-6) -> tuple[float, float, float]:
    """(lhs, rhs, ratio) of a space-time kernel with C = 1.

    The time integral is split at t/2 (the integrand peaks at both endpoints)
    and each half integrated adaptively; the spatial convolution inside uses
    the closed-moment path.
    """
    if spec.which not in ("K1", "K2", "K3"):
        raise ValueError(f"{spec.which} is an initial-propagation display")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        lhs = 0.0
    else:
        def integrand(s):
            f, g = _k_kernels(spec, s, t)
            return radial_product_integral(f, g, x_mag, abs_tol * 1e-2)

        lhs = 0.0
        for lo, hi in ((0.0, t / 2.0), (t / 2.0, t)):
            val, _ = quad(integrand, lo, hi, epsabs=abs_tol, epsrel=1e-8,
                          limit=100)
            lhs += val

    base = (1.0 + t) ** -2.0
    if spec.which == "K1":
        rhs = base * _d_envelope(x_mag, t, 1.5)
    else:
        rhs = base * (_d_envelope(x_mag, t, 1.5) + _h_envelope(x_mag, t, 1.5, spec.c))
    return lhs, rhs, (lhs / rhs if rhs > 0 else np.inf)


def default_sample_grid(spec: ConvSpec,
                        t_values=(1.0, 4.0, 16.0, 64.0, 256.0),
                        x_factors=(0.0, 0.25, 0.5, 0.9, 1.0, 1.1, 1.5, 2.0)):
    """(x, t) sample points with |x| proportional to the front radius c t."""
    return [(f * spec.c * t, t) for t in t_values for f in x_factors]


@dataclass(frozen=True)
class ConvSample:
    x: float
    t: float
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class ConstantEstimate:
    spec: ConvSpec
    samples: tuple
    c_max: float
    argmax: tuple[float, float]


def evaluate_samples(spec: ConvSpec, grid, abs_tol: float = 1e-6) -> list[ConvSample]:
    out = []
    evalf = lemma52_eval if spec.which.startswith("L") else k_eval
    for x, t in grid:
        lhs, rhs, ratio = evalf(spec, x, t, abs_tol)
        out.append(ConvSample(x=x, t=t, lhs=lhs, rhs=rhs, ratio=ratio))
    return out


def constant_estimate(spec: ConvSpec, grid=None,
                      abs_tol: float = 1e-6) -> ConstantEstimate:
    """Best-constant estimate: the max lhs/rhs ratio over the sample grid."""
    if grid is None:
        grid = default_sample_grid(spec)
    samples = evaluate_samples(spec, grid, abs_tol)
    best = max(samples, key=lambda s: s.ratio)
    return ConstantEstimate(spec=spec, samples=tuple(samples),
                            c_max=best.ratio, argmax=(best.x, best.t))
