"""The large-deviation calculus of the scaled chain.

Core objects, for gamma in [0,1] and dual variable kappa:

    H(gamma, kappa) = lam*gamma*(e^kappa - 1) + lam*gamma*(e^-kappa - 1)
    L(gamma, u)     = sup_kappa { kappa*u - H(gamma, kappa) }
                    = u*asinh(u / (2*lam*gamma)) + 2*lam*gamma
                      - sqrt(u^2 + (2*lam*gamma)^2)
    I(path)         = integral of L(gamma(t), dgamma(t)) dt

The asinh form of L is used everywhere: the equivalent rationalized form with
denominator u + sqrt(u^2 + (2*lam*gamma)^2) cancels catastrophically for
u < 0 as gamma -> 0.  Their equality is itself one of the tested invariants.

At the boundary gamma = 0 the Legendre limit gives L(0, 0) = 0 and
L(0, u != 0) = +inf, so paths resting at zero are cost-free and paths leaving
zero at positive speed pay only an integrable log singularity.

``lagrangian_numeric`` is an independent check of the closed form: it
maximizes kappa*u - H by golden-section search and never touches the asinh
expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .chain import ModelParams
from .quadrature import NonIntegrableError, integrate
from .serialize import read_csv

__all__ = [
    "KAPPA_LIMIT",
    "BracketError",
    "ProbeFunction",
    "GridPath",
    "ClosedFormPath",
    "hamiltonian",
    "kappa_star",
    "lagrangian",
    "lagrangian_numeric",
    "prelimit_hamiltonian",
    "rate_functional",
    "rate_functional_report",
    "fenchel_hamiltonian",
]

#: |kappa| beyond which e^kappa overflows double precision.
KAPPA_LIMIT = 700.0

# Grid nodes this close to zero trigger quadrature pre-splitting.
_SINGULAR_VALUE = 1e-6


class BracketError(RuntimeError):
    """The 1-d maximizer left its analytic bracket; indicates a bug, not a
    domain problem."""


def hamiltonian(gamma: float, kappa: float, lam: float) -> float:
    """H(gamma, kappa); non-negative, zero iff kappa = 0 or gamma = 0."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if abs(kappa) > KAPPA_LIMIT:
        raise ValueError(f"|kappa| > {KAPPA_LIMIT} would overflow, got {kappa}")
    return lam * gamma * (math.expm1(kappa) + math.expm1(-kappa))


def kappa_star(gamma: float, u: float, lam: float) -> float:
    """The maximizer of kappa*u - H(gamma, kappa): asinh(u / (2*lam*gamma))."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0.0:
        if u == 0.0:
            return 0.0
        raise ValueError("kappa_star diverges at gamma=0 with u != 0 (the supremum is +inf)")
    return math.asinh(u / (2.0 * lam * gamma))


def lagrangian(gamma: float, u: float, lam: float) -> float:
    """Closed-form L(gamma, u); returns +inf at gamma=0 with u != 0."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0.0:
        return 0.0 if u == 0.0 else math.inf
    a = 2.0 * lam * gamma
    return u * math.asinh(u / a) + a - math.hypot(u, a)


def lagrangian_numeric(gamma: float, u: float, lam: float, tol: float = 1e-12) -> float:
    """sup_kappa (kappa*u - H) by golden-section search; independent of the
    closed form.  The maximizer satisfies |kappa*| <= asinh(|u|/(2*lam*gamma)),
    so the bracket pads that bound by 2."""
    if not gamma > 0.0:
        raise ValueError("lagrangian_numeric requires gamma > 0")
    bracket = math.asinh(abs(u) / (2.0 * lam * gamma)) + 2.0

    def objective(kappa: float) -> float:
        return kappa * u - hamiltonian(gamma, kappa, lam)

    kappa_hat, value = _golden_max(objective, -bracket, bracket, tol)
    if abs(kappa_hat) > bracket - 1.0:
        raise BracketError(
            f"maximizer {kappa_hat} escaped the bracket [-{bracket}, {bracket}]")
    return value


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f: Callable[[float], float], lo: float, hi: float,
                tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def fenchel_hamiltonian(gamma: float, kappa: float, lam: float, tol: float = 1e-10) -> float:
    """Recover H(gamma, kappa) as sup_u (kappa*u - L(gamma, u)), numerically.

    The inverse Fenchel transform; the optimal u is 2*lam*gamma*sinh(kappa),
    which fixes the search bracket.
    """
    if not gamma > 0.0:
        raise ValueError("fenchel_hamiltonian requires gamma > 0")
    u_star = 2.0 * lam * gamma * math.sinh(kappa)
    bracket = abs(u_star) + 1.0

    def objective(u: float) -> float:
        return kappa * u - lagrangian(gamma, u, lam)

    _, value = _golden_max(objective, -bracket, bracket, tol)
    return value


@dataclass(frozen=True)
class ProbeFunction:
    """A C^1 probe f on [0, 1] with its derivative; the flag asserts f'(1)=0
    (the probe class under which the prelimit generator converges)."""

    fn: Callable[[float], float]
    deriv: Callable[[float], float]
    zero_derivative_at_one: bool = False

    def __post_init__(self):
        if self.zero_derivative_at_one and abs(self.deriv(1.0)) > 1e-12:
            raise ValueError("flag asserts f'(1) = 0 but the derivative there is "
                             f"{self.deriv(1.0)!r}")


def prelimit_hamiltonian(f: ProbeFunction, params: ModelParams, gamma: float) -> float:
    """The finite-N nonlinear generator applied to f at a lattice point
    gamma = j/N:

        lam*gamma*(e^{N(f(gamma+1/N)-f(gamma))} - 1)   for j < N
      + lam*gamma*(e^{N(f(gamma-1/N)-f(gamma))} - 1)   for j > 1

    At j = 1 only the up term survives (prefactor lam/N) and at j = N only
    the down term (prefactor lam), exactly as the generator dictates.
    """
    n = params.n_states
    j = round(gamma * n)
    if not 1 <= j <= n or abs(gamma * n - j) > 1e-6:
        raise ValueError(f"gamma={gamma} is not a lattice point j/N for N={n}")
    x = j / n
    f_here = f.fn(x)
    prefactor = params.lam * x
    total = 0.0
    if j < n:
        total += prefactor * _expm1_guarded(n * (f.fn((j + 1) / n) - f_here))
    if j > 1:
        total += prefactor * _expm1_guarded(n * (f.fn((j - 1) / n) - f_here))
    return total


def _expm1_guarded(exponent: float) -> float:
    if abs(exponent) > KAPPA_LIMIT:
        raise ValueError(f"probe increment N*df = {exponent} would overflow")
    return math.expm1(exponent)


@runtime_checkable
class ClosedFormPath(Protocol):
    """Anything that can evaluate a path and its time derivative exactly."""

    def value(self, t: float) -> float: ...

    def derivative(self, t: float) -> float: ...


@dataclass(frozen=True)
class GridPath:
    """A smooth candidate path sampled on a time grid, with derivative values
    and optionally the closed form it was sampled from.

    When the closed form is present, integration uses it directly; otherwise
    the samples are interpolated with a cubic Hermite spline.  Derivatives
    omitted at construction are filled by central differences (one-sided at
    the ends), per the usual trade-off: analytic where possible, differencing
    only as a fallback.
    """

    times: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    descriptor: ClosedFormPath | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        derivs = np.asarray(self.derivatives, dtype=float)
        for name, arr in (("times", times), ("values", values), ("derivatives", derivs)):
            object.__setattr__(self, name, arr)
        if not (times.ndim == 1 and times.size >= 2):
            raise ValueError("need at least two grid points")
        if values.shape != times.shape or derivs.shape != times.shape:
            raise ValueError("times, values and derivatives must have equal shapes")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if float(values.min()) < -1e-12 or float(values.max()) > 1.0 + 1e-12:
            raise ValueError("path values must lie in [0, 1]")
        if self.descriptor is not None:
            sampled = np.array([self.descriptor.value(float(t)) for t in times])
            gap = float(np.abs(sampled - values).max())
            if gap > 1e-12:
                raise ValueError(f"grid values disagree with the closed form by {gap}")

    @property
    def horizon(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @classmethod
    def from_samples(cls, times, values, derivatives=None) -> "GridPath":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if derivatives is None:
            derivatives = np.gradient(values, times, edge_order=2)
        return cls(times, values, np.asarray(derivatives, dtype=float))

    @classmethod
    def from_descriptor(cls, descriptor: ClosedFormPath, t0: float, t1: float,
                        n_points: int = 1001) -> "GridPath":
        times = np.linspace(t0, t1, n_points)
        values = np.array([descriptor.value(float(t)) for t in times])
        derivs = np.array([descriptor.derivative(float(t)) for t in times])
        return cls(times, values, derivs, descriptor=descriptor)

    @classmethod
    def from_csv(cls, path) -> "GridPath":
        header, rows = read_csv(path)
        if header[:2] != ["t", "gamma"]:
            raise ValueError(f"expected columns t,gamma[,dgamma], got {header}")
        times = np.array([float(r[0]) for r in rows])
        values = np.array([float(r[1]) for r in rows])
        if len(header) >= 3 and header[2] == "dgamma":
            derivs = np.array([float(r[2]) for r in rows])
            return cls.from_samples(times, values, derivs)
        return cls.from_samples(times, values)


def rate_functional(path: GridPath, lam: float, tol: float = 1e-9) -> float:
    """The action I = int L(gamma(t), dgamma(t)) dt along the path.

    Adaptive quadrature to the given absolute tolerance, with pre-splitting
    next to grid nodes where gamma is within 1e-6 of zero (the integrand has
    an integrable log singularity where an admissible path touches zero).
    Returns +inf if the path sits at zero with nonzero velocity somewhere in
    the interior.
    """
    value, _, _ = _integrate_action(path, lam, tol)
    return value


def rate_functional_report(path: GridPath, lam: float, tol: float = 1e-9) -> dict:
    """Same as rate_functional but with the quadrature diagnostics attached."""
    value, err, n_intervals = _integrate_action(path, lam, tol)
    return {
        "I": value,
        "quadrature_error_estimate": err,
        "grid_size": int(path.times.size),
        "quadrature_intervals": n_intervals,
    }


def _integrate_action(path: GridPath, lam: float, tol: float) -> tuple[float, float, int]:
    if not (lam > 0.0 and math.isfinite(lam)):
        raise ValueError("lam must be positive and finite")
    t0, t1 = path.horizon
    interior = slice(1, -1)
    zero_moving = (path.values[interior] == 0.0) & (path.derivatives[interior] != 0.0)
    if bool(zero_moving.any()):
        return math.inf, math.inf, 0

    if path.descriptor is not None:
        gamma_of = path.descriptor.value
        dgamma_of = path.descriptor.derivative
    else:
        spline = CubicHermiteSpline(path.times, path.values, path.derivatives)
        dspline = spline.derivative()
        gamma_of = lambda t: float(spline(t))
        dgamma_of = lambda t: float(dspline(t))

    def integrand(t: float) -> float:
        g = gamma_of(t)
        g = 0.0 if g < 0.0 else (1.0 if g > 1.0 else g)  # clamp roundoff spill
        return lagrangian(g, dgamma_of(t), lam)

    split = [float(t) for t, v in zip(path.times, path.values)
             if v < _SINGULAR_VALUE and t0 < t < t1]
    # Give the adaptive scheme a head start next to singular endpoints.
    span = t1 - t0
    if path.values[0] < _SINGULAR_VALUE:
        split.append(t0 + 1e-6 * span)
    if path.values[-1] < _SINGULAR_VALUE:
        split.append(t1 - 1e-6 * span)
    try:
        result = integrate(integrand, t0, t1, abs_tol=tol, split_at=split)
    except NonIntegrableError:
        return math.inf, math.inf, 0
    return result.value, result.error_estimate, result.n_intervals
