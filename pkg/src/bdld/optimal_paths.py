"""Closed-form minimizers of the action between fixed endpoints.

For boundary data gamma(0) = g0, gamma(T) = gT the minimizing path is either
constant (equal endpoints) or the parabola

    gamma(t) = c2 * (lam*t - c1) * (lam*t - c1 + 1),      c2 > 0,

with the dual variable z(t) = e^kappa(t) = 1/(lam*t - c1) + 1.  The pair
solves the characteristic system

    dgamma/dt = lam*gamma*(z - 1/z)
    dkappa/dt = -lam*(z + 1/z - 2)

exactly, so the residual check below is pure round-off.  Five cases fix
(c1, c2): constant, start at zero, end at zero, and the two generic monotone
cases, where c1 solves a quadratic and the branch (smaller root for
increasing paths, larger for decreasing) is the one keeping the parabola's
vertex outside (0, T).  The branch choice is re-verified by an explicit
admissibility sweep instead of being trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ldp import GridPath, rate_functional
from .tilting import ClosedFormDualTilt, ConstantTilt

__all__ = [
    "PathCase",
    "ParabolaParams",
    "AdmissibilityError",
    "solve_boundary",
    "path_value",
    "path_derivative",
    "dual_value",
    "hamiltonian_residual",
    "optimal_action",
    "dual_tilt",
    "sample_rows",
]

_EQUAL_ENDPOINT_TOL = 1e-14


class PathCase(str, Enum):
    CONSTANT = "constant"
    FROM_ZERO = "from_zero"
    TO_ZERO = "to_zero"
    GENERAL_INCREASING = "general_increasing"
    GENERAL_DECREASING = "general_decreasing"


class AdmissibilityError(ValueError):
    """The solved parabola leaves [0, 1] inside the horizon."""


@dataclass(frozen=True)
class ParabolaParams:
    """The solved path: (c1, c2) and the case tag, plus the boundary data it
    was solved for.  For the constant case c1 = c2 = 0 and ``level`` holds the
    constant value."""

    c1: float
    c2: float
    case: PathCase
    lam: float
    horizon: float
    gamma0: float
    gammaT: float
    level: float | None = None

    def value(self, t: float) -> float:
        if self.case is PathCase.CONSTANT:
            return self.level
        x = self.lam * t - self.c1
        return self.c2 * x * (x + 1.0)

    def derivative(self, t: float) -> float:
        if self.case is PathCase.CONSTANT:
            return 0.0
        x = self.lam * t - self.c1
        return self.c2 * self.lam * (2.0 * x + 1.0)

    def dual(self, t: float) -> float:
        if self.case is PathCase.CONSTANT:
            return 1.0
        x = self.lam * t - self.c1
        if -1.0 <= x <= 0.0:
            raise ValueError(
                f"dual variable singular or non-positive at t={t}: lam*t - c1 = {x} in [-1, 0]")
        return 1.0 / x + 1.0

    def kappa_rate(self, t: float) -> float:
        """The analytic dkappa/dt = -lam / (x*(x+1)) with x = lam*t - c1."""
        if self.case is PathCase.CONSTANT:
            return 0.0
        x = self.lam * t - self.c1
        return -self.lam / (x * (x + 1.0))

    def to_json_obj(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "case": self.case.value,
            "lambda": self.lam,
            "T": self.horizon,
            "gamma0": self.gamma0,
            "gammaT": self.gammaT,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ParabolaParams":
        case = PathCase(obj["case"])
        level = obj["gamma0"] if case is PathCase.CONSTANT else None
        return cls(c1=float(obj["c1"]), c2=float(obj["c2"]), case=case,
                   lam=float(obj["lambda"]), horizon=float(obj["T"]),
                   gamma0=float(obj["gamma0"]), gammaT=float(obj["gammaT"]),
                   level=level)


def solve_boundary(gamma0: float, gammaT: float, T: float, lam: float) -> ParabolaParams:
    """Solve the boundary-value problem for the minimizing path."""
    if not (T > 0.0 and math.isfinite(T)):
        raise ValueError(f"T must be positive, got {T!r}")
    if not (lam > 0.0 and math.isfinite(lam)):
        raise ValueError(f"lam must be positive, got {lam!r}")
    for name, g in (("gamma0", gamma0), ("gammaT", gammaT)):
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {g}")

    if abs(gamma0 - gammaT) <= _EQUAL_ENDPOINT_TOL:
        params = ParabolaParams(0.0, 0.0, PathCase.CONSTANT, lam, T,
                                gamma0, gammaT, level=gamma0)
        return params

    lt = lam * T
    if gamma0 == 0.0:
        params = ParabolaParams(0.0, gammaT / (lt * (lt + 1.0)), PathCase.FROM_ZERO,
                                lam, T, gamma0, gammaT)
    elif gammaT == 0.0:
        params = ParabolaParams(lt + 1.0, gamma0 / (lt * (lt + 1.0)), PathCase.TO_ZERO,
                                lam, T, gamma0, gammaT)
    else:
        increasing = gammaT > gamma0
        delta = gammaT - gamma0
        b = 2.0 * lt * gamma0 / delta - 1.0
        c = -lt * (lt + 1.0) * gamma0 / delta
        disc = b * b - 4.0 * c
        if disc < 0.0:
            raise AdmissibilityError(
                f"no real parabola for gamma0={gamma0}, gammaT={gammaT}, T={T}, lam={lam}")
        # Stable quadratic: q and c/q are the two roots of x^2 + b x + c.
        s = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(s, b)) if b != 0.0 else -0.5 * s
        roots = (q, c / q) if q != 0.0 else (0.0, 0.0)
        c1 = min(roots) if increasing else max(roots)
        c2 = gamma0 / (c1 * (c1 - 1.0))
        case = PathCase.GENERAL_INCREASING if increasing else PathCase.GENERAL_DECREASING
        params = ParabolaParams(c1, c2, case, lam, T, gamma0, gammaT)

    _verify_admissible(params)
    return params


def _verify_admissible(params: ParabolaParams, grid_size: int = 1000) -> None:
    ts = np.linspace(0.0, params.horizon, grid_size + 1)
    for t in ts:
        g = params.value(float(t))
        if g < -1e-12 or g > 1.0 + 1e-12:
            raise AdmissibilityError(
                f"solved path leaves [0, 1]: gamma({float(t)}) = {g} "
                f"(gamma0={params.gamma0}, gammaT={params.gammaT})")
    if abs(params.value(0.0) - params.gamma0) > 1e-12:
        raise AdmissibilityError(f"gamma(0) misses gamma0 by "
                                 f"{params.value(0.0) - params.gamma0}")
    if abs(params.value(params.horizon) - params.gammaT) > 1e-10:
        raise AdmissibilityError(f"gamma(T) misses gammaT by "
                                 f"{params.value(params.horizon) - params.gammaT}")


def _check_time(params: ParabolaParams, t: float) -> None:
    if not -1e-12 <= t <= params.horizon + 1e-12:
        raise ValueError(f"t={t} outside [0, {params.horizon}]")


def path_value(params: ParabolaParams, t: float) -> float:
    _check_time(params, t)
    return params.value(t)


def path_derivative(params: ParabolaParams, t: float) -> float:
    _check_time(params, t)
    return params.derivative(t)


def dual_value(params: ParabolaParams, t: float) -> float:
    """z(t) = e^kappa(t); always > 0 for admissible params, errors where the
    closed form is singular (a path touching zero at an endpoint)."""
    _check_time(params, t)
    return params.dual(t)


def hamiltonian_residual(params: ParabolaParams, grid_size: int = 1000) -> tuple[float, float]:
    """Max absolute residuals of the two characteristic equations on an
    interior grid (endpoints excluded: that is where paths may touch zero and
    the dual becomes singular)."""
    if params.case is PathCase.CONSTANT:
        return 0.0, 0.0
    lam, T = params.lam, params.horizon
    worst_gamma = 0.0
    worst_kappa = 0.0
    for i in range(1, grid_size + 1):
        t = T * i / (grid_size + 1)
        z = params.dual(t)
        r_gamma = abs(params.derivative(t) - lam * params.value(t) * (z - 1.0 / z))
        r_kappa = abs(params.kappa_rate(t) + lam * (z + 1.0 / z - 2.0))
        worst_gamma = max(worst_gamma, r_gamma)
        worst_kappa = max(worst_kappa, r_kappa)
    return worst_gamma, worst_kappa


def optimal_action(gamma0: float, gammaT: float, T: float, lam: float,
                   tol: float = 1e-9) -> float:
    """Action of the solved path; zero iff the endpoints coincide."""
    params = solve_boundary(gamma0, gammaT, T, lam)
    path = GridPath.from_descriptor(params, 0.0, T, n_points=1001)
    return rate_functional(path, lam, tol=tol)


def dual_tilt(params: ParabolaParams):
    """The sampling tilt z(t) matching the solved path.

    Only defined when z is positive and finite on the whole horizon, which
    rules out the cases touching zero (their dual blows up or vanishes at an
    endpoint).
    """
    if params.case is PathCase.CONSTANT:
        return ConstantTilt(1.0)
    tilt = ClosedFormDualTilt(c1=params.c1, lam=params.lam)
    tilt.validate_horizon(params.horizon)
    return tilt


def sample_rows(params: ParabolaParams, n_points: int = 201) -> list[tuple]:
    """Rows (t, gamma, z, kappa) for plotting; z and kappa are NaN where the
    dual is singular (endpoints of paths touching zero)."""
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    rows = []
    for i in range(n_points):
        t = params.horizon * i / (n_points - 1)
        g = params.value(t)
        try:
            z = params.dual(t)
            kappa = math.log(z)
        except ValueError:
            z = math.nan
            kappa = math.nan
        rows.append((t, g, z, kappa))
    return rows
