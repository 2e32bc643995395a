"""Exact finite-N transition probabilities by uniformization.

The generator is tridiagonal, so the law of X(t) is computed as a Poisson
mixture of powers of the uniformized kernel K = I + Q/Lam with Lam = 2*lam*N.
Each kernel-vector product costs O(N) and the Poisson truncation error is
certified, which makes this the brute-force oracle that every Monte Carlo
estimate and every large-deviation rate in the package is checked against.

Probabilities are carried in linear space; window queries fall back to a
log-space product chain when the linear mass underflows.  The oracle is
practical up to roughly N = 5000 (seconds per evaluation); larger N is
Monte Carlo territory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import poisson

from .chain import ModelParams, ProbabilityVector, jump_rates, stationary_distribution

__all__ = [
    "GeneratorMatrix",
    "endpoint_distribution",
    "evolve_distribution",
    "window_probability",
    "window_log_probability",
    "empirical_rate_curve",
    "RatePoint",
    "stationary_dwell_probability",
]

# Below this linear window mass the log-space chain takes over.
_LOG_SPACE_THRESHOLD = 1e-280


@dataclass(frozen=True)
class GeneratorMatrix:
    """Tridiagonal generator: off-diagonals from the jump rates, diagonal
    balancing each row to zero."""

    up: np.ndarray
    down: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        up = np.asarray(self.up, dtype=float)
        down = np.asarray(self.down, dtype=float)
        diag = np.asarray(self.diag, dtype=float)
        if not (up.shape == down.shape == diag.shape) or up.ndim != 1:
            raise ValueError("up/down/diag must be one-dimensional arrays of equal length")
        if np.any(up < 0.0) or np.any(down < 0.0):
            raise ValueError("off-diagonal rates must be non-negative")
        if float(np.abs(up + down + diag).max()) > 1e-14 * max(1.0, float(np.abs(diag).max())):
            raise ValueError("generator rows must sum to zero within 1e-14")
        for name, arr in (("up", up), ("down", down), ("diag", diag)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_params(cls, params: ModelParams) -> "GeneratorMatrix":
        n = params.n_states
        up = np.empty(n)
        down = np.empty(n)
        for m in range(1, n + 1):
            up[m - 1], down[m - 1] = jump_rates(params, m)
        return cls(up=up, down=down, diag=-(up + down))

    @property
    def dimension(self) -> int:
        return self.diag.size


class _UniformizedKernel(NamedTuple):
    up: np.ndarray    # K(m, m+1), entry m-1
    down: np.ndarray  # K(m, m-1), entry m-1
    stay: np.ndarray  # K(m, m)
    rate: float       # the uniformization rate Lam


def _uniformized_kernel(params: ModelParams) -> _UniformizedKernel:
    gen = GeneratorMatrix.from_params(params)
    lam_unif = 2.0 * params.lam * params.n_states
    up = gen.up / lam_unif
    down = gen.down / lam_unif
    stay = 1.0 + gen.diag / lam_unif
    return _UniformizedKernel(up, down, stay, lam_unif)


def _kernel_apply(p: np.ndarray, kern: _UniformizedKernel) -> np.ndarray:
    """One step of the distribution under the uniformized kernel (p <- p K)."""
    q = p * kern.stay
    q[1:] += p[:-1] * kern.up[:-1]
    q[:-1] += p[1:] * kern.down[1:]
    return q


def _poisson_k_max(mu: float, tol: float) -> int:
    """Smallest-ish K with the omitted Poisson(mu) tail mass below tol/2."""
    if mu == 0.0:
        return 0
    k_max = int(poisson.ppf(1.0 - 0.5 * tol, mu)) + 1
    while poisson.sf(k_max, mu) > 0.5 * tol:
        k_max += max(4, int(0.05 * k_max))
    return k_max


def _poisson_terms(mu: float, tol: float) -> np.ndarray:
    if mu == 0.0:
        return np.ones(1)
    return poisson.pmf(np.arange(_poisson_k_max(mu, tol) + 1), mu)


def _check_time_tol(t: float, tol: float) -> None:
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError(f"time must be finite and >= 0, got {t!r}")
    if not (0.0 < tol <= 1e-6):
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol!r}")


def evolve_distribution(params: ModelParams, dist, t: float, tol: float = 1e-12) -> ProbabilityVector:
    """Forward-evolve an initial distribution by time t."""
    _check_time_tol(t, tol)
    p = dist.mass if isinstance(dist, ProbabilityVector) else np.asarray(dist, dtype=float)
    if p.size != params.n_states:
        raise ValueError("distribution dimension does not match n_states")
    kern = _uniformized_kernel(params)
    weights = _poisson_terms(kern.rate * t, tol)
    acc = weights[0] * p
    for w in weights[1:]:
        p = _kernel_apply(p, kern)
        acc += w * p
    acc /= acc.sum()
    return ProbabilityVector(acc)


def endpoint_distribution(params: ModelParams, m0: int, t: float, tol: float = 1e-12) -> ProbabilityVector:
    """Law of X(t) given X(0) = m0, to certified truncation error below tol."""
    if not 1 <= m0 <= params.n_states:
        raise ValueError(f"m0={m0} outside the state space 1..{params.n_states}")
    point = np.zeros(params.n_states)
    point[m0 - 1] = 1.0
    return evolve_distribution(params, point, t, tol)


def _normalize_window(params: ModelParams, window) -> np.ndarray:
    states = np.asarray(sorted(set(int(m) for m in window)), dtype=int)
    if states.size == 0:
        raise ValueError("window must be a non-empty set of states")
    if states[0] < 1 or states[-1] > params.n_states:
        raise ValueError(f"window {states[0]}..{states[-1]} outside 1..{params.n_states}")
    return states


def window_probability(params: ModelParams, m0: int, t: float, window, tol: float = 1e-12) -> float:
    """P(X(t) in window | X(0) = m0), summed from the endpoint distribution."""
    states = _normalize_window(params, window)
    dist = endpoint_distribution(params, m0, t, tol)
    prob = float(dist.mass[states - 1].sum())
    if prob == 0.0:
        raise ValueError(
            "window probability underflowed to zero in linear space; "
            "use window_log_probability")
    return prob


def window_log_probability(params: ModelParams, m0: int, t: float, window, tol: float = 1e-12) -> float:
    """ln P(X(t) in window | X(0) = m0); switches to a log-space product chain
    when the linear-space mass underflows."""
    states = _normalize_window(params, window)
    dist = endpoint_distribution(params, m0, t, tol)
    prob = float(dist.mass[states - 1].sum())
    if prob >= _LOG_SPACE_THRESHOLD:
        return math.log(prob)
    return _log_space_window(params, m0, t, states, tol)


def _log_space_window(params: ModelParams, m0: int, t: float, states: np.ndarray, tol: float) -> float:
    """ln of the window mass via a log-space uniformization chain.

    The truncation is adaptive: unlike the bulk computation, a deep-tail
    window draws its entire mass from Poisson orders far beyond the usual
    cutoff (the chain must make at least distance-many jumps), so the sum
    keeps extending until the remaining Poisson tail provably cannot change
    the accumulated window mass by a relative tol.
    """
    _check_time_tol(t, tol)
    kern = _uniformized_kernel(params)
    mu = kern.rate * t
    n = params.n_states
    with np.errstate(divide="ignore"):
        l_up = np.log(kern.up)
        l_down = np.log(kern.down)
        l_stay = np.log(kern.stay)
    lp = np.full(n, -np.inf)
    lp[m0 - 1] = 0.0
    idx = states - 1
    log_pmf = -mu  # ln pmf(0)
    log_acc = log_pmf + lp
    log_mu = math.log(mu) if mu > 0.0 else -math.inf
    log_rel = math.log(0.5 * tol)
    k = 0
    k_cap = int(mu + 10.0 * math.sqrt(mu + 1.0)) + 6 * n + 1000
    while True:
        window_acc = float(logsumexp(log_acc[idx]))
        log_tail = float(poisson.logsf(k, mu))  # every remaining term's window mass <= its pmf
        if log_tail <= window_acc + log_rel or log_tail == -math.inf:
            return window_acc
        if k >= k_cap:
            raise ArithmeticError(
                f"log-space uniformization did not converge within {k_cap} terms "
                f"(window mass so far exp({window_acc}))")
        k += 1
        log_pmf += log_mu - math.log(k)
        nxt = lp + l_stay
        shift_up = np.full_like(lp, -np.inf)
        shift_up[1:] = lp[:-1] + l_up[:-1]
        shift_down = np.full_like(lp, -np.inf)
        shift_down[:-1] = lp[1:] + l_down[1:]
        lp = np.logaddexp(np.logaddexp(nxt, shift_up), shift_down)
        log_acc = np.logaddexp(log_acc, log_pmf + lp)


class RatePoint(NamedTuple):
    n: int
    rate: float        # a_N = -(1/N) ln P(window)
    window_prob: float


def empirical_rate_curve(params_list: Sequence[ModelParams], gamma0: float, gammaT: float,
                         T: float, half_width: float, tol: float = 1e-12) -> list[RatePoint]:
    """Finite-N decay rates a_N = -(1/N) ln P(X(T)/N near gammaT | X(0)/N = gamma0).

    The window is the lattice interval round((gammaT - h)N)..round((gammaT + h)N).
    The returned curve is what gets compared against the optimal action.
    """
    if not (0.0 < gamma0 < 1.0 and 0.0 < gammaT < 1.0):
        raise ValueError("gamma0 and gammaT must lie in (0, 1)")
    if not (half_width > 0.0 and T > 0.0):
        raise ValueError("half_width and T must be positive")
    points = []
    for params in params_list:
        n = params.n_states
        m0 = round(gamma0 * n)
        lo = max(1, round((gammaT - half_width) * n))
        hi = min(n, round((gammaT + half_width) * n))
        if lo > hi:
            raise ValueError(f"empty window at N={n}")
        logp = window_log_probability(params, m0, T, range(lo, hi + 1), tol)
        points.append(RatePoint(n, -logp / n, math.exp(logp)))
    return points


def stationary_dwell_probability(params: ModelParams, u: float, times: Sequence[float],
                                 tol: float = 1e-12) -> float:
    """P(X(t_i)/N < u for every sample time t_i), starting from stationarity.

    Exact via masked forward evolution: evolve, zero out the states at or
    above the threshold, repeat; the surviving mass is the joint probability.
    """
    times = sorted(float(t) for t in times)
    if not times:
        raise ValueError("times must be non-empty")
    if times[0] < 0.0:
        raise ValueError("times must be >= 0")
    if not 0.0 < u <= 1.0:
        raise ValueError(f"threshold u must lie in (0, 1], got {u}")
    n = params.n_states
    allowed = np.array([(m / n) < u for m in range(1, n + 1)])
    p = stationary_distribution(params).mass.copy()
    prev = 0.0
    for t in times:
        total = float(p.sum())
        if total == 0.0:
            return 0.0
        if t > prev:
            p = evolve_distribution(params, p / total, t - prev, tol).mass * total
        p = np.where(allowed, p, 0.0)
        prev = t
    return float(p.sum())
