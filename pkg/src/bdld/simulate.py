"""Exact event-driven simulation of the chain and its scaled version X/N.

Sampling is Gillespie-style: at state m draw an Exponential holding time at
the total exit rate, then pick the direction proportionally to the up/down
rates.  Nothing is time-discretized and trajectories are stored sparsely
(jump times plus visited states only).

Randomness comes from counter-based Philox streams keyed by
(seed, replication index), so replications are reproducible independently of
execution order.  Every jump event consumes exactly one exponential and one
uniform variate from its stream; a stationary start consumes one extra
uniform up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import ModelParams, ProbabilityVector, stationary_distribution
from .serialize import write_csv

__all__ = [
    "Trajectory",
    "ScaledTrajectory",
    "SimConfig",
    "WeightedTrajectory",
    "ExperimentResult",
    "replication_rng",
    "sample_path",
    "scaled_path",
    "occupation_fractions",
    "lln_point_experiment",
    "lln_stationary_experiment",
    "tilted_sample_path",
    "tilted_window_experiment",
]

_BLOCK = 8192


def replication_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Philox stream keyed by (seed, replication)."""
    key = np.array([np.uint64(seed % (1 << 64)), np.uint64(replication)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Trajectory:
    """A piecewise-constant sample path: the state entered at time 0 plus the
    (time, new state) record of every jump up to the horizon."""

    initial_state: int
    jump_times: np.ndarray
    states_after_jump: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.jump_times, dtype=float)
        states = np.asarray(self.states_after_jump, dtype=np.int64)
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "states_after_jump", states)
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if times.shape != states.shape or times.ndim != 1:
            raise ValueError("jump_times and states_after_jump must be 1-d arrays of equal length")
        if times.size:
            if times[0] <= 0.0 or times[-1] > self.horizon or np.any(np.diff(times) <= 0.0):
                raise ValueError("jump times must be strictly increasing within (0, horizon]")
            visited = np.concatenate(([self.initial_state], states))
            if np.any(np.abs(np.diff(visited)) != 1):
                raise ValueError("consecutive states must differ by exactly 1")

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size

    def visited_states(self) -> np.ndarray:
        return np.concatenate(([self.initial_state], self.states_after_jump))

    def state_at(self, t: float) -> int:
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        idx = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.initial_state if idx == 0 else int(self.states_after_jump[idx - 1])

    def to_csv(self, path) -> None:
        rows = [(0.0, self.initial_state)]
        rows.extend((float(t), int(s)) for t, s in zip(self.jump_times, self.states_after_jump))
        write_csv(path, ["time", "state"], rows)


@dataclass(frozen=True)
class ScaledTrajectory:
    """The same path divided by N, living on {1/N, ..., 1}."""

    initial_value: float
    jump_times: np.ndarray
    values_after_jump: np.ndarray
    horizon: float
    n_states: int


@dataclass(frozen=True)
class SimConfig:
    """Horizon, RNG seed, initial condition and replication count.

    ``initial`` is either a 1-based state index (point start) or the string
    "stationary" for an exact inverse-CDF draw from the stationary law.
    """

    horizon: float
    seed: int
    initial: int | str = "stationary"
    replications: int = 1

    def __post_init__(self):
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon!r}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValueError("seed must be an integer")
        if not (isinstance(self.replications, (int, np.integer)) and self.replications >= 1):
            raise ValueError("replications must be >= 1")
        if isinstance(self.initial, str):
            if self.initial != "stationary":
                raise ValueError(f'initial must be a state index or "stationary", got {self.initial!r}')
        elif not isinstance(self.initial, (int, np.integer)) or isinstance(self.initial, bool):
            raise ValueError(f"initial must be a state index or \"stationary\", got {self.initial!r}")


@dataclass(frozen=True)
class WeightedTrajectory:
    """A trajectory sampled under a tilted law together with the log
    Radon-Nikodym weight of the nominal law against the tilted one."""

    trajectory: Trajectory
    log_weight: float

    def __post_init__(self):
        if not math.isfinite(self.log_weight):
            raise ValueError(f"log_weight must be finite, got {self.log_weight!r}")


@dataclass(frozen=True)
class ExperimentResult:
    estimate: float
    stderr: float
    replications: int
    seed: int
    params: ModelParams
    extra: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        obj = {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "replications": self.replications,
            "seed": self.seed,
            "params": {"n_states": self.params.n_states, "lambda": self.params.lam},
        }
        obj.update(self.extra)
        return obj


def _resolve_initial(params: ModelParams, config: SimConfig, rng: np.random.Generator) -> int:
    if config.initial == "stationary":
        return stationary_distribution(params).sample_state(rng.random())
    m0 = int(config.initial)
    if not 1 <= m0 <= params.n_states:
        raise ValueError(f"initial state {m0} outside 1..{params.n_states}")
    return m0


def sample_path(params: ModelParams, config: SimConfig, replication: int = 0) -> Trajectory:
    """Draw one exact trajectory on [0, horizon]."""
    rng = replication_rng(config.seed, replication)
    m0 = _resolve_initial(params, config, rng)
    n, lam, horizon = params.n_states, params.lam, config.horizon
    times: list[float] = []
    states: list[int] = []
    if n > 1:
        two_lam = 2.0 * lam
        lam_top = lam * n
        exps = rng.standard_exponential(_BLOCK).tolist()
        unis = rng.random(_BLOCK).tolist()
        idx = 0
        m = m0
        t = 0.0
        while True:
            rate = two_lam * m if 1 < m < n else (lam if m == 1 else lam_top)
            t += exps[idx] / rate
            if t >= horizon:
                break
            u = unis[idx]
            idx += 1
            if m == 1:
                m = 2
            elif m == n:
                m = n - 1
            else:
                m = m + 1 if u < 0.5 else m - 1
            times.append(t)
            states.append(m)
            if idx == _BLOCK:
                exps = rng.standard_exponential(_BLOCK).tolist()
                unis = rng.random(_BLOCK).tolist()
                idx = 0
    return Trajectory(m0, np.array(times), np.array(states, dtype=np.int64), horizon)


def scaled_path(trajectory: Trajectory, params: ModelParams) -> ScaledTrajectory:
    """Divide the states by N; purely representational."""
    n = params.n_states
    return ScaledTrajectory(
        initial_value=trajectory.initial_state / n,
        jump_times=trajectory.jump_times,
        values_after_jump=trajectory.states_after_jump / n,
        horizon=trajectory.horizon,
        n_states=n,
    )


def occupation_fractions(trajectory: Trajectory, n_states: int | None = None) -> ProbabilityVector:
    """Fraction of the horizon spent in each state."""
    top = int(trajectory.visited_states().max())
    if n_states is None:
        n_states = top
    elif n_states < top:
        raise ValueError(f"n_states={n_states} below the highest visited state {top}")
    edges = np.concatenate(([0.0], trajectory.jump_times, [trajectory.horizon]))
    durations = np.diff(edges)
    acc = np.zeros(n_states)
    np.add.at(acc, trajectory.visited_states() - 1, durations)
    return ProbabilityVector(acc / acc.sum())


def lln_point_experiment(params: ModelParams, gamma0: float, epsilon: float,
                         config: SimConfig) -> ExperimentResult:
    """Monte Carlo estimate of P(sup_{t<=T} |X(t)/N - gamma0| >= epsilon) from
    the point start round(gamma0*N).

    The config's ``initial`` field is ignored: this experiment's start is
    fixed by gamma0.  The theoretical bound T/(epsilon^2 N) rides along in the
    result's extra fields.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    n, lam, horizon = params.n_states, params.lam, config.horizon
    m0 = round(gamma0 * n)
    if not 1 <= m0 <= n:
        raise ValueError(f"round(gamma0*N)={m0} outside the state space")
    # Hit iff m <= lo or m >= hi (1e-9 grid snap: states are integers, so only
    # degenerate float ties are affected).
    lo = math.floor(n * (gamma0 - epsilon) + 1e-9)
    hi = math.ceil(n * (gamma0 + epsilon) - 1e-9)
    reps = config.replications
    bound = horizon / (epsilon * epsilon * n)
    if lo < 1 and hi > n and not (m0 <= lo or m0 >= hi):
        return ExperimentResult(0.0, 0.0, reps, config.seed, params,
                                extra={"bound": bound, "hits": 0})
    hits = 0
    for rep in range(reps):
        rng = replication_rng(config.seed, rep)
        if _sup_hit(n, lam, m0, horizon, lo, hi, rng):
            hits += 1
    p = hits / reps
    stderr = math.sqrt(p * (1.0 - p) / reps)
    return ExperimentResult(p, stderr, reps, config.seed, params,
                            extra={"bound": bound, "hits": hits})


def _sup_hit(n: int, lam: float, m0: int, horizon: float,
             lo: int, hi: int, rng: np.random.Generator) -> bool:
    if m0 <= lo or m0 >= hi:
        return True
    if n == 1:
        return False
    two_lam = 2.0 * lam
    lam_top = lam * n
    exps = rng.standard_exponential(_BLOCK).tolist()
    unis = rng.random(_BLOCK).tolist()
    idx = 0
    m = m0
    t = 0.0
    while True:
        rate = two_lam * m if 1 < m < n else (lam if m == 1 else lam_top)
        t += exps[idx] / rate
        if t >= horizon:
            return False
        u = unis[idx]
        idx += 1
        if m == 1:
            m = 2
        elif m == n:
            m = n - 1
        else:
            m = m + 1 if u < 0.5 else m - 1
        if m <= lo or m >= hi:
            return True
        if idx == _BLOCK:
            exps = rng.standard_exponential(_BLOCK).tolist()
            unis = rng.random(_BLOCK).tolist()
            idx = 0


def lln_stationary_experiment(params: ModelParams, u: float, sample_times,
                              config: SimConfig) -> ExperimentResult:
    """Monte Carlo estimate of P(X(t_i)/N < u for every sample time) with the
    chain started from its stationary law."""
    if config.initial != "stationary":
        raise ValueError("lln_stationary_experiment requires a stationary initial condition")
    if not 0.0 < u <= 1.0:
        raise ValueError(f"threshold u must lie in (0, 1], got {u}")
    times = sorted(float(t) for t in sample_times)
    if not times:
        raise ValueError("sample_times must be non-empty")
    if times[0] < 0.0 or times[-1] > config.horizon:
        raise ValueError("sample times must lie within [0, horizon]")
    n, lam = params.n_states, params.lam
    cumulative = stationary_distribution(params).cumulative()
    reps = config.replications
    successes = 0
    for rep in range(reps):
        rng = replication_rng(config.seed, rep)
        m0 = min(int(np.searchsorted(cumulative, rng.random(), side="right")), n - 1) + 1
        if _all_below(n, lam, m0, u, times, rng):
            successes += 1
    p = successes / reps
    stderr = math.sqrt(p * (1.0 - p) / reps)
    return ExperimentResult(p, stderr, reps, config.seed, params,
                            extra={"threshold": u, "sample_times": times})


def _all_below(n: int, lam: float, m0: int, u: float, times: list[float],
               rng: np.random.Generator) -> bool:
    two_lam = 2.0 * lam
    lam_top = lam * n
    exps = rng.standard_exponential(_BLOCK).tolist()
    unis = rng.random(_BLOCK).tolist()
    idx = 0
    m = m0
    t = 0.0
    ptr = 0
    n_times = len(times)
    while True:
        if n > 1:
            rate = two_lam * m if 1 < m < n else (lam if m == 1 else lam_top)
            t_next = t + exps[idx] / rate
        else:
            t_next = math.inf
        while ptr < n_times and times[ptr] < t_next:
            if not (m / n) < u:
                return False
            ptr += 1
        if ptr == n_times:
            return True
        t = t_next
        u_draw = unis[idx]
        idx += 1
        if m == 1:
            m = 2
        elif m == n:
            m = n - 1
        else:
            m = m + 1 if u_draw < 0.5 else m - 1
        if idx == _BLOCK:
            exps = rng.standard_exponential(_BLOCK).tolist()
            unis = rng.random(_BLOCK).tolist()
            idx = 0


def tilted_sample_path(params: ModelParams, tilt, config: SimConfig,
                       replication: int = 0) -> WeightedTrajectory:
    """Sample under the tilted dynamics up' = lam*m*z(t), down' = lam*m/z(t)
    (one-sided at the ends) and accumulate the exact log-likelihood ratio of
    nominal against tilted dynamics.

    Sampling uses thinning against the majorant rate (up+down)*sup(z, 1/z),
    which stays exact for any positive piecewise-continuous schedule.  The
    weight is jump terms plus the compensator integrals supplied by the
    schedule, so E_tilted[exp(log_weight); A] = P_nominal(A).
    """
    horizon = config.horizon
    zbar = tilt.sup_bound(horizon)
    if not (math.isfinite(zbar) and zbar >= 1.0):
        raise ValueError(f"tilt bound must be finite and >= 1, got {zbar!r}")
    rng = replication_rng(config.seed, replication)
    m0 = _resolve_initial(params, config, rng)
    n, lam = params.n_states, params.lam
    times: list[float] = []
    states: list[int] = []
    log_w = 0.0
    m = m0
    t = 0.0
    seg_start = 0.0
    exps = rng.standard_exponential(_BLOCK).tolist()
    unis = rng.random(_BLOCK).tolist()
    idx = 0
    while True:
        up_nom = lam * m if m < n else 0.0
        down_nom = lam * m if m > 1 else 0.0
        r_major = (up_nom + down_nom) * zbar
        if r_major == 0.0:
            break
        t += exps[idx] / r_major
        if t >= horizon:
            break
        u = unis[idx]
        idx += 1
        z = tilt.value(t)
        p_up = up_nom * z / r_major
        p_down = down_nom / z / r_major
        if u < p_up + p_down:
            log_w += (up_nom * tilt.up_excess_integral(seg_start, t)
                      + down_nom * tilt.down_excess_integral(seg_start, t))
            seg_start = t
            if u < p_up:
                log_w -= math.log(z)
                m += 1
            else:
                log_w += math.log(z)
                m -= 1
            times.append(t)
            states.append(m)
        # else: thinning ghost, state unchanged
        if idx == _BLOCK:
            exps = rng.standard_exponential(_BLOCK).tolist()
            unis = rng.random(_BLOCK).tolist()
            idx = 0
    up_nom = lam * m if m < n else 0.0
    down_nom = lam * m if m > 1 else 0.0
    log_w += (up_nom * tilt.up_excess_integral(seg_start, horizon)
              + down_nom * tilt.down_excess_integral(seg_start, horizon))
    trajectory = Trajectory(m0, np.array(times), np.array(states, dtype=np.int64), horizon)
    return WeightedTrajectory(trajectory, log_w)


def tilted_window_experiment(params: ModelParams, tilt, window: tuple[int, int],
                             config: SimConfig) -> ExperimentResult:
    """Importance-sampling estimate of P(X(horizon) in [window]) under the
    nominal law, using the tilted sampler."""
    lo, hi = int(window[0]), int(window[1])
    if not (1 <= lo <= hi <= params.n_states):
        raise ValueError(f"bad window [{lo}, {hi}] for N={params.n_states}")
    reps = config.replications
    values = np.empty(reps)
    for rep in range(reps):
        weighted = tilted_sample_path(params, tilt, config, replication=rep)
        traj = weighted.trajectory
        final = traj.states_after_jump[-1] if traj.n_jumps else traj.initial_state
        values[rep] = math.exp(weighted.log_weight) if lo <= final <= hi else 0.0
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return ExperimentResult(estimate, stderr, reps, config.seed, params,
                            extra={"window": [lo, hi]})
