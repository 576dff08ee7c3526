"""Euler-Maruyama simulation of the degenerate simplex SDE.

Each coordinate follows

    dX_i = [ a_i (1 - |X|_1) - a_last X_i ] dt
           + sqrt( 2 (1 - |X|_1) X_i ) dB_i,

with independent Brownian motions, so both the drift and the noise die on
the faces and the process never leaves the simplex.  The discrete scheme
can overshoot, so every step ends with a boundary projection (clamp or
reflect at zero, then rescale an overshooting sum); after projection the
state satisfies the simplex constraints exactly.  The stationary law is the
Dirichlet distribution with the same parameters, which gives closed-form
moment targets for every ensemble run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InconclusiveError
from .polynomials import Polynomial, expectation, variance
from .simplex import AlphaParams, SimplexPoint, sample_array

BOUNDARY_POLICIES = ("clamp", "reflect-at-zero")


@dataclass(frozen=True)
class SimConfig:
    """Discretization and ensemble parameters for one simulation."""

    dt: float
    horizon: float
    paths: int = 1
    seed: int | tuple[int, ...] = 0
    boundary_policy: str = "clamp"
    record_stride: int = 1

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.horizon < 0.0:
            raise ValueError("horizon must be nonnegative")
        if self.horizon > 0.0 and self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")
        if self.paths < 1:
            raise ValueError("paths must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be positive")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ValueError(f"boundary_policy must be one of {BOUNDARY_POLICIES}")

    @property
    def n_steps(self) -> int:
        if self.horizon == 0.0:
            return 0
        return max(int(math.ceil(self.horizon / self.dt - 1e-9)), 1)


def default_dt(alpha: AlphaParams) -> float:
    """Step size 1e-3 * min(1, 1/|a|_1): resolves the fastest linear rate."""
    return 1e-3 * min(1.0, 1.0 / alpha.total)


def _project(states: np.ndarray, policy: str) -> np.ndarray:
    """Push every row back into the closed simplex, exactly."""
    if policy == "reflect-at-zero":
        states = np.abs(states)
    else:
        states = np.maximum(states, 0.0)
    # renormalize rows whose sum overshoots one; repeat for 1-ulp stragglers
    for _ in range(3):
        totals = states.sum(axis=1)
        mask = totals > 1.0
        if not mask.any():
            break
        states[mask] = states[mask] / totals[mask, None]
    return states


def _step(
    states: np.ndarray,
    alphas: np.ndarray,
    alpha_last: float,
    dt: float,
    noise: np.ndarray,
    policy: str,
) -> np.ndarray:
    slack = 1.0 - states.sum(axis=1)
    drift = alphas * slack[:, None] - alpha_last * states
    diff_sq = 2.0 * slack[:, None] * states
    np.maximum(diff_sq, 0.0, out=diff_sq)
    out = states + drift * dt + np.sqrt(diff_sq * dt) * noise
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite state after step from {states!r}")
    return _project(out, policy)


def em_step(
    x: SimplexPoint,
    alpha: AlphaParams,
    dt: float,
    gaussians: np.ndarray,
) -> SimplexPoint:
    """One Euler-Maruyama update of a single point.

    `gaussians` supplies the N standard normal increments (before the
    sqrt(dt) scaling), so callers control the noise stream.
    """
    if x.n != alpha.n:
        raise ValueError("dimension mismatch between point and parameters")
    noise = np.asarray(gaussians, dtype=float).reshape(1, alpha.n)
    new = _step(x.as_array()[None, :], alpha.as_array(), alpha.alpha_last, dt, noise, "clamp")
    return SimplexPoint(new[0])


@dataclass(frozen=True)
class Trajectory:
    """One recorded path: times[k] is the time of states[k]."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), N)

    def point(self, k: int) -> SimplexPoint:
        return SimplexPoint(self.states[k])


def simulate(x0: SimplexPoint, alpha: AlphaParams, cfg: SimConfig) -> Trajectory:
    """Single path from x0, recorded every record_stride steps plus the end."""
    if x0.n != alpha.n:
        raise ValueError("dimension mismatch between start point and parameters")
    rng = np.random.default_rng(cfg.seed)
    state = x0.as_array()[None, :].copy()
    alphas = alpha.as_array()
    times = [0.0]
    states = [state[0].copy()]
    for k in range(1, cfg.n_steps + 1):
        noise = rng.standard_normal((1, alpha.n))
        state = _step(state, alphas, alpha.alpha_last, cfg.dt, noise, cfg.boundary_policy)
        if k % cfg.record_stride == 0 or k == cfg.n_steps:
            times.append(k * cfg.dt)
            states.append(state[0].copy())
    return Trajectory(np.asarray(times), np.asarray(states))


@dataclass(frozen=True)
class EnsembleStats:
    """Cross-path first and second moments at the recorded times."""

    times: np.ndarray
    mean: np.ndarray  # (K, N)
    mean_se: np.ndarray
    pair_index: tuple[tuple[int, int], ...]
    second: np.ndarray  # (K, len(pair_index)) means of x_i * x_j
    second_se: np.ndarray
    paths: int
    final_states: np.ndarray = field(repr=False)


def _resolve_x0(alpha: AlphaParams, cfg: SimConfig, x0, rng: np.random.Generator) -> np.ndarray:
    if isinstance(x0, str):
        if x0 != "stationary":
            raise ValueError("x0 must be a point, an array, or 'stationary'")
        return sample_array(alpha, rng, cfg.paths)
    if isinstance(x0, SimplexPoint):
        arr = x0.as_array()[None, :]
    else:
        arr = np.atleast_2d(np.asarray(x0, dtype=float))
    if arr.shape[1] != alpha.n:
        raise ValueError("x0 dimension mismatch")
    if arr.shape[0] == 1:
        arr = np.repeat(arr, cfg.paths, axis=0)
    if arr.shape[0] != cfg.paths:
        raise ValueError("x0 must supply one row or one row per path")
    return arr.copy()


def simulate_ensemble(
    alpha: AlphaParams, cfg: SimConfig, x0="stationary"
) -> EnsembleStats:
    """Run cfg.paths independent paths and record cross-path moments.

    x0 may be a SimplexPoint, an array of shape (N,) or (paths, N), or the
    string 'stationary' for exact draws from the invariant law.
    """
    rng = np.random.default_rng(cfg.seed)
    states = _project(_resolve_x0(alpha, cfg, x0, rng), cfg.boundary_policy)
    alphas = alpha.as_array()
    n = alpha.n
    pairs = tuple((i, j) for i in range(n) for j in range(i, n))
    times, means, mean_ses, seconds, second_ses = [], [], [], [], []

    def record(t: float) -> None:
        times.append(t)
        means.append(states.mean(axis=0))
        mean_ses.append(states.std(axis=0, ddof=1) / math.sqrt(cfg.paths))
        prod = np.stack([states[:, i] * states[:, j] for i, j in pairs], axis=1)
        seconds.append(prod.mean(axis=0))
        second_ses.append(prod.std(axis=0, ddof=1) / math.sqrt(cfg.paths))

    record(0.0)
    for k in range(1, cfg.n_steps + 1):
        noise = rng.standard_normal((cfg.paths, n))
        states = _step(states, alphas, alpha.alpha_last, cfg.dt, noise, cfg.boundary_policy)
        if k % cfg.record_stride == 0 or k == cfg.n_steps:
            record(k * cfg.dt)
    return EnsembleStats(
        times=np.asarray(times),
        mean=np.asarray(means),
        mean_se=np.asarray(mean_ses),
        pair_index=pairs,
        second=np.asarray(seconds),
        second_se=np.asarray(second_ses),
        paths=cfg.paths,
        final_states=states,
    )


@dataclass(frozen=True)
class DecayFit:
    """Fitted exponential decay rate of a squared semigroup deviation."""

    rate: float
    stderr: float
    ci_low: float
    ci_high: float
    window: tuple[float, float]
    dt: float
    outer: int
    inner: int
    times: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)


def decay_rate_fit(
    alpha: AlphaParams,
    f: Polynomial,
    cfg: SimConfig,
    x0_law: str = "stationary",
    x0: SimplexPoint | None = None,
    outer: int | None = None,
    inner: int | None = None,
    burn_in: float = 0.0,
    n_bootstrap: int = 200,
) -> DecayFit:
    """Estimate the decay rate of f along the semigroup by nested Monte Carlo.

    With start points drawn from the stationary law, the across-start
    variance of the within-start mean of f(X_t) equals the squared L2 norm
    of the evolved (centered) f and decays like exp(-2*rate*t); the inner
    sampling noise is subtracted out, the log of the debiased variance is
    fitted over an adaptive window, and the rate error is bootstrapped over
    the start points.

    For x0_law='point' all paths start at x0 (default: the drift fixed
    point) and run for `burn_in` first; the spread states then stand in for
    stationary draws.
    """
    if variance(f, alpha) <= 0.0:
        raise ValueError("decay fit needs a non-constant observable")
    if inner is None:
        inner = 32
    if outer is None:
        outer = max(cfg.paths // inner, 8)
    total_paths = outer * inner
    centered = f - expectation(f, alpha)
    rng = np.random.default_rng(cfg.seed)
    alphas = alpha.as_array()
    n = alpha.n

    if x0_law == "stationary":
        starts = sample_array(alpha, rng, outer)
    elif x0_law == "point":
        point = x0.as_array() if x0 is not None else alphas / alpha.total
        starts = np.repeat(point[None, :], outer, axis=0)
        burn_steps = int(round(burn_in / cfg.dt))
        for _ in range(burn_steps):
            noise = rng.standard_normal((outer, n))
            starts = _step(starts, alphas, alpha.alpha_last, cfg.dt, noise, cfg.boundary_policy)
    else:
        raise ValueError("x0_law must be 'stationary' or 'point'")

    states = np.repeat(starts, inner, axis=0)  # outer-major blocks of inner paths
    times = [0.0]
    outer_mean = []
    outer_var = []

    def record() -> None:
        vals = centered.evaluate(states).reshape(outer, inner)
        outer_mean.append(vals.mean(axis=1))
        outer_var.append(vals.var(axis=1, ddof=1) if inner > 1 else np.zeros(outer))

    record()
    for k in range(1, cfg.n_steps + 1):
        noise = rng.standard_normal((total_paths, n))
        states = _step(states, alphas, alpha.alpha_last, cfg.dt, noise, cfg.boundary_policy)
        if k % cfg.record_stride == 0 or k == cfg.n_steps:
            times.append(k * cfg.dt)
            record()

    t = np.asarray(times)
    m_hat = np.stack(outer_mean, axis=0)  # (K, outer)
    s_hat = np.stack(outer_var, axis=0)

    def debiased_variance(cols: np.ndarray) -> np.ndarray:
        m = m_hat[:, cols]
        s = s_hat[:, cols]
        return m.var(axis=1, ddof=1) - s.mean(axis=1) / inner

    all_cols = np.arange(outer)
    v_hat = debiased_variance(all_cols)

    # fit window: from t0 until the debiased variance loses a factor e^3,
    # stays positive, and keeps at least three points
    start = int(np.searchsorted(t, burn_in if x0_law == "point" else 0.0))
    if start >= len(t) or v_hat[start] <= 0.0:
        raise InconclusiveError("no positive variance estimate at the window start")
    cutoff = v_hat[start] * math.exp(-3.0)
    end = start
    while end + 1 < len(t) and v_hat[end + 1] > max(cutoff, 0.0):
        end += 1
    window = np.arange(start, end + 1)
    if len(window) < 3:
        raise InconclusiveError("decay window has fewer than three usable points")

    def fit_rate(cols: np.ndarray) -> float:
        v = debiased_variance(cols)[window]
        if np.any(v <= 0.0):
            return math.nan
        slope = np.polyfit(t[window], np.log(v), 1)[0]
        return -0.5 * float(slope)

    rate = fit_rate(all_cols)
    if math.isnan(rate):
        raise InconclusiveError("nonpositive variance estimates inside the window")

    boot = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        boot[b] = fit_rate(rng.integers(0, outer, size=outer))
    boot = boot[np.isfinite(boot)]
    if len(boot) < max(10, n_bootstrap // 4):
        raise InconclusiveError("bootstrap produced too few usable refits")
    stderr = float(boot.std(ddof=1))
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return DecayFit(
        rate=rate,
        stderr=stderr,
        ci_low=float(lo),
        ci_high=float(hi),
        window=(float(t[window[0]]), float(t[window[-1]])),
        dt=cfg.dt,
        outer=outer,
        inner=inner,
        times=t,
        variances=v_hat,
    )
