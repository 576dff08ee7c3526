"""Continuous-time population chain on the scaled simplex lattice.

A population of M individuals of N+1 types splits into a focal group
(types 1..N) and an outside pool (type N+1).  Writing the state as the
vector of focal counts m (so x = m/M and M - sum(m) individuals sit
outside), the dynamics are: each focal individual emigrates at rate a_last,
the outside pool immigrates into type i at rate a_i per outsider-slot, and
every (focal, outsider) couple rings at rate 2 and sends one member across
in a fair direction.  In rates, with rem = M - sum(m):

    m -> m - e_i   at  m_i * a_last + m_i * rem,
    m -> m + e_i   at  rem * a_i    + m_i * rem.

The chain is irreducible, reversible with respect to the product of rising
factorials

    mu(m) proportional to [a_last]_rem / rem!  *  prod_i [a_i]_{m_i} / m_i!,

and its generator has the same spectral gap a_last as the continuum
diffusion, independently of M (for N >= 2).  Applied to a test function the
generator converges to the diffusion generator at rate O(1/M).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import CapacityError, NumericalError
from .simplex import AlphaParams
from .spectrum import degree_multi_indices

# Dense generator assembly/eigensolve refuses beyond this many states.
DENSE_STATE_CAP = 5000

DiscreteState = tuple[int, ...]


@dataclass(frozen=True)
class ChainSpec:
    """Population size M plus the concentration parameters."""

    M: int
    alpha: AlphaParams

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError("population must contain at least one individual")

    @property
    def n(self) -> int:
        return self.alpha.n

    def n_states(self) -> int:
        return math.comb(self.M + self.n, self.n)

    def validate_state(self, counts: Sequence[int]) -> DiscreteState:
        m = tuple(int(c) for c in counts)
        if len(m) != self.n or any(c < 0 for c in m) or sum(m) > self.M:
            raise ValueError(f"{m} is not a valid count vector for M={self.M}")
        return m


def enumerate_states(spec: ChainSpec) -> list[DiscreteState]:
    """All count vectors with sum <= M, graded by total and then by the
    fixed monomial order (first coordinate decreasing)."""
    out: list[DiscreteState] = []
    for total in range(spec.M + 1):
        out.extend(degree_multi_indices(spec.n, total))
    return out


def transition_rates(
    spec: ChainSpec, counts: Sequence[int]
) -> list[tuple[DiscreteState, float]]:
    """Feasible neighbor states with their positive jump rates."""
    m = spec.validate_state(counts)
    rem = spec.M - sum(m)
    a = spec.alpha.alphas
    out: list[tuple[DiscreteState, float]] = []
    for i in range(spec.n):
        if m[i] >= 1:
            down = m[:i] + (m[i] - 1,) + m[i + 1 :]
            out.append((down, m[i] * spec.alpha.alpha_last + m[i] * rem))
        if rem >= 1:
            up = m[:i] + (m[i] + 1,) + m[i + 1 :]
            out.append((up, rem * a[i] + m[i] * rem))
    return out


@dataclass(frozen=True)
class StationaryMeasure:
    """Log-space stationary weights aligned with `states`."""

    spec: ChainSpec
    states: tuple[DiscreteState, ...]
    log_probs: np.ndarray = field(repr=False)

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs)


def _log_weights(spec: ChainSpec, counts: np.ndarray) -> np.ndarray:
    """Unnormalized log weights for an (S, N) array of count vectors."""
    a = spec.alpha.as_array()
    rem = spec.M - counts.sum(axis=1)
    logw = gammaln(spec.alpha.alpha_last + rem) - gammaln(spec.alpha.alpha_last)
    logw -= gammaln(rem + 1.0)
    logw += (gammaln(a[None, :] + counts) - gammaln(a[None, :])).sum(axis=1)
    logw -= gammaln(counts + 1.0).sum(axis=1)
    return logw


def stationary_measure(spec: ChainSpec) -> StationaryMeasure:
    """The reversible law, normalized in log space."""
    states = enumerate_states(spec)
    counts = np.asarray(states, dtype=float)
    logw = _log_weights(spec, counts)
    log_z = float(logsumexp(logw))
    return StationaryMeasure(spec, tuple(states), logw - log_z)


def detailed_balance_check(
    spec: ChainSpec,
    perturbation: tuple[Sequence[int], int, str, float] | None = None,
) -> float:
    """Maximum over edges of |log mu(x) q(x,y) - log mu(y) q(y,x)|.

    Streams over the up-edges (every edge once) without assembling the
    generator.  `perturbation` optionally scales the up-rate of one edge,
    given as (counts, coordinate, 'up', factor), to exercise the detector.
    """
    states = enumerate_states(spec)
    counts = np.asarray(states, dtype=np.int64)
    index = {s: k for k, s in enumerate(states)}
    logw = _log_weights(spec, counts.astype(float))
    a = spec.alpha.as_array()
    rem = spec.M - counts.sum(axis=1)
    worst = 0.0
    for i in range(spec.n):
        mask = rem >= 1
        rows = np.nonzero(mask)[0]
        if len(rows) == 0:
            continue
        up_rate = rem[rows] * (a[i] + counts[rows, i])
        partner_counts = counts[rows].copy()
        partner_counts[:, i] += 1
        partners = np.array([index[tuple(c)] for c in partner_counts])
        down_rate = partner_counts[:, i] * (
            spec.alpha.alpha_last + (rem[rows] - 1)
        )
        if perturbation is not None:
            p_counts, p_i, p_dir, p_factor = perturbation
            if p_dir != "up":
                raise ValueError("only up-edge perturbations are supported")
            if p_i == i:
                key = index[spec.validate_state(p_counts)]
                hit = np.nonzero(rows == key)[0]
                up_rate[hit] = up_rate[hit] * p_factor
        gap = np.abs(
            logw[rows] + np.log(up_rate) - logw[partners] - np.log(down_rate)
        )
        worst = max(worst, float(gap.max(initial=0.0)))
    return worst


@dataclass(frozen=True)
class GeneratorMatrix:
    """Dense rate matrix aligned with `states`; rows sum to zero."""

    spec: ChainSpec
    states: tuple[DiscreteState, ...]
    matrix: np.ndarray = field(repr=False)


def generator_matrix(spec: ChainSpec, max_states: int = DENSE_STATE_CAP) -> GeneratorMatrix:
    """Assemble the dense generator; refuses above max_states states."""
    size = spec.n_states()
    if size > max_states:
        raise CapacityError(f"{size} states exceed the dense cap {max_states}")
    states = enumerate_states(spec)
    index = {s: k for k, s in enumerate(states)}
    matrix = np.zeros((size, size))
    for row, state in enumerate(states):
        for target, rate in transition_rates(spec, state):
            matrix[row, index[target]] = rate
    np.fill_diagonal(matrix, 0.0)
    np.fill_diagonal(matrix, -matrix.sum(axis=1))
    return GeneratorMatrix(spec, tuple(states), matrix)


def chain_spectrum(spec: ChainSpec, max_states: int = DENSE_STATE_CAP) -> np.ndarray:
    """All eigenvalues of the negative generator, ascending.

    Reversibility makes the generator similar to a symmetric matrix through
    the square root of the stationary weights, so the spectrum is real and
    an ordinary symmetric eigensolve applies.
    """
    gen = generator_matrix(spec, max_states)
    logw = _log_weights(spec, np.asarray(gen.states, dtype=float))
    half = 0.5 * (logw[:, None] - logw[None, :])
    sym = np.exp(half) * gen.matrix
    sym = 0.5 * (sym + sym.T)
    values = -np.linalg.eigvalsh(sym)[::-1]
    if abs(values[0]) > 1e-8 * max(1.0, abs(values[-1])):
        raise NumericalError("generator lost its zero eigenvalue after symmetrization")
    return values


def chain_spectral_gap(spec: ChainSpec, max_states: int = DENSE_STATE_CAP) -> float:
    """Second-smallest eigenvalue of the negative generator; a_last for N >= 2."""
    return float(chain_spectrum(spec, max_states)[1])


@dataclass(frozen=True)
class JumpTrajectory:
    """Piecewise-constant path: state_ids[k] holds on [times[k], times[k+1])."""

    spec: ChainSpec
    states: tuple[DiscreteState, ...]
    times: np.ndarray = field(repr=False)
    state_ids: np.ndarray = field(repr=False)
    end_time: float

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 1

    def occupation_probabilities(self) -> np.ndarray:
        """Time-weighted occupation over [0, end_time], aligned with states."""
        if self.end_time <= 0.0:
            raise ValueError("trajectory has no elapsed time")
        holds = np.diff(np.append(self.times, self.end_time))
        out = np.zeros(len(self.states))
        np.add.at(out, self.state_ids, holds)
        return out / self.end_time


def gillespie(
    spec: ChainSpec,
    x0: Sequence[int],
    horizon: float,
    rng: np.random.Generator,
    max_jumps: int | None = None,
) -> JumpTrajectory:
    """Exact stochastic simulation: exponential holds, rate-proportional jumps.

    Runs until the horizon or until max_jumps jumps, whichever comes first;
    horizon may be inf when max_jumps is given.
    """
    if math.isinf(horizon) and max_jumps is None:
        raise ValueError("need a finite horizon or a jump budget")
    start = spec.validate_state(x0)
    states = enumerate_states(spec)
    index = {s: k for k, s in enumerate(states)}
    targets: list[list[int]] = []
    cum_rates: list[list[float]] = []
    exit_rates = np.empty(len(states))
    for k, state in enumerate(states):
        moves = transition_rates(spec, state)
        assert moves, "every state has a feasible move"
        targets.append([index[t] for t, _ in moves])
        acc, cum = 0.0, []
        for _, rate in moves:
            acc += rate
            cum.append(acc)
        cum_rates.append(cum)
        exit_rates[k] = acc

    current = index[start]
    t = 0.0
    times = [0.0]
    seq = [current]
    block = 1 << 15
    exp_pool = rng.exponential(size=block)
    uni_pool = rng.random(size=block)
    used = 0
    while max_jumps is None or len(times) - 1 < max_jumps:
        if used == block:
            exp_pool = rng.exponential(size=block)
            uni_pool = rng.random(size=block)
            used = 0
        hold = exp_pool[used] / exit_rates[current]
        if t + hold >= horizon:
            t = horizon
            break
        t += hold
        cum = cum_rates[current]
        pick = bisect_right(cum, uni_pool[used] * cum[-1])
        pick = min(pick, len(cum) - 1)
        current = targets[current][pick]
        times.append(t)
        seq.append(current)
        used += 1
    end_time = t if math.isfinite(horizon) else times[-1]
    return JumpTrajectory(
        spec,
        tuple(states),
        np.asarray(times),
        np.asarray(seq, dtype=np.int64),
        float(end_time),
    )


def generator_apply(
    spec: ChainSpec, f: Callable[[DiscreteState], float], counts: Sequence[int]
) -> float:
    """Rate-weighted difference sum_y q(x,y) (f(y) - f(x)) at one state."""
    m = spec.validate_state(counts)
    fx = f(m)
    return sum(rate * (f(target) - fx) for target, rate in transition_rates(spec, m))


def write_generator_csv(gen: GeneratorMatrix, path) -> None:
    """Sparse triplet export: row,col,rate for every nonzero entry."""
    with open(path, "w", newline="") as fh:
        fh.write("row,col,rate\n")
        rows, cols = np.nonzero(gen.matrix)
        for r, c in zip(rows, cols):
            fh.write(f"{r},{c},{float(gen.matrix[r, c])!r}\n")


def write_measure_csv(measure: StationaryMeasure, path) -> None:
    """Per-state export: the count vector plus its probability."""
    probs = measure.probabilities()
    n = measure.spec.n
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"m{i + 1}" for i in range(n)) + ",probability\n")
        for state, p in zip(measure.states, probs):
            fh.write(",".join(str(c) for c in state) + f",{float(p)!r}\n")
