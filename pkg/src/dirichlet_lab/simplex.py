"""Exact Dirichlet arithmetic on the unit simplex, plus samplers.

A parameter vector carries N "regular" concentrations a_1..a_N and one last
concentration a_last attached to the slack coordinate 1 - sum(x).  The law
with these parameters lives on {x in [0,1]^N : sum(x) <= 1} with density

    rho(x) = Gamma(|a|_1) / prod_i Gamma(a_i)
             * (1 - |x|_1)^(a_last - 1) * prod_{i<=N} x_i^(a_i - 1),

and every moment is a finite product of rising factorials,

    E[x^p] = prod_i [a_i]_{p_i} / [|a|_1]_{|p|},   [a]_k = a(a+1)...(a+k-1),

which this module evaluates in log space via gammaln so that large total
degrees cannot overflow.  Two samplers are provided: stick breaking through
the neutrality representation (the canonical one) and a reinforced-urn
scheme kept as an independent cross-check.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

# Boundary slack accepted before a point is considered out of the simplex.
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class AlphaParams:
    """Concentration parameters (a_1, ..., a_N, a_last), all positive."""

    alphas: tuple[float, ...]
    alpha_last: float

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_last", float(self.alpha_last))
        if len(alphas) < 1:
            raise ValueError("need at least one regular concentration")
        values = alphas + (self.alpha_last,)
        if not all(np.isfinite(v) and v > 0.0 for v in values):
            raise ValueError(f"concentrations must be positive and finite, got {values}")

    @classmethod
    def parse(cls, values: Iterable[str | float]) -> "AlphaParams":
        """Build from the full (N+1)-vector; decimal strings parse exactly once."""
        vals = [float(v) for v in values]
        if len(vals) < 2:
            raise ValueError("need at least two concentrations (one regular plus last)")
        return cls(tuple(vals[:-1]), vals[-1])

    @property
    def n(self) -> int:
        """Number of regular coordinates N."""
        return len(self.alphas)

    @property
    def head_sum(self) -> float:
        """Sum of the regular concentrations a_1 + ... + a_N."""
        return float(sum(self.alphas))

    @property
    def total(self) -> float:
        """|a|_1, the sum of all N+1 concentrations."""
        return self.head_sum + self.alpha_last

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alphas, dtype=float)

    def full_array(self) -> np.ndarray:
        return np.asarray(self.alphas + (self.alpha_last,), dtype=float)


class SimplexPoint:
    """A point of the closed simplex {x >= 0, sum(x) <= 1}.

    Construction sanitizes the input: negative coordinates are clamped to
    zero and an overshooting sum is rescaled.  The size of the raw violation
    is recorded so callers can tell rounding noise from bad data.
    """

    __slots__ = ("coords", "raw_violation")

    def __init__(self, coords: Sequence[float]):
        arr = np.atleast_1d(np.asarray(coords, dtype=float))
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coords must be a non-empty vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coords must be finite")
        violation = max(float(-arr.min()), float(arr.sum() - 1.0), 0.0)
        arr = np.maximum(arr, 0.0)
        total = float(arr.sum())
        # second pass catches the rare one-ulp overshoot of the division
        for _ in range(3):
            if total <= 1.0:
                break
            arr = arr / total
            total = float(arr.sum())
        self.coords = tuple(float(v) for v in arr)
        self.raw_violation = violation

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def remainder(self) -> float:
        """The slack coordinate 1 - sum(x); nonnegative after sanitization."""
        return 1.0 - sum(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def full_array(self) -> np.ndarray:
        return np.asarray(self.coords + (self.remainder,), dtype=float)

    def is_interior(self, tol: float = 0.0) -> bool:
        return all(c > tol for c in self.coords) and self.remainder > tol

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SimplexPoint) and self.coords == other.coords

    def __hash__(self) -> int:
        return hash(self.coords)

    def __repr__(self) -> str:
        return f"SimplexPoint({list(self.coords)!r})"


def log_density(alpha: AlphaParams, x: SimplexPoint) -> float:
    """Log of the Dirichlet density at x.

    Raises ValueError on boundary points where a negative exponent makes the
    density diverge; returns -inf where a positive exponent kills it.
    """
    if x.n != alpha.n:
        raise ValueError(f"point has {x.n} coordinates, parameters have {alpha.n}")
    full = alpha.full_array()
    out = float(gammaln(alpha.total) - gammaln(full).sum())
    for coord, a in zip(x.full_array(), full):
        exponent = a - 1.0
        if exponent == 0.0:
            continue
        if coord <= 0.0:
            if exponent < 0.0:
                raise ValueError(
                    "density diverges: boundary coordinate with concentration below one"
                )
            return float("-inf")
        out += exponent * float(np.log(coord))
    return out


def monomial_expectation(alpha: AlphaParams, exponents: Sequence[int]) -> float:
    """E[x_1^p_1 ... x_N^p_N] under the Dirichlet law.

    Equals prod_i [a_i]_{p_i} / [|a|_1]_{|p|} with rising factorials,
    evaluated in log space.  Exponent vectors shorter than N are padded with
    zeros on the right.
    """
    p = [int(e) for e in exponents]
    if len(p) > alpha.n or any(e != float(orig) for e, orig in zip(p, exponents)):
        raise ValueError("exponents must be nonnegative integers, at most N of them")
    if any(e < 0 for e in p):
        raise ValueError("exponents must be nonnegative")
    degree = sum(p)
    if degree == 0:
        return 1.0
    log_val = gammaln(alpha.total) - gammaln(alpha.total + degree)
    for a, e in zip(alpha.alphas, p):
        if e:
            log_val += gammaln(a + e) - gammaln(a)
    return float(np.exp(log_val))


def sample_array(alpha: AlphaParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` points by stick breaking, shape (size, N).

    The i-th stick fraction is Beta(a_i, a_{i+1} + ... + a_last) and the
    fractions are independent; x_i is the fraction of whatever stick is left.
    """
    if size < 1:
        raise ValueError("size must be positive")
    full = alpha.full_array()
    tail = np.cumsum(full[::-1])[::-1]  # tail[i] = sum_{j >= i} a_j
    out = np.empty((size, alpha.n))
    stick = np.ones(size)
    for i in range(alpha.n):
        frac = rng.beta(full[i], tail[i + 1], size=size)
        out[:, i] = stick * frac
        stick = stick * (1.0 - frac)
    return out


def sample(alpha: AlphaParams, rng: np.random.Generator) -> SimplexPoint:
    """One stick-breaking draw from the Dirichlet law."""
    return SimplexPoint(sample_array(alpha, rng, 1)[0])


def _split_partition(n_slots: int, blocks: Sequence[Sequence[int]]):
    """Validate a partition of range(n_slots); slot n_slots-1 is the slack.

    Returns (regular blocks in input order, block containing the slack).
    """
    seen: set[int] = set()
    regular: list[list[int]] = []
    last_block: list[int] | None = None
    for block in blocks:
        b = [int(i) for i in block]
        if not b:
            raise ValueError("partition blocks must be nonempty")
        for i in b:
            if i < 0 or i >= n_slots:
                raise ValueError(f"index {i} outside 0..{n_slots - 1}")
            if i in seen:
                raise ValueError(f"index {i} appears in two blocks")
            seen.add(i)
        if n_slots - 1 in b:
            last_block = b
        else:
            regular.append(b)
    if len(seen) != n_slots:
        raise ValueError("partition must cover every index")
    assert last_block is not None
    return regular, last_block


def aggregate(alpha: AlphaParams, blocks: Sequence[Sequence[int]]) -> AlphaParams:
    """Block-sum the concentrations: merged coordinates stay Dirichlet.

    Indices 0..N-1 address the regular coordinates and index N the slack;
    the block containing N becomes the new last concentration, the remaining
    blocks keep their input order.
    """
    regular, last_block = _split_partition(alpha.n + 1, blocks)
    if not regular:
        raise ValueError("need at least one block without the slack index")
    full = alpha.full_array()
    new_alphas = tuple(float(full[b].sum()) for b in regular)
    return AlphaParams(new_alphas, float(full[last_block].sum()))


def aggregate_point(x: SimplexPoint, blocks: Sequence[Sequence[int]]) -> SimplexPoint:
    """Companion map on points: block sums of (x, remainder)."""
    regular, _ = _split_partition(x.n + 1, blocks)
    if not regular:
        raise ValueError("need at least one block without the slack index")
    full = x.full_array()
    return SimplexPoint([float(full[b].sum()) for b in regular])


def polya_urn_array(
    alpha: AlphaParams, steps: int, replicas: int, rng: np.random.Generator
) -> np.ndarray:
    """Relative masses after `steps` reinforced draws, shape (replicas, N).

    Starts from masses equal to the concentrations; each draw picks a color
    with probability proportional to its current mass and adds unit mass to
    it.  The mass of the last color is folded into the remainder.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if replicas < 1:
        raise ValueError("replicas must be positive")
    masses = np.tile(alpha.full_array(), (replicas, 1))
    rows = np.arange(replicas)
    for _ in range(steps):
        u = rng.random(replicas) * masses.sum(axis=1)
        chosen = (np.cumsum(masses, axis=1) <= u[:, None]).sum(axis=1)
        masses[rows, chosen] += 1.0
    rel = masses / masses.sum(axis=1, keepdims=True)
    return rel[:, : alpha.n]


def polya_urn(alpha: AlphaParams, steps: int, rng: np.random.Generator) -> SimplexPoint:
    """Single reinforced-urn run; converges in law to the Dirichlet vector."""
    return SimplexPoint(polya_urn_array(alpha, steps, 1, rng)[0])


def write_samples_csv(path, samples: np.ndarray) -> None:
    """Emit draws as CSV with the header replica,x1,...,xN,remainder."""
    arr = np.atleast_2d(np.asarray(samples, dtype=float))
    header = ["replica"] + [f"x{i + 1}" for i in range(arr.shape[1])] + ["remainder"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r, row in enumerate(arr):
            writer.writerow(
                [r] + [repr(float(v)) for v in row] + [repr(float(1.0 - row.sum()))]
            )
