"""Spectrum of the simplex-diffusion generator, three independent ways.

The generator

    L = sum_n [ x_n (1 - |x|_1) d_n^2 + (a_n (1 - |x|_1) - a_last x_n) d_n ]

maps polynomials of total degree d into themselves, and the action of -L on
the leading homogeneous part of degree d is a dense C(N,d) x C(N,d) matrix
over the monomial basis (C(N,d) = binom(d+N-1, d)).  Its eigenvalues are
exactly the eigenvalues of -L on the orthogonal complement of the lower
degrees, so eigensolving these blocks degree by degree yields the whole
spectrum.

Two further routes avoid eigensolving entirely.  Splitting off the part of
-L that scales degree-d polynomials by d * a_last leaves per-degree
multisets `B_d` (the spectrum net of that uniform shift) satisfying the
exact recursion

    B_0 = {0},
    B_{d+1} = (2d + abar + B_d)  union  {0 repeated C(N,d+1) - C(N,d)},

with abar = a_1 + ... + a_N, and the degree-d spectrum is B_d + d * a_last.
Unwinding the recursion indexes every eigenvalue in closed form: an element
born as 0 at degree b and carried up to degree t accumulates the shifts
2j + abar over the consecutive degrees j = b..t-1, giving

    value        = 2 * (b + ... + (t-1)) + (t - b) * abar + t * a_last,
    multiplicity = C(N, b) - C(N, b-1)     (with C(N, -1) = 0).

All three routes are implemented here and must agree multiset-for-multiset;
the smallest positive eigenvalue (the spectral gap) equals a_last whenever
N >= 2.  The module also evaluates the quadratic energy form and Poincare
ratios on polynomials using exact moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, InconclusiveError, NumericalError
from .polynomials import Polynomial, expectation, variance
from .simplex import AlphaParams, sample_array

# Largest monomial basis a single degree block may use.
INDEX_CAP = 2_000_000

# Default relative clustering coefficient: tolerance 1e-7 * (1 + |value|).
DEFAULT_CLUSTER_TOL = 1e-7

# An eigenvalue triple (c0, c1, c2) stands for c0 + c1 * abar + c2 * a_last.
EigTriple = tuple[int, int, int]


def homogeneous_dim(nvars: int, degree: int) -> int:
    """C(N,d): number of degree-d monomials in N variables."""
    return math.comb(degree + nvars - 1, degree)


def degree_multi_indices(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples with the given total degree.

    Ordered lexicographically with the first coordinate decreasing, which is
    fixed and documented because matrix blocks index into this list.
    """
    if nvars < 1 or degree < 0:
        raise ValueError("need nvars >= 1 and degree >= 0")
    count = homogeneous_dim(nvars, degree)
    if count > INDEX_CAP:
        raise CapacityError(f"basis of size {count} exceeds cap {INDEX_CAP}")

    def gen(width: int, total: int) -> Iterator[tuple[int, ...]]:
        if width == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in gen(width - 1, total - first):
                yield (first,) + rest

    out = list(gen(nvars, degree))
    assert len(out) == count
    return out


@dataclass(frozen=True)
class DegreeBlockMatrix:
    """Matrix of the degree-preserving part of -L on one monomial basis."""

    alpha: AlphaParams
    degree: int
    indices: tuple[tuple[int, ...], ...]
    matrix: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.indices)


def degree_block(alpha: AlphaParams, degree: int) -> DegreeBlockMatrix:
    """Assemble the degree-d block of -L.

    Diagonal entry at exponent k:
        d * a_last + sum_n k_n (k_n + a_n - 1);
    entry (k, k + e_n - e_m) for n != m when the target exponent is valid:
        (k_n + a_n)(k_n + 1);
    everything else zero.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    indices = degree_multi_indices(alpha.n, degree)
    position = {k: i for i, k in enumerate(indices)}
    a = alpha.as_array()
    matrix = np.zeros((len(indices), len(indices)))
    for row, k in enumerate(indices):
        karr = np.asarray(k, dtype=float)
        matrix[row, row] = degree * alpha.alpha_last + float(
            np.sum(karr * (karr + a - 1.0))
        )
        for n in range(alpha.n):
            for m in range(alpha.n):
                if n == m or k[m] == 0:
                    continue
                target = list(k)
                target[n] += 1
                target[m] -= 1
                matrix[row, position[tuple(target)]] = (k[n] + a[n]) * (k[n] + 1)
    return DegreeBlockMatrix(alpha, degree, tuple(indices), matrix)


@dataclass(frozen=True)
class EigenMultiset:
    """Eigenvalues clustered into (value, multiplicity) pairs, ascending.

    `cluster_tol` is the clustering coefficient actually used; when
    `relative_tol` is set the effective tolerance at value v is
    cluster_tol * (1 + |v|).  `non_generic` marks multisets in which a
    cluster swallowed values that are distinct as exact integer
    combinations of (1, abar, a_last).
    """

    clusters: tuple[tuple[float, int], ...]
    cluster_tol: float
    relative_tol: bool = True
    non_generic: bool = False

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.clusters)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(m for _, m in self.clusters)

    @property
    def size(self) -> int:
        return sum(m for _, m in self.clusters)

    def min_positive(self) -> float:
        for v, _ in self.clusters:
            if v > self._tol_at(0.0):
                return v
        raise ValueError("multiset has no positive value")

    def _tol_at(self, v: float) -> float:
        return self.cluster_tol * (1.0 + abs(v)) if self.relative_tol else self.cluster_tol


def _cluster_pairs(
    pairs: Iterable[tuple[float, int, object]],
    cluster_tol: float | None,
) -> tuple[tuple[tuple[float, int], ...], float, bool, bool]:
    """Cluster (value, multiplicity, source) triples by value.

    Returns (clusters, tol, relative, merged_distinct_sources).
    """
    tol = DEFAULT_CLUSTER_TOL if cluster_tol is None else float(cluster_tol)
    relative = cluster_tol is None

    def tol_at(v: float) -> float:
        return tol * (1.0 + abs(v)) if relative else tol

    ordered = sorted(pairs, key=lambda p: p[0])
    clusters: list[tuple[float, int]] = []
    merged = False
    group: list[tuple[float, int, object]] = []

    def flush() -> None:
        nonlocal merged
        if not group:
            return
        weight = sum(m for _, m, _ in group)
        value = sum(v * m for v, m, _ in group) / weight
        clusters.append((value, weight))
        if len({src for _, _, src in group if src is not None}) > 1:
            merged = True

    for item in ordered:
        if group and item[0] - group[-1][0] > tol_at(item[0]):
            flush()
            group = []
        group.append(item)
    flush()
    return tuple(clusters), tol, relative, merged


def eigenvalue_multiset(
    block: DegreeBlockMatrix, cluster_tol: float | None = None
) -> EigenMultiset:
    """Eigenvalues of a degree block as a clustered multiset.

    The block is similar to a symmetric matrix (the generator is self-adjoint
    under the stationary law), so a genuine imaginary part is a numerical
    failure: anything above 1e-8 * ||M|| trips NumericalError, as does an
    eigenvalue below the proven floor degree * a_last.
    """
    values = np.linalg.eigvals(block.matrix)
    scale = max(float(np.linalg.norm(block.matrix)), 1.0)
    worst_imag = float(np.abs(values.imag).max(initial=0.0))
    if worst_imag > 1e-8 * scale:
        raise NumericalError(
            f"imaginary eigenvalue component {worst_imag:.3e} exceeds 1e-8*||M||"
        )
    real = np.sort(values.real)
    floor = block.degree * block.alpha.alpha_last
    if real[0] < floor - 1e-8 * scale:
        raise NumericalError(
            f"eigenvalue {real[0]!r} below the degree floor {floor!r}"
        )
    clusters, tol, relative, _ = _cluster_pairs(
        ((float(v), 1, None) for v in real), cluster_tol
    )
    return EigenMultiset(clusters, tol, relative, False)


def _triple_value(triple: EigTriple, alpha: AlphaParams) -> float:
    c0, c1, c2 = triple
    return c0 + c1 * alpha.head_sum + c2 * alpha.alpha_last


def _materialize(
    triples: dict[EigTriple, int], alpha: AlphaParams, cluster_tol: float | None
) -> EigenMultiset:
    clusters, tol, relative, merged = _cluster_pairs(
        ((_triple_value(t, alpha), m, t) for t, m in triples.items()), cluster_tol
    )
    return EigenMultiset(clusters, tol, relative, merged)


def _recursion_base(nvars: int, d_max: int) -> list[dict[tuple[int, int], int]]:
    """Per-degree {(c0, c1): multiplicity} before the d * a_last shift."""
    levels: list[dict[tuple[int, int], int]] = [{(0, 0): 1}]
    for d in range(d_max):
        nxt: dict[tuple[int, int], int] = {}
        for (c0, c1), mult in levels[d].items():
            key = (c0 + 2 * d, c1 + 1)
            nxt[key] = nxt.get(key, 0) + mult
        born = homogeneous_dim(nvars, d + 1) - homogeneous_dim(nvars, d)
        if born:
            nxt[(0, 0)] = nxt.get((0, 0), 0) + born
        levels.append(nxt)
    return levels


@dataclass(frozen=True)
class SpectrumRecursion:
    """Per-degree spectra from the additive recursion.

    `base[d]` is the degree-d multiset net of the uniform shift d * a_last;
    `total[d]` includes it.  `exact[d]` carries the same data as integer
    triples (c0, c1, c2) meaning c0 + c1 * abar + c2 * a_last, which is the
    representation the equality tests and the gap certification use.
    """

    alpha: AlphaParams
    d_max: int
    base: tuple[EigenMultiset, ...]
    total: tuple[EigenMultiset, ...]
    exact: tuple[dict[EigTriple, int], ...]

    def degree(self, d: int) -> EigenMultiset:
        return self.total[d]

    def union(
        self, value_cap: float | None = None, cluster_tol: float | None = None
    ) -> EigenMultiset:
        """Multiset union over all computed degrees, optionally value-capped."""
        merged: dict[EigTriple, int] = {}
        for level in self.exact:
            for triple, mult in level.items():
                if value_cap is not None and _triple_value(triple, self.alpha) > (
                    value_cap + 1e-9 * (1.0 + abs(value_cap))
                ):
                    continue
                merged[triple] = merged.get(triple, 0) + mult
        return _materialize(merged, self.alpha, cluster_tol)


def spectrum_by_recursion(
    alpha: AlphaParams, d_max: int, cluster_tol: float | None = None
) -> SpectrumRecursion:
    """Run the degree recursion up to d_max; exact, no eigensolver involved."""
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    base_levels = _recursion_base(alpha.n, d_max)
    exact = tuple(
        {(c0, c1, d): mult for (c0, c1), mult in level.items()}
        for d, level in enumerate(base_levels)
    )
    base = tuple(
        _materialize({(c0, c1, 0): m for (c0, c1), m in level.items()}, alpha, cluster_tol)
        for level in base_levels
    )
    total = tuple(_materialize(level, alpha, cluster_tol) for level in exact)
    return SpectrumRecursion(alpha, d_max, base, total, exact)


@dataclass(frozen=True)
class SpectrumKey:
    """Closed-form index of one spectrum chunk.

    `head` lists the consecutive degrees b..tail-1 over which the recursion
    shifts 2*degree + abar accumulate, and `tail` is the total degree that
    contributes tail * a_last.  The indexed eigenvalue is

        2 * sum(head) + len(head) * abar + tail * a_last

    and its multiplicity is the number of degree-b newcomers,
    C(N, b) - C(N, b-1), where b = head[0] (or b = tail for an empty head).
    Keys whose head is strictly increasing but not that consecutive run are
    representable; they index nothing and get multiplicity zero.
    """

    head: tuple[int, ...]
    tail: int

    def __post_init__(self) -> None:
        head = tuple(int(h) for h in self.head)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", int(self.tail))
        if head:
            if head[0] < 0 or any(b >= c for b, c in zip(head, head[1:])):
                raise ValueError("head must be strictly increasing and nonnegative")
            if self.tail <= head[-1]:
                raise ValueError("tail must exceed the last head entry")
        elif self.tail < 0:
            raise ValueError("tail must be nonnegative")

    @property
    def degree(self) -> int:
        return self.tail

    @property
    def birth(self) -> int:
        return self.head[0] if self.head else self.tail

    def triple(self) -> EigTriple:
        return (2 * sum(self.head), len(self.head), self.tail)

    def value(self, alpha: AlphaParams) -> float:
        return _triple_value(self.triple(), alpha)

    def multiplicity(self, nvars: int) -> int:
        if self.head and self.head != tuple(range(self.birth, self.tail)):
            return 0
        b = self.birth
        below = homogeneous_dim(nvars, b - 1) if b > 0 else 0
        return homogeneous_dim(nvars, b) - below


def enumerate_spectrum_keys(alpha: AlphaParams, value_cap: float) -> list[SpectrumKey]:
    """All keys with value <= value_cap and nonzero multiplicity.

    Ordered by (degree, birth degree).  Terminates because a key of degree t
    has value at least t * a_last.
    """
    if value_cap <= 0:
        raise ValueError("value_cap must be positive")
    slack = 1e-9 * (1.0 + abs(value_cap))
    keys: list[SpectrumKey] = []
    t = 0
    while t * alpha.alpha_last <= value_cap + slack:
        for b in range(t + 1):
            key = SpectrumKey(tuple(range(b, t)), t)
            if key.multiplicity(alpha.n) == 0:
                continue
            if key.value(alpha) <= value_cap + slack:
                keys.append(key)
        t += 1
    return keys


def spectrum_by_keys(
    alpha: AlphaParams, value_cap: float, cluster_tol: float | None = None
) -> EigenMultiset:
    """Spectrum up to value_cap from the closed-form key enumeration.

    When the parameters are non-generic (distinct keys share a value) the
    clustered multiplicities merge and the result is flagged.
    """
    merged: dict[EigTriple, int] = {}
    for key in enumerate_spectrum_keys(alpha, value_cap):
        triple = key.triple()
        merged[triple] = merged.get(triple, 0) + key.multiplicity(alpha.n)
    return _materialize(merged, alpha, cluster_tol)


def spectrum_keys_at_degree(
    alpha: AlphaParams, degree: int, cluster_tol: float | None = None
) -> EigenMultiset:
    """The degree-d slice of the closed-form spectrum, clustered like the rest."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    merged: dict[EigTriple, int] = {}
    for b in range(degree + 1):
        key = SpectrumKey(tuple(range(b, degree)), degree)
        mult = key.multiplicity(alpha.n)
        if mult:
            merged[key.triple()] = mult
    return _materialize(merged, alpha, cluster_tol)


def spectral_gap(alpha: AlphaParams, d_max: int = 5) -> float:
    """Smallest positive eigenvalue over degrees 1..d_max, certified global.

    Certification uses two exact facts: every degree-d eigenvalue is at
    least d * a_last, and with a single regular coordinate the unique
    degree-d eigenvalue d(d-1) + d * |a|_1 increases with d.  If the
    enumerated window cannot dominate the omitted degrees, the computation
    refuses to answer (InconclusiveError) rather than guess.
    """
    if d_max < 1:
        raise ValueError("d_max must be at least 1")
    levels = _recursion_base(alpha.n, d_max)
    best = math.inf
    for d in range(1, d_max + 1):
        for (c0, c1), _ in levels[d].items():
            best = min(best, c0 + c1 * alpha.head_sum + d * alpha.alpha_last)
    if alpha.n >= 2:
        omitted_floor = (d_max + 1) * alpha.alpha_last
    else:
        omitted_floor = (d_max + 1) * d_max + (d_max + 1) * alpha.total
    if best > omitted_floor + 1e-12 * (1.0 + abs(best)):
        raise InconclusiveError(
            f"degrees above {d_max} could reach below the candidate gap {best!r}"
        )
    return best


def degree_one_eigenbasis(alpha: AlphaParams) -> list[Polynomial]:
    """Zero-mean linear eigenfunctions u_1..u_N, mutually orthogonal in L2.

    The first N-1 use weight vectors theta with sum_k theta_k a_k = 0,
    orthonormal in the a-weighted inner product (built by Gram-Schmidt over
    the standard basis, deterministic order); each satisfies
    -L u = a_last * u.  The last one,

        u_N = sum_k x_k - (a_1 + ... + a_N) / |a|_1,

    satisfies -L u = |a|_1 * u.
    """
    n = alpha.n
    if n < 2:
        raise ValueError("need at least two regular coordinates")
    a = alpha.as_array()
    thetas: list[np.ndarray] = []
    for i in range(n - 1):
        v = np.zeros(n)
        v[i] = 1.0
        v -= (a[i] / a.sum()) * np.ones(n)  # a-weighted projection off the constants
        for t in thetas:
            v -= float(np.sum(v * t * a)) * t
        norm = math.sqrt(float(np.sum(v * v * a)))
        if norm < 1e-13:
            raise NumericalError("degenerate weight system in the linear eigenbasis")
        thetas.append(v / norm)
    polys = [Polynomial.linear(t) for t in thetas]
    polys.append(Polynomial.linear(np.ones(n), constant=-alpha.head_sum / alpha.total))
    return polys


def apply_generator(alpha: AlphaParams, f: Polynomial) -> Polynomial:
    """Apply L term by term; the total degree never increases.

    On a monomial x^k with |k| = d:

        L x^k = sum_n k_n (k_n - 1 + a_n) [ x^(k - e_n)
                                            - sum_m x^(k - e_n + e_m) ]
                - d * a_last * x^k.
    """
    n = alpha.n
    if f.nvars > n:
        raise ValueError(f"polynomial uses {f.nvars} variables, generator has {n}")
    acc: dict[tuple[int, ...], float] = {}

    def add(key: tuple[int, ...], value: float) -> None:
        acc[key] = acc.get(key, 0.0) + value

    for key, coeff in f.terms.items():
        k = key + (0,) * (n - len(key))
        total_degree = sum(k)
        if total_degree:
            add(key, -alpha.alpha_last * total_degree * coeff)
        for i, ki in enumerate(k):
            if ki == 0:
                continue
            weight = coeff * ki * (ki - 1 + alpha.alphas[i])
            down = k[:i] + (ki - 1,) + k[i + 1 :]
            add(down, weight)
            for j in range(n):
                up = down[:j] + (down[j] + 1,) + down[j + 1 :]
                add(up, -weight)
    return Polynomial(acc)


def dirichlet_energy(alpha: AlphaParams, f: Polynomial, g: Polynomial) -> float:
    """Energy form E(f,g) = E[ (1 - |x|_1) sum_n x_n (d_n f)(d_n g) ].

    Evaluated through exact moments; by integration by parts it equals
    -E[f * Lg], which `apply_generator` provides as an independent route.
    """
    n = alpha.n
    if max(f.nvars, g.nvars) > n:
        raise ValueError("polynomial dimension exceeds the law's")
    integrand = Polynomial.zero()
    for i in range(n):
        df = f.partial(i)
        dg = g.partial(i)
        if df.is_zero or dg.is_zero:
            continue
        integrand = integrand + Polynomial.variable(i) * df * dg
    if integrand.is_zero:
        return 0.0
    slack = Polynomial.constant(1.0) - sum(
        (Polynomial.variable(j) for j in range(n)), Polynomial.zero()
    )
    return expectation(slack * integrand, alpha)


def poincare_ratio(alpha: AlphaParams, f: Polynomial) -> float:
    """E(f,f) / Var(f), exactly; at least a_last for every non-constant f."""
    var = variance(f, alpha)
    if var <= 0.0:
        raise ValueError("Poincare ratio needs a non-constant polynomial")
    return dirichlet_energy(alpha, f, f) / var


def poincare_ratio_mc(
    alpha: AlphaParams, f: Polynomial, n_samples: int, rng: np.random.Generator
) -> float:
    """Monte Carlo estimate of E(f,f) / Var(f) from n_samples draws."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    points = sample_array(alpha, rng, n_samples)
    values = f.evaluate(points)
    var = float(values.var(ddof=1))
    if var <= 0.0:
        raise ValueError("degenerate sample variance")
    slack = 1.0 - points.sum(axis=1)
    energy = np.zeros(n_samples)
    for i in range(alpha.n):
        df = f.partial(i)
        if df.is_zero:
            continue
        energy += points[:, i] * df.evaluate(points) ** 2
    return float(np.mean(slack * energy)) / var


def multisets_agree(
    a: EigenMultiset, b: EigenMultiset, value_tol: float = 1e-8
) -> bool:
    """Same cluster count, values within value_tol, multiplicities equal."""
    if len(a.clusters) != len(b.clusters):
        return False
    return all(
        abs(va - vb) <= value_tol and ma == mb
        for (va, ma), (vb, mb) in zip(a.clusters, b.clusters)
    )


def random_polynomial(
    nvars: int,
    degree: int,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> Polynomial:
    """Dense random polynomial of the given total degree (test helper)."""
    terms: dict[tuple[int, ...], float] = {}
    for d in range(degree + 1):
        for k in degree_multi_indices(nvars, d):
            terms[k] = scale * float(rng.standard_normal())
    return Polynomial(terms)
