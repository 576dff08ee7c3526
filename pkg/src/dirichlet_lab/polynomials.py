"""Sparse polynomials in the simplex coordinates.

Terms are keyed by exponent tuples with trailing zeros trimmed, so the same
object can be used in any ambient dimension that is large enough.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .simplex import AlphaParams, monomial_expectation


def _canon(key: Sequence[int]) -> tuple[int, ...]:
    k = tuple(int(e) for e in key)
    if any(e < 0 for e in k):
        raise ValueError("exponents must be nonnegative")
    while k and k[-1] == 0:
        k = k[:-1]
    return k


class Polynomial:
    """Sparse multivariate polynomial: exponent tuple -> coefficient.

    Zero coefficients are never stored, so `terms` equality is exact
    structural equality.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Sequence[int], float] | None = None):
        acc: dict[tuple[int, ...], float] = {}
        for key, coeff in (terms or {}).items():
            k = _canon(key)
            acc[k] = acc.get(k, 0.0) + float(coeff)
        self.terms = {k: c for k, c in acc.items() if c != 0.0}

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls()

    @classmethod
    def constant(cls, c: float) -> "Polynomial":
        return cls({(): float(c)})

    @classmethod
    def variable(cls, i: int) -> "Polynomial":
        if i < 0:
            raise ValueError("variable index must be nonnegative")
        return cls({(0,) * i + (1,): 1.0})

    @classmethod
    def monomial(cls, exponents: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls({tuple(exponents): float(coeff)})

    @classmethod
    def linear(cls, coeffs: Sequence[float], constant: float = 0.0) -> "Polynomial":
        terms: dict[tuple[int, ...], float] = {(): float(constant)}
        for i, c in enumerate(coeffs):
            terms[(0,) * i + (1,)] = float(c)
        return cls(terms)

    @property
    def nvars(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(float(other))
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(float(other))
        return self + (-other)

    def __rsub__(self, other: float) -> "Polynomial":
        return Polynomial.constant(float(other)) + (-self)

    def __mul__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = float(other)
            return Polynomial({k: v * c for k, v in self.terms.items()})
        out: dict[tuple[int, ...], float] = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                width = max(len(ka), len(kb))
                a = ka + (0,) * (width - len(ka))
                b = kb + (0,) * (width - len(kb))
                k = tuple(x + y for x, y in zip(a, b))
                out[k] = out.get(k, 0.0) + ca * cb
        return Polynomial(out)

    __rmul__ = __mul__

    def partial(self, i: int) -> "Polynomial":
        """Partial derivative with respect to coordinate i (0-based)."""
        out: dict[tuple[int, ...], float] = {}
        for k, c in self.terms.items():
            if len(k) <= i or k[i] == 0:
                continue
            nk = k[:i] + (k[i] - 1,) + k[i + 1 :]
            out[nk] = out.get(nk, 0.0) + c * k[i]
        return Polynomial(out)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate on points of shape (..., n) with n >= nvars."""
        arr = np.asarray(points, dtype=float)
        if arr.shape[-1] < self.nvars:
            raise ValueError(f"points have {arr.shape[-1]} coords, need {self.nvars}")
        out = np.zeros(arr.shape[:-1])
        for k, c in self.terms.items():
            term = np.full(arr.shape[:-1], c)
            for i, e in enumerate(k):
                if e:
                    term = term * arr[..., i] ** e
            out = out + term
        return out

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(
            abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) <= atol for k in keys
        )

    def __repr__(self) -> str:
        if not self.terms:
            return "Polynomial(0)"
        bits = []
        for k in sorted(self.terms, key=lambda t: (sum(t), t)):
            mono = "*".join(f"x{i + 1}^{e}" for i, e in enumerate(k) if e) or "1"
            bits.append(f"{self.terms[k]:+g}*{mono}")
        return f"Polynomial({' '.join(bits)})"


def expectation(f: Polynomial, alpha: AlphaParams) -> float:
    """Exact mean of the polynomial under the Dirichlet law."""
    if f.nvars > alpha.n:
        raise ValueError(f"polynomial uses {f.nvars} variables, law has {alpha.n}")
    return sum(c * monomial_expectation(alpha, k) for k, c in f.terms.items())


def variance(f: Polynomial, alpha: AlphaParams) -> float:
    """Exact variance of the polynomial under the Dirichlet law."""
    mean = expectation(f, alpha)
    return expectation(f * f, alpha) - mean * mean
