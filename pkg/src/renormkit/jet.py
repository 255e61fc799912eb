"""Truncated multivariate Taylor polynomials ("jets").

A :class:`Jet` over ``n`` variables of order ``K`` stores the coefficients
``c[alpha] = f^(alpha)(x0) / alpha!`` for every multi-index with ``|alpha| <= K``.
Coefficients carry arbitrary trailing array axes, so one jet can represent a
batch of expansions (one per sampled configuration) or a vector of coordinates.

Products are computed through a precomputed pair table and reduced with
``np.add.reduceat``; elementary functions are lifted by composing their
univariate Taylor series with the nilpotent part of the argument.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .errors import JetOrderCapError

DEFAULT_ORDER_CAP = 8


def _multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    out = [tuple([0] * n)]
    for deg in range(1, order + 1):
        block = []
        for combo in combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            block.append(tuple(alpha))
        # graded reverse-lexicographic within a degree reads most naturally as x0 first
        block.sort(reverse=True)
        out.extend(block)
    return out


class JetSpace:
    """Monomial basis and multiplication table for ``n`` variables up to total degree ``order``."""

    def __init__(self, n: int, order: int):
        if n < 0 or order < 0:
            raise ValueError("jet space needs n >= 0 and order >= 0")
        self.n = n
        self.order = order
        self.exponents = np.array(_multi_indices(n, order), dtype=int).reshape(-1, n)
        self.size = len(self.exponents)
        self.degree = self.exponents.sum(axis=1)
        self.index = {tuple(int(a) for a in row): k for k, row in enumerate(self.exponents)}
        self.factorial = np.array(
            [math.prod(math.factorial(int(a)) for a in row) for row in self.exponents], dtype=float
        )
        ii, jj, kk = [], [], []
        for i, ai in enumerate(self.exponents):
            for j, aj in enumerate(self.exponents):
                if self.degree[i] + self.degree[j] <= order:
                    ii.append(i)
                    jj.append(j)
                    kk.append(self.index[tuple(int(a) for a in ai + aj)])
        perm = np.argsort(kk, kind="stable")
        self._mul_i = np.array(ii, dtype=int)[perm]
        self._mul_j = np.array(jj, dtype=int)[perm]
        kk_sorted = np.array(kk, dtype=int)[perm]
        self._starts = np.searchsorted(kk_sorted, np.arange(self.size))

    def __repr__(self) -> str:
        return f"JetSpace(n={self.n}, order={self.order})"

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.size == 1:
            return a * b
        prod = a[self._mul_i] * b[self._mul_j]
        return np.add.reduceat(prod, self._starts, axis=0)


@lru_cache(maxsize=None)
def jet_space(n: int, order: int, cap: int = DEFAULT_ORDER_CAP) -> JetSpace:
    if order > cap:
        raise JetOrderCapError(f"jet order {order} exceeds cap {cap}")
    return JetSpace(n, order)


class Jet:
    """Truncated Taylor polynomial with array-valued coefficients (leading axis = monomials)."""

    __slots__ = ("space", "coeffs")
    __array_priority__ = 100

    def __init__(self, space: JetSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[:1] != (space.size,):
            raise ValueError(f"coefficient array must lead with {space.size} monomials, got {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, space: JetSpace, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((space.size,) + value.shape)
        c[0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space: JetSpace, i: int, value=0.0) -> "Jet":
        """The coordinate function ``x_i`` expanded around ``value``."""
        jet = cls.constant(space, value)
        if space.order >= 1:
            alpha = [0] * space.n
            alpha[i] = 1
            jet.coeffs[space.index[tuple(alpha)]] = 1.0
        return jet

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.space, self.coeffs[(slice(None),) + idx])

    def coefficient(self, alpha) -> np.ndarray:
        return self.coeffs[self.space.index[tuple(int(a) for a in alpha)]]

    def derivative(self, alpha) -> np.ndarray:
        k = self.space.index[tuple(int(a) for a in alpha)]
        return self.coeffs[k] * self.space.factorial[k]

    # arithmetic -----------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets live in different spaces")
            return other
        return Jet.constant(self.space, other)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.coeffs + self._coerce(other).coeffs)
        shape = np.broadcast_shapes(self.shape, np.shape(other))
        c = np.broadcast_to(self.coeffs, (self.space.size,) + shape).copy()
        c[0] = c[0] + other
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            other = self._coerce(other)
            return Jet(self.space, self.space.multiply(self.coeffs, other.coeffs))
        return Jet(self.space, self.coeffs * np.asarray(other, dtype=float))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.power(-1.0)
        return Jet(self.space, self.coeffs / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.power(-1.0) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(self.space, np.ones(self.shape))
            base = self
            k = int(p)
            while k:
                if k & 1:
                    out = out * base
                k >>= 1
                if k:
                    base = base * base
            return out
        return self.power(float(p))

    def sum(self, axis=-1) -> "Jet":
        axis = axis if axis < 0 else axis + 1
        return Jet(self.space, self.coeffs.sum(axis=axis))

    def dot(self, other: "Jet") -> "Jet":
        """Sum over the last trailing axis of the elementwise product."""
        return (self * other).sum(axis=-1)

    # elementary functions -------------------------------------------------

    def _compose(self, series: list[np.ndarray]) -> "Jet":
        """Evaluate sum_k series[k] * (self - self.value)^k, truncated."""
        K = self.space.order
        nil = Jet(self.space, self.coeffs.copy())
        nil.coeffs[0] = 0.0
        out = Jet.constant(self.space, series[0])
        power = None
        for k in range(1, K + 1):
            power = nil if power is None else power * nil
            out = out + power * series[k]
        return out

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e / math.factorial(k) for k in range(self.space.order + 1)])

    def power(self, p: float) -> "Jet":
        a0 = self.value
        if np.any(a0 <= 0) and not float(p).is_integer():
            raise ArithmeticError("non-integer power of a jet with non-positive value")
        series = []
        binom = 1.0
        for k in range(self.space.order + 1):
            series.append(binom * a0 ** (p - k))
            binom *= (p - k) / (k + 1)
        return self._compose(series)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def log(self) -> "Jet":
        a0 = self.value
        series = [np.log(a0)]
        for k in range(1, self.space.order + 1):
            series.append((-1) ** (k + 1) / (k * a0**k))
        return self._compose(series)

    # truncation and evaluation -------------------------------------------

    def truncate(self, order: int) -> "Jet":
        c = self.coeffs.copy()
        c[self.space.degree > order] = 0.0
        return Jet(self.space, c)

    def evaluate(self, h) -> np.ndarray:
        """Value of the polynomial at displacement ``h`` (leading axis = variables)."""
        h = np.asarray(h, dtype=float)
        if h.shape[:1] != (self.space.n,):
            raise ValueError(f"displacement needs {self.space.n} components")
        total = np.zeros(np.broadcast_shapes(self.shape, h.shape[1:]))
        for k, alpha in enumerate(self.space.exponents):
            mono = np.ones(h.shape[1:])
            for i, a in enumerate(alpha):
                if a:
                    mono = mono * h[i] ** a
            total = total + self.coeffs[k] * mono
        return total

    def __repr__(self) -> str:
        return f"Jet(n={self.space.n}, order={self.space.order}, shape={self.shape})"


def variables(space: JetSpace, values) -> list[Jet]:
    """One variable jet per coordinate, expanded around ``values``."""
    return [Jet.variable(space, i, v) for i, v in enumerate(values)]
