"""Truncated Taylor expansions ("jets") with complex coefficients.

A :class:`Jet` of order ``k`` stores ``c0 + c1*e + ... + ck*e**k`` and every
operation truncates at the same order.
"""

from __future__ import annotations

import cmath
import math
from numbers import Number

import numpy as np


class Jet:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("a jet needs at least one coefficient")
        self.coeffs = c

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, value, order: int) -> "Jet":
        """The jet of ``value + e``."""
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> complex:
        return complex(self.coeffs[0])

    def __len__(self):
        return self.coeffs.size

    def __getitem__(self, k):
        return self.coeffs[k]

    def __repr__(self):
        return f"Jet({self.coeffs.tolist()!r})"

    def copy(self) -> "Jet":
        return Jet(self.coeffs.copy())

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError(f"jet orders differ: {self.order} vs {other.order}")
            return other
        if isinstance(other, Number):
            return Jet.constant(other, self.order)
        return NotImplemented

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(other.coeffs - self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Number):
            return Jet(self.coeffs * other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = self.order + 1
        return Jet(np.convolve(self.coeffs, other.coeffs)[:n])

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        a = self.coeffs
        if a[0] == 0:
            raise ZeroDivisionError("reciprocal of a jet with zero constant term")
        b = np.zeros_like(a)
        b[0] = 1.0 / a[0]
        for k in range(1, a.size):
            b[k] = -np.dot(a[1:k + 1], b[k - 1::-1][:k]) / a[0]
        return Jet(b)

    def __truediv__(self, other):
        if isinstance(other, Number):
            return Jet(self.coeffs / other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.reciprocal()

    def __pow__(self, k):
        if isinstance(k, int) and k >= 0:
            out = Jet.constant(1.0, self.order)
            base = self
            while k:
                if k & 1:
                    out = out * base
                base = base * base
                k >>= 1
            return out
        if isinstance(k, int):
            return (self ** (-k)).reciprocal()
        return (self.log() * k).exp()

    # elementary functions -------------------------------------------------

    def exp(self) -> "Jet":
        a = self.coeffs
        b = np.zeros_like(a)
        b[0] = cmath.exp(a[0])
        j = np.arange(a.size)
        for k in range(1, a.size):
            b[k] = np.dot(j[1:k + 1] * a[1:k + 1], b[k - 1::-1][:k]) / k
        return Jet(b)

    def log(self) -> "Jet":
        """Logarithm; the constant term uses the principal branch."""
        a = self.coeffs
        if a[0] == 0:
            raise ValueError("log of a jet with zero constant term")
        b = np.zeros_like(a)
        b[0] = cmath.log(a[0])
        for k in range(1, a.size):
            acc = 0j
            for j in range(1, k):
                acc += j * b[j] * a[k - j]
            b[k] = (a[k] - acc / k) / a[0]
        return Jet(b)

    def sincos(self) -> tuple["Jet", "Jet"]:
        a = self.coeffs
        s = np.zeros_like(a)
        c = np.zeros_like(a)
        s[0] = cmath.sin(a[0])
        c[0] = cmath.cos(a[0])
        for k in range(1, a.size):
            ja = np.arange(1, k + 1) * a[1:k + 1]
            s[k] = np.dot(ja, c[k - 1::-1][:k]) / k
            c[k] = -np.dot(ja, s[k - 1::-1][:k]) / k
        return Jet(s), Jet(c)

    def sin(self) -> "Jet":
        return self.sincos()[0]

    def cos(self) -> "Jet":
        return self.sincos()[1]

    def compose(self, inner: "Jet") -> "Jet":
        """Evaluate ``self`` (a jet in ``e``) at ``e = inner``.

        ``inner`` must have a zero constant term so that truncation stays exact.
        """
        if abs(inner.coeffs[0]) != 0:
            raise ValueError("inner jet of a composition must vanish at 0")
        if inner.order != self.order:
            raise ValueError("jet orders differ")
        out = Jet.constant(self.coeffs[-1], self.order)
        for c in self.coeffs[-2::-1]:
            out = out * inner + c
        return out

    def derivative_values(self) -> np.ndarray:
        """Derivatives ``f^(k)(0) = k! * c_k``."""
        fact = np.array([math.factorial(k) for k in range(self.coeffs.size)], dtype=float)
        return self.coeffs * fact


def log1m_series(order: int) -> Jet:
    """Jet of ``-log(1 - w)`` at ``w = 0``."""
    c = np.zeros(order + 1, dtype=complex)
    c[1:] = 1.0 / np.arange(1, order + 1)
    return Jet(c)
