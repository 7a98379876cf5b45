"""Polynomials (ascending coefficient arrays) and matrices of rational functions."""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import PoleError, ValidationError

# polynomial helpers ---------------------------------------------------------


def ptrim(p, tol: float = 0.0) -> np.ndarray:
    """Drop trailing (high-degree) coefficients with modulus <= tol * max|p|."""
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    if p.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(p))
    if scale == 0:
        return np.zeros(1, dtype=complex)
    k = p.size
    while k > 1 and abs(p[k - 1]) <= tol * scale:
        k -= 1
    return p[:k].copy()


def pdeg(p, tol: float = 0.0) -> int:
    p = ptrim(p, tol)
    if p.size == 1 and p[0] == 0:
        return -1
    return p.size - 1


def padd(p, q) -> np.ndarray:
    n = max(len(p), len(q))
    out = np.zeros(n, dtype=complex)
    out[:len(p)] += p
    out[:len(q)] += q
    return out


def psub(p, q) -> np.ndarray:
    return padd(p, -np.asarray(q, dtype=complex))


def pmul(p, q) -> np.ndarray:
    return np.convolve(np.asarray(p, dtype=complex), np.asarray(q, dtype=complex))


def peval(p, x):
    """Horner evaluation; ``x`` may be an array."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros_like(x) + p[-1]
    for c in p[-2::-1]:
        out = out * x + c
    return out


def pcompose_affine(p, a: complex, b: complex) -> np.ndarray:
    """Coefficients of ``p(a*t + b)`` in ``t``."""
    lin = np.array([b, a], dtype=complex)
    out = np.array([p[-1]], dtype=complex)
    for c in p[-2::-1]:
        out = pmul(out, lin)
        out[0] += c
    return out


def proots(p, tol: float = 1e-14) -> np.ndarray:
    p = ptrim(p, tol)
    if p.size <= 1:
        return np.zeros(0, dtype=complex)
    return np.roots(p[::-1]).astype(complex)


def pdeflate(p, r: complex) -> np.ndarray:
    """Quotient of ``p`` by ``(t - r)`` (the remainder is discarded)."""
    p = np.asarray(p, dtype=complex)
    n = p.size - 1
    if n < 1:
        raise ValueError("cannot deflate a constant")
    q = np.zeros(n, dtype=complex)
    acc = p[-1]
    for k in range(n - 1, -1, -1):
        q[k] = acc
        acc = p[k] + acc * r
    return q


def pfromroots(roots: Sequence[complex], lead: complex = 1.0) -> np.ndarray:
    out = np.array([lead], dtype=complex)
    for r in roots:
        out = pmul(out, [-r, 1.0])
    return out


def cluster_roots(roots, tol: float) -> list[tuple[complex, int]]:
    """Group numerically coincident roots; returns ``(mean, count)`` pairs."""
    groups: list[list[complex]] = []
    for r in roots:
        for g in groups:
            c = np.mean(g)
            if abs(r - c) <= tol * max(1.0, abs(c)):
                g.append(r)
                break
        else:
            groups.append([r])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def _to_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValidationError(f"complex numbers are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    return complex(v)


def poly_from_json(data) -> np.ndarray:
    if not isinstance(data, (list, tuple)) or len(data) == 0:
        raise ValidationError("polynomial must be a non-empty coefficient list")
    return np.array([_to_complex(v) for v in data], dtype=complex)


def poly_to_json(p) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(p, dtype=complex)]


# polynomial matrices --------------------------------------------------------


def polymat_det(M: list[list[np.ndarray]]) -> np.ndarray:
    """Determinant of a small matrix of polynomials by memoized cofactors."""
    n = len(M)

    @lru_cache(maxsize=None)
    def minor(rows: tuple, cols: tuple) -> bytes:
        if len(rows) == 1:
            return np.asarray(M[rows[0]][cols[0]], dtype=complex).tobytes()
        acc = np.zeros(1, dtype=complex)
        r0 = rows[0]
        for k, c in enumerate(cols):
            sub = np.frombuffer(minor(rows[1:], cols[:k] + cols[k + 1:]), dtype=complex)
            term = pmul(M[r0][c], sub)
            acc = padd(acc, term) if k % 2 == 0 else psub(acc, term)
        return acc.tobytes()

    return np.frombuffer(minor(tuple(range(n)), tuple(range(n))), dtype=complex).copy()


def polymat_adjugate(M: list[list[np.ndarray]]) -> list[list[np.ndarray]]:
    n = len(M)
    if n == 1:
        return [[np.ones(1, dtype=complex)]]
    adj = [[None] * n for _ in range(n)]
    for i, j in itertools.product(range(n), range(n)):
        sub = [[M[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
        d = polymat_det(sub)
        adj[j][i] = d if (i + j) % 2 == 0 else -d
    return adj


# rational matrices ----------------------------------------------------------


class RationalMatrix:
    """n x n matrix whose entries are ratios of complex polynomials."""

    def __init__(self, nums, dens=None, pole_tol: float = 1e-7):
        nums = [[np.atleast_1d(np.asarray(p, dtype=complex)) for p in row] for row in nums]
        n = len(nums)
        if n == 0 or any(len(row) != n for row in nums):
            raise ValidationError("rational matrix must be square and non-empty")
        if dens is None:
            dens = [[np.ones(1, dtype=complex) for _ in range(n)] for _ in range(n)]
        dens = [[np.atleast_1d(np.asarray(p, dtype=complex)) for p in row] for row in dens]
        if len(dens) != n or any(len(row) != n for row in dens):
            raise ValidationError("numerator and denominator grids differ in shape")
        for row in dens:
            for d in row:
                if not np.any(d != 0):
                    raise ValidationError("zero denominator polynomial")
        self.n = n
        self.nums = [[ptrim(p) for p in row] for row in nums]
        self.dens = [[ptrim(p) for p in row] for row in dens]
        self.pole_tol = pole_tol
        self._poles = None
        self._mirror = None

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, M) -> "RationalMatrix":
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        return cls([[np.array([M[i, j]]) for j in range(M.shape[1])] for i in range(M.shape[0])])

    @classmethod
    def scalar(cls, num, den) -> "RationalMatrix":
        return cls([[num]], [[den]])

    @classmethod
    def from_json(cls, data) -> "RationalMatrix":
        entries = data["entries"] if isinstance(data, dict) else data
        nums, dens = [], []
        for row in entries:
            nums.append([poly_from_json(e["num"]) for e in row])
            dens.append([poly_from_json(e.get("den", [1.0])) for e in row])
        return cls(nums, dens)

    def to_json(self) -> dict:
        return {"entries": [[{"num": poly_to_json(self.nums[i][j]),
                              "den": poly_to_json(self.dens[i][j])}
                             for j in range(self.n)] for i in range(self.n)]}

    # queries ------------------------------------------------------------

    def is_proper(self) -> bool:
        return all(pdeg(self.nums[i][j], 1e-14) <= pdeg(self.dens[i][j], 1e-14)
                   for i in range(self.n) for j in range(self.n))

    def require_proper(self):
        for i in range(self.n):
            for j in range(self.n):
                if pdeg(self.nums[i][j], 1e-14) > pdeg(self.dens[i][j], 1e-14):
                    raise ValidationError(
                        f"entry ({i},{j}) is not proper: not holomorphic at infinity")

    def poles(self) -> list[tuple[complex, int]]:
        """Distinct denominator roots with their maximal multiplicity."""
        if self._poles is None:
            best: list[tuple[complex, int]] = []
            for row in self.dens:
                for d in row:
                    for r, m in cluster_roots(proots(d), 1e-6):
                        for k, (q, mq) in enumerate(best):
                            if abs(r - q) <= self.pole_tol * max(1.0, abs(q)):
                                best[k] = (q, max(m, mq))
                                break
                        else:
                            best.append((r, m))
            self._poles = best
        return list(self._poles)

    def pole_values(self) -> np.ndarray:
        return np.array([p for p, _ in self.poles()], dtype=complex)

    def evaluate(self, x) -> np.ndarray:
        """Values at ``x`` (scalar or array); shape ``x.shape + (n, n)``."""
        x = np.asarray(x, dtype=complex)
        out = np.empty(x.shape + (self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                d = peval(self.dens[i][j], x)
                scale = np.maximum(np.max(np.abs(self.dens[i][j])), 1.0) * np.maximum(
                    1.0, np.abs(x)) ** max(len(self.dens[i][j]) - 1, 0)
                if np.any(np.abs(d) <= 1e-15 * scale):
                    raise PoleError(f"rational entry ({i},{j}) has a pole near {x}")
                out[..., i, j] = peval(self.nums[i][j], x) / d
        return out

    __call__ = evaluate

    def value_at_infinity(self) -> np.ndarray:
        self.require_proper()
        out = np.zeros((self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                num, den = self.nums[i][j], self.dens[i][j]
                dd = pdeg(den, 1e-14)
                if pdeg(num, 1e-14) == dd:
                    out[i, j] = num[dd] / den[dd]
        return out

    def power_series(self, order: int) -> np.ndarray:
        """Coefficients ``At[0..order]`` with ``R(x) = sum At[i] x**-i``."""
        self.require_proper()
        out = np.zeros((order + 1, self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                num = ptrim(self.nums[i][j], 1e-14)
                den = ptrim(self.dens[i][j], 1e-14)
                if not np.any(num != 0):
                    continue
                dn, dd = num.size - 1, den.size - 1
                # R = w**(dd-dn) * rev(num)(w) / rev(den)(w) with w = 1/x
                a = np.zeros(order + 1, dtype=complex)
                rn = num[::-1]
                a[:min(rn.size, order + 1)] = rn[:order + 1]
                rd = np.zeros(order + 1, dtype=complex)
                rd[:min(den.size, order + 1)] = den[::-1][:order + 1]
                q = np.zeros(order + 1, dtype=complex)
                for k in range(order + 1):
                    q[k] = (a[k] - np.dot(rd[1:k + 1], q[k - 1::-1][:k])) / rd[0]
                shift = dd - dn
                out[shift:, i, j] = q[:order + 1 - shift]
        return out

    # transformations ----------------------------------------------------

    def substitute_affine(self, a: complex, b: complex) -> "RationalMatrix":
        """Entries of ``R(a*t + b)`` as rational functions of ``t``."""
        return RationalMatrix(
            [[pcompose_affine(p, a, b) for p in row] for row in self.nums],
            [[pcompose_affine(p, a, b) for p in row] for row in self.dens])

    def scale(self, c: complex) -> "RationalMatrix":
        return RationalMatrix([[p * c for p in row] for row in self.nums], self.dens)

    def simplify(self, tol: float = 1e-8) -> "RationalMatrix":
        """Cancel numerically common roots and normalize denominators to be monic."""
        nums, dens = [], []
        for i in range(self.n):
            rn, rd = [], []
            for j in range(self.n):
                num, den = _cancel_common(self.nums[i][j], self.dens[i][j], tol)
                rn.append(num)
                rd.append(den)
            nums.append(rn)
            dens.append(rd)
        return RationalMatrix(nums, dens)

    def common_denominator(self, tol: float = 1e-6) -> np.ndarray:
        """Monic lcm of all denominators, built from clustered roots."""
        roots = []
        for r, m in self.poles():
            roots.extend([r] * m)
        return pfromroots(roots)

    def polynomial_numerators(self, d: np.ndarray) -> list[list[np.ndarray]]:
        """Polynomials ``d * R_ij`` (exact division up to rounding)."""
        out = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                q = pmul(d, self.nums[i][j])
                den = ptrim(self.dens[i][j], 1e-14)
                lead = den[-1]
                for r in proots(den):
                    q = pdeflate(q, r)
                row.append(q / lead)
            out.append(row)
        return out

    def __repr__(self):
        return f"RationalMatrix(n={self.n}, poles={[p for p, _ in self.poles()]})"


def _cancel_common(num, den, tol):
    num = ptrim(num, 1e-14)
    den = ptrim(den, 1e-14)
    if not np.any(num != 0):
        return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    rn = list(proots(num))
    rd = list(proots(den))
    changed = True
    while changed and rn and rd:
        changed = False
        for a in rn:
            dists = [abs(a - b) for b in rd]
            k = int(np.argmin(dists))
            if dists[k] <= tol * max(1.0, abs(a)):
                num = pdeflate(num, a)
                den = pdeflate(den, rd[k])
                rn.remove(a)
                rd.pop(k)
                changed = True
                break
    lead = den[-1]
    return num / lead, den / lead
