"""Matrix factorial series ``sum_s A_s x^{-[s]_h}`` and their (C, lambda) certificates.

``x^{-[s]_h} = 1 / (x (x+h) ... (x+(s-1)h))`` and ``lam^{[k]_h}`` is the rising
product ``lam (lam+h) ... (lam+(k-1)h)``.  A certificate ``(C, lam)`` asserts
``||A_s|| <= C lam^{[s-1]_h}`` for every ``s >= 1`` in the max-row-sum norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional

import numpy as np

from .errors import HalfPlaneError, SingularMatrixError, ValidationError
from .rational import RationalMatrix, _to_complex

DEFAULT_ORDER = 64


def norm(M) -> float:
    """Max row-sum norm, the project-wide algebra norm."""
    M = np.asarray(M)
    return float(np.abs(M).sum(axis=-1).max(axis=-1)) if M.ndim >= 2 else float(np.abs(M).max())


def norms(coeffs) -> np.ndarray:
    return np.abs(coeffs).sum(axis=-1).max(axis=-1)


def rising(lam: float, k: int, h: float) -> float:
    """``lam^{[k]_h} = lam (lam + h) ... (lam + (k-1) h)``."""
    return float(np.prod(lam + h * np.arange(k))) if k > 0 else 1.0


def factorial_basis(x, N: int, h: float) -> np.ndarray:
    """Values ``x^{-[s]_h}`` for ``s = 0..N``; leading axis is ``s``."""
    x = np.asarray(x, dtype=complex)
    out = np.empty((N + 1,) + x.shape, dtype=complex)
    out[0] = 1.0
    for s in range(1, N + 1):
        out[s] = out[s - 1] / (x + (s - 1) * h)
    return out


@lru_cache(maxsize=32)
def _mult_weights(N: int) -> np.ndarray:
    """``W[s, j, l] = c^{(k)}_{j,l}`` with ``k = s - j - l`` (zero elsewhere), h = 1."""
    W = np.zeros((N + 1, N + 1, N + 1))
    for s in range(2, N + 1):
        for j in range(1, s):
            for l in range(1, s - j + 1):
                k = s - j - l
                W[s, j, l] = float(math.comb(j + k - 1, k) * math.perm(l + k - 1, k))
    W.setflags(write=False)
    return W


def mult_weights(N: int, h: float) -> np.ndarray:
    """Multiplication weights ``c^{(k)}_{j,l} h^k`` for step ``h``."""
    W = _mult_weights(N)
    if h == 1.0:
        return W
    s = np.arange(N + 1)
    k = s[:, None, None] - s[None, :, None] - s[None, None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        hk = np.where(W != 0, float(h) ** np.clip(k, 0, None), 0.0)
    return W * hk


@lru_cache(maxsize=32)
def stirling1_table(N: int) -> tuple:
    """Unsigned Stirling numbers of the first kind ``[m, k]`` as exact ints."""
    S = [[0] * (N + 1) for _ in range(N + 1)]
    S[0][0] = 1
    for m in range(1, N + 1):
        for k in range(1, m + 1):
            S[m][k] = S[m - 1][k - 1] + (m - 1) * S[m - 1][k]
    return tuple(tuple(r) for r in S)


def psi_weights(N: int, h: float) -> np.ndarray:
    """``psi[s, i]``: factorial coefficients of ``x^{-i}``, i.e.
    ``x^{-i} = sum_s psi[s, i] x^{-[s]_h}`` for ``i >= 1``."""
    S = stirling1_table(max(N - 1, 0))
    psi = np.zeros((N + 1, N + 1))
    for s in range(1, N + 1):
        for i in range(1, s + 1):
            psi[s, i] = float(S[s - 1][i - 1]) * h ** (s - i)
    return psi


@dataclass(frozen=True)
class Certificate:
    C: float
    lam: float

    def bound(self, s: int, h: float) -> float:
        return self.C * rising(self.lam, s - 1, h)

    def tail(self, N: int, h: float, X: float) -> float:
        """``C * sum_{s > N} lam^{[s-1]_h} / X^{[s]_h}``, summed in closed form."""
        if self.C == 0 or (self.lam == 0 and N >= 1):
            return 0.0
        if X <= self.lam:
            return math.inf
        k = np.arange(N)
        logr = np.sum(np.log(self.lam + k * h) - np.log(X + k * h)) if N > 0 else 0.0
        return float(self.C * math.exp(logr) / (X - self.lam))

    def abscissa(self, h: float) -> float:
        """Evaluation requires ``Re x`` strictly beyond this value."""
        return self.lam + h


@dataclass(frozen=True)
class FactorialSeries:
    h: float
    coeffs: np.ndarray
    cert: Optional[Certificate] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None, None]
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] == 0:
            raise ValidationError("coefficients must have shape (N+1, n, n)")
        if not self.h > 0:
            raise ValidationError("step h must be positive")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "h", float(self.h))
        if self.cert is not None and not isinstance(self.cert, Certificate):
            object.__setattr__(self, "cert", Certificate(float(self.cert[0]), float(self.cert[1])))

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, M, h: float, N: int = DEFAULT_ORDER) -> "FactorialSeries":
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        c = np.zeros((N + 1,) + M.shape, dtype=complex)
        c[0] = M
        return cls(h, c, Certificate(0.0, 0.0))

    @classmethod
    def identity(cls, n: int, h: float, N: int = DEFAULT_ORDER) -> "FactorialSeries":
        return cls.constant(np.eye(n), h, N)

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def truncate(self, N: int) -> "FactorialSeries":
        return FactorialSeries(self.h, self.coeffs[:N + 1], self.cert)

    def with_cert(self, cert) -> "FactorialSeries":
        return FactorialSeries(self.h, self.coeffs, cert, dict(self.meta))

    # evaluation ---------------------------------------------------------

    def abscissa(self) -> float:
        return self.cert.abscissa(self.h) if self.cert is not None else -math.inf

    def evaluate(self, x, check: bool = True) -> tuple[np.ndarray, float]:
        """Partial sum at ``x`` and a bound on the neglected tail.

        With a certificate the tail is rigorous and ``Re x`` must exceed
        ``lam + h``; without one the tail is the size of the last term.
        """
        x = complex(x)
        if check and self.cert is not None and x.real <= self.abscissa():
            raise HalfPlaneError(
                f"Re x = {x.real:g} is not beyond the convergence abscissa {self.abscissa():g}")
        b = factorial_basis(x, self.order, self.h)
        value = np.tensordot(b, self.coeffs, axes=(0, 0))
        if self.cert is not None:
            tail = self.cert.tail(self.order, self.h, x.real)
        else:
            tail = float(norm(self.coeffs[-1]) * abs(b[-1]))
        return value, tail

    def evaluate_many(self, xs) -> np.ndarray:
        """Partial sums at an array of points (no gating); shape ``xs.shape + (n, n)``."""
        xs = np.asarray(xs, dtype=complex)
        b = factorial_basis(xs, self.order, self.h)
        return np.tensordot(np.moveaxis(b, 0, -1), self.coeffs, axes=(-1, 0))

    def __call__(self, x):
        return self.evaluate(x)[0]

    def check_certificate(self, rtol: float = 1e-9) -> bool:
        if self.cert is None:
            return True
        nrm = norms(self.coeffs[1:])
        bounds = np.array([self.cert.bound(s, self.h) for s in range(1, self.order + 1)])
        return bool(np.all(nrm <= bounds * (1 + rtol) + 1e-300))

    # serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "n": self.n,
            "coeffs": [[[[float(z.real), float(z.imag)] for z in row] for row in M]
                       for M in self.coeffs],
            "cert": None if self.cert is None else [self.cert.C, self.cert.lam],
        }

    @classmethod
    def from_json(cls, data) -> "FactorialSeries":
        try:
            h = float(data["h"])
            coeffs = np.array([[[_to_complex(z) for z in row] for row in M]
                               for M in data["coeffs"]], dtype=complex)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed factorial series: {exc}") from exc
        n = int(data.get("n", coeffs.shape[1]))
        if coeffs.ndim != 3 or coeffs.shape[1:] != (n, n):
            raise ValidationError("coefficient matrices do not match n")
        cert = data.get("cert")
        return cls(h, coeffs, None if cert is None else Certificate(float(cert[0]), float(cert[1])))


# operations ------------------------------------------------------------------


def _check_compatible(A: FactorialSeries, B: FactorialSeries):
    if A.n != B.n:
        raise ValidationError(f"dimension mismatch {A.n} vs {B.n}")
    if not math.isclose(A.h, B.h, rel_tol=1e-14):
        raise ValidationError(f"step mismatch {A.h} vs {B.h}")


def product_coefficients(A: np.ndarray, B: np.ndarray, h: float) -> np.ndarray:
    """Coefficient arrays of the product of two series of equal length."""
    N = A.shape[0] - 1
    W = mult_weights(N, h)
    C = np.empty_like(A)
    C[0] = A[0] @ B[0]
    for s in range(1, N + 1):
        acc = A[0] @ B[s] + A[s] @ B[0]
        if s >= 2:
            G = np.tensordot(W[s, 1:s, 1:s], B[1:s], axes=(1, 0))
            acc = acc + np.einsum("jab,jbc->ac", A[1:s], G)
        C[s] = acc
    return C


def multiply(A: FactorialSeries, B: FactorialSeries) -> FactorialSeries:
    """Product series (Nörlund multiplication), truncated to the shorter order."""
    _check_compatible(A, B)
    N = min(A.order, B.order)
    C = product_coefficients(A.coeffs[:N + 1], B.coeffs[:N + 1], A.h)
    cert = None
    if A.cert is not None and B.cert is not None:
        a0, b0 = norm(A.coeffs[0]), norm(B.coeffs[0])
        C1, l1, C2, l2 = A.cert.C, A.cert.lam, B.cert.C, B.cert.lam
        lam = l1 + l2 + max(a0, b0)
        delta = lam - max(l1, l2)
        if delta <= 0:
            lam += A.h
            delta = A.h
        cert = Certificate(a0 * C2 + b0 * C1 + C1 * C2 / delta, lam)
    return FactorialSeries(A.h, C, cert, {"effective_order": N})


def translate(A: FactorialSeries) -> FactorialSeries:
    """Series of ``x -> A(x - h)``."""
    N, h = A.order, A.h
    B = A.coeffs.copy()
    for s in range(2, N + 1):
        k = np.arange(1, s)
        w = np.array([float(math.perm(s - 1, s - kk)) for kk in k]) * h ** (s - k)
        B[s] = A.coeffs[s] + np.tensordot(w, A.coeffs[1:s], axes=(0, 0))
    cert = None if A.cert is None else Certificate(A.cert.C, A.cert.lam + h)
    return FactorialSeries(h, B, cert)


def invert(A: FactorialSeries) -> FactorialSeries:
    """Multiplicative inverse by forward substitution in the product formula."""
    A0 = A.coeffs[0]
    if np.linalg.cond(A0) > 1e14:
        raise SingularMatrixError("constant term is singular; series is not invertible")
    A0i = np.linalg.inv(A0)
    N, h = A.order, A.h
    W = mult_weights(N, h)
    E = np.zeros_like(A.coeffs)
    E[0] = A0i
    for s in range(1, N + 1):
        acc = A.coeffs[s] @ E[0]
        if s >= 2:
            G = np.tensordot(W[s, 1:s, 1:s], E[1:s], axes=(1, 0))
            acc = acc + np.einsum("jab,jbc->ac", A.coeffs[1:s], G)
        E[s] = -A0i @ acc
    cert = None
    if A.cert is not None:
        ni = norm(A0i)
        Ce = ni * A.cert.C
        cert = Certificate(ni * Ce, A.cert.lam + Ce)
    return FactorialSeries(h, E, cert)


def expand_rational(R: RationalMatrix, h: float, N: int = DEFAULT_ORDER,
                    radius_factor: float = 1.2, radius_shift: float = 0.1,
                    samples: int = 2048, safety: float = 1.05) -> FactorialSeries:
    """Factorial expansion of a proper rational matrix.

    Power-series coefficients ``At_i`` at infinity are mapped through
    ``A_s = sum_i [s-1, i-1] h^{s-i} At_i`` with unsigned Stirling numbers, the
    coefficients of ``(-log(1-w))^{i-1}/(i-1)!`` scaled by ``(s-1)!``.
    The certificate is ``(C r, r)`` with ``r`` beyond every pole and ``C`` the
    sampled supremum of ``||R||`` on ``|x| = r`` times a safety factor.
    """
    R.require_proper()
    h = float(h)
    At = R.power_series(N)
    psi = psi_weights(N, h)
    coeffs = np.zeros_like(At)
    coeffs[0] = At[0]
    coeffs[1:] = np.tensordot(psi[1:, 1:], At[1:], axes=(1, 0))
    poles = R.pole_values()
    if poles.size == 0:
        coeffs[1:] = 0.0
        return FactorialSeries(h, coeffs, Certificate(0.0, 0.0))
    rho = float(np.max(np.abs(poles)))
    r = radius_factor * rho + radius_shift
    theta = 2 * np.pi * (np.arange(samples) + 0.5) / samples
    vals = R.evaluate(r * np.exp(1j * theta))
    C = safety * float(norms(vals).max())
    return FactorialSeries(h, coeffs, Certificate(C * r, r))


@dataclass
class CoefficientLimit:
    limit: np.ndarray
    hs: np.ndarray
    samples: np.ndarray
    diverging: bool


def coefficient_limits(family: Mapping[float, FactorialSeries], s: int) -> CoefficientLimit:
    """Linear-in-h Richardson extrapolation of ``A_s^{(h)}`` as ``h -> 0``."""
    if len(family) == 0:
        raise ValidationError("empty family")
    hs = np.array(sorted(family.keys(), reverse=True), dtype=float)
    samples = np.array([family[h].coeffs[s] for h in hs])
    if hs.size == 1:
        return CoefficientLimit(samples[0], hs, samples, False)
    h1, h2 = hs[-2], hs[-1]
    limit = (h1 * samples[-1] - h2 * samples[-2]) / (h1 - h2)
    diffs = norms(np.diff(samples, axis=0))
    diverging = bool(diffs.size >= 2 and diffs[-1] > diffs[-2] * (1 + 1e-9) and diffs[-1] > 1e-13)
    return CoefficientLimit(limit, hs, samples, diverging)
