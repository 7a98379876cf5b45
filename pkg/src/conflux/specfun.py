"""Complex log-Gamma and the Gamma-built characters solving constant systems.

The character of exponent ``c`` and step ``h`` solves
``(x - h) * (e(x) - e(x - h)) / h = c * e(x)``.  Two families are provided:

* ``CharacterKind.PLUS``:  ``h**c * Gamma(x/h) / Gamma(x/h - c)``, tending to
  ``x**c`` as ``h -> 0`` off the negative real axis;
* ``CharacterKind.MINUS``: ``h**c * Gamma(1 + c - x/h) / Gamma(1 - x/h)``,
  tending to ``(-x)**c`` off the positive real axis.

The logarithms ``l^(k)`` are the Taylor coefficients of the character in its
exponent; they are produced by :func:`log_char_jet` with jet arithmetic.
"""

from __future__ import annotations

import cmath
import enum
import math

import numpy as np

from .errors import PoleError
from .jet import Jet

LANCZOS_G = 7.0
LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)

# |Im z| above which sin(pi z) is evaluated in factored form to avoid overflow
_BIG_IMAG = 10.0


class CharacterKind(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def parse(cls, value) -> "CharacterKind":
        if isinstance(value, cls):
            return value
        v = str(value).strip().lower()
        if v in ("plus", "+", "+inf", "plusinfinity", "plus_infinity"):
            return cls.PLUS
        if v in ("minus", "-", "-inf", "minusinfinity", "minus_infinity"):
            return cls.MINUS
        raise ValueError(f"unknown character kind {value!r}")


def _is_pole(z: complex) -> bool:
    """True when ``z`` is a non-positive integer to rounding."""
    if z.real > 0.5:
        return False
    n = round(z.real)
    tol = 4 * np.finfo(float).eps * max(1.0, abs(z))
    return abs(z.imag) <= tol and abs(z.real - n) <= tol


def _sinpi(z: complex) -> complex:
    n = round(z.real)
    s = cmath.sin(math.pi * (z - n))
    return -s if n % 2 else s


def _cospi(z: complex) -> complex:
    n = round(z.real)
    c = cmath.cos(math.pi * (z - n))
    return -c if n % 2 else c


def _log1p(w: complex) -> complex:
    u = 1.0 + w
    if u == 1.0:
        return complex(w)
    return cmath.log(u) * w / (u - 1.0)


def _lanczos_sum(z1):
    s = LANCZOS_P[0]
    for k in range(1, len(LANCZOS_P)):
        s = s + LANCZOS_P[k] / (z1 + k)
    return s


def _lanczos_log(z: complex) -> complex:
    z1 = z - 1.0
    t = z1 + LANCZOS_G + 0.5
    return HALF_LOG_2PI + (z1 + 0.5) * cmath.log(t) - t + cmath.log(_lanczos_sum(z1))


def _stirling_log(z: complex) -> complex:
    zi = 1.0 / z
    zi2 = zi * zi
    corr = zi * (1 / 12 - zi2 * (1 / 360 - zi2 * (1 / 1260 - zi2 / 1680)))
    return (z - 0.5) * cmath.log(z) - z + HALF_LOG_2PI + corr


def _log_sinpi_any_branch(z: complex) -> complex:
    """log(sin(pi z)) up to a multiple of 2*pi*i, overflow-free."""
    w = math.pi * z
    if w.imag > 0:
        q = cmath.exp(2j * w)
        return -1j * w + _log1p(-q) + complex(-math.log(2.0), math.pi / 2)
    q = cmath.exp(-2j * w)
    return 1j * w + _log1p(-q) + complex(-math.log(2.0), -math.pi / 2)


def log_gamma(z) -> complex:
    """Principal log-Gamma, analytic on the plane cut along ``(-inf, 0]``.

    Lanczos (g = 7, 9 terms) for ``Re z >= 1/2``; reflection otherwise, with
    the imaginary part fixed so the result is continuous across the seam.
    """
    z = complex(z)
    if _is_pole(z):
        raise PoleError(f"log_gamma has a pole at {z}")
    if z.real >= 0.5:
        return _lanczos_log(z)
    rest = log_gamma(1.0 - z)
    if abs(z.imag) <= _BIG_IMAG:
        shift = math.copysign(2.0 * math.pi, z.imag) * math.floor(0.5 * z.real + 0.25)
        return complex(LOG_PI, shift) - cmath.log(_sinpi(z)) - rest
    cand = LOG_PI - _log_sinpi_any_branch(z) - rest
    target = _stirling_log(z).imag
    k = round((target - cand.imag) / (2.0 * math.pi))
    return cand + 2j * math.pi * k


def lgamma_ratio(a, b) -> complex:
    """``log Gamma(a) - log Gamma(b)`` modulo ``2*pi*i``.

    When both arguments lie in ``Re >= 1/2`` the large Lanczos terms are
    differenced analytically, so the result keeps full relative accuracy even
    for ``|a|, |b|`` in the thousands.
    """
    a = complex(a)
    b = complex(b)
    if _is_pole(a):
        raise PoleError(f"Gamma has a pole at {a}")
    if _is_pole(b):
        raise PoleError(f"Gamma has a pole at {b}")
    if a.real >= 0.5 and b.real >= 0.5:
        a1 = a - 1.0
        b1 = b - 1.0
        tb = b1 + LANCZOS_G + 0.5
        d = a - b
        return ((a1 + 0.5) * _log1p(d / tb) + d * cmath.log(tb) - d
                + cmath.log(_lanczos_sum(a1) / _lanczos_sum(b1)))
    if a.real < 0.5 and b.real < 0.5:
        return _log_sinpi_ratio(b, a) + lgamma_ratio(1.0 - b, 1.0 - a)
    return log_gamma(a) - log_gamma(b)


def _log_sinpi_ratio(p: complex, q: complex) -> complex:
    """``log(sin(pi p) / sin(pi q))`` modulo ``2*pi*i``."""
    if p.imag > _BIG_IMAG and q.imag > _BIG_IMAG:
        return (-1j * math.pi * (p - q) + _log1p(-cmath.exp(2j * math.pi * p))
                - _log1p(-cmath.exp(2j * math.pi * q)))
    if p.imag < -_BIG_IMAG and q.imag < -_BIG_IMAG:
        return (1j * math.pi * (p - q) + _log1p(-cmath.exp(-2j * math.pi * p))
                - _log1p(-cmath.exp(-2j * math.pi * q)))
    return cmath.log(_sinpi(p) / _sinpi(q))


def gamma_ratio(a, b) -> complex:
    """``Gamma(a) / Gamma(b)``, including the removable cases at poles."""
    a = complex(a)
    b = complex(b)
    pa, pb = _is_pole(a), _is_pole(b)
    if pa and pb:
        # a - b is an integer; sin(pi b)/sin(pi a) -> (-1)**(a - b)
        sign = -1.0 if round((a - b).real) % 2 else 1.0
        return sign * cmath.exp(lgamma_ratio(1.0 - b, 1.0 - a))
    if pa:
        raise PoleError(f"Gamma ratio is singular: numerator pole at {a}")
    if pb:
        return 0j
    return cmath.exp(lgamma_ratio(a, b))


# jets -----------------------------------------------------------------------

def _lgamma_taylor_tail(z0: complex, order: int) -> np.ndarray:
    """Coefficients 1..order of ``log Gamma(z0 + e)`` in powers of ``e``."""
    out = np.zeros(order + 1, dtype=complex)
    if order == 0:
        return out
    if z0.real >= 0.5:
        z1 = Jet.variable(z0 - 1.0, order)
        t = z1 + (LANCZOS_G + 0.5)
        s = Jet.constant(LANCZOS_P[0], order)
        for k in range(1, len(LANCZOS_P)):
            s = s + LANCZOS_P[k] / (z1 + k)
        L = (z1 + 0.5) * t.log() - t + s.log()
        out[1:] = L.coeffs[1:]
        return out
    # log sin(pi(z0 + e)) - log sin(pi z0) = log(cos(pi e) + cot(pi z0) sin(pi e))
    w = math.pi * z0
    if abs(z0.imag) <= _BIG_IMAG:
        cot = _cospi(z0) / _sinpi(z0)
    elif w.imag > 0:
        q = cmath.exp(2j * w)
        cot = 1j * (q + 1.0) / (q - 1.0)
    else:
        q = cmath.exp(-2j * w)
        cot = 1j * (1.0 + q) / (1.0 - q)
    eps = Jet.variable(0.0, order) * math.pi
    s, c = eps.sincos()
    logsin_tail = (c + s * cot).log()
    refl = _lgamma_taylor_tail(1.0 - z0, order)
    signs = (-1.0) ** np.arange(order + 1)
    out[1:] = -logsin_tail.coeffs[1:] - signs[1:] * refl[1:]
    return out


def _rgamma_jet(z0: complex, order: int, direction: float) -> Jet:
    """Jet of ``1/Gamma(z0 + direction*e)`` valid at and near poles."""
    eps = Jet.variable(0.0, order) * direction
    s = ((eps + z0) * math.pi).sin()
    tail = _lgamma_taylor_tail(1.0 - z0, order)
    signs = (-direction) ** np.arange(order + 1)
    lg = Jet(tail * signs)
    lg.coeffs[0] = log_gamma(1.0 - z0)
    return s * lg.exp() / math.pi


def _char_arguments(kind: CharacterKind, c: complex, h: float, x: complex):
    u = x / h
    if kind is CharacterKind.PLUS:
        return u, u - c
    return 1.0 + c - u, 1.0 - u


def log_char_jet(kind, c, h, x, k: int) -> Jet:
    """Jet whose entry ``j`` is the logarithm ``l_c^(j,h)(x)`` for ``j <= k``.

    Entry 0 is the character itself.  Entries come from exponentiating the
    jet of ``(c + e) log h + log Gamma(.) - log Gamma(.)`` in ``e``.
    """
    kind = CharacterKind.parse(kind)
    c = complex(c)
    x = complex(x)
    h = float(h)
    if h <= 0:
        raise ValueError("step h must be positive")
    a, b = _char_arguments(kind, c, h, x)
    # jet of c' log h with c' = c + e
    hc = (Jet.variable(c, k) * math.log(h)).exp()
    pa, pb = _is_pole(a), _is_pole(b)
    if kind is CharacterKind.PLUS:
        # numerator Gamma(a) fixed, denominator Gamma(b - e)
        if pa and not (pb and k == 0):
            raise PoleError(f"character singular at x={x} (Gamma pole at {a})")
        if pa:
            return Jet([h ** c * gamma_ratio(a, b)])
        if pb:
            return hc * _rgamma_jet(b, k, -1.0) * cmath.exp(log_gamma(a))
        signs = (-1.0) ** np.arange(k + 1)
        tail = -_lgamma_taylor_tail(b, k) * signs
    else:
        # numerator Gamma(a + e), denominator Gamma(b) fixed
        if pa and not (pb and k == 0):
            raise PoleError(f"character singular at x={x} (Gamma pole at {a})")
        if pa:
            return Jet([h ** c * gamma_ratio(a, b)])
        if pb:
            return Jet.constant(0.0, k)
        tail = _lgamma_taylor_tail(a, k)
    L = Jet(tail)
    L.coeffs[0] = lgamma_ratio(a, b)
    return hc * L.exp()


def character(kind, c, h, x) -> complex:
    """Scalar character ``e_c^(h)(x)`` of the given kind."""
    kind = CharacterKind.parse(kind)
    c = complex(c)
    a, b = _char_arguments(kind, c, float(h), complex(x))
    return complex(cmath.exp(c * math.log(h)) * gamma_ratio(a, b))


def jordan_block_character(kind, c, size: int, h, x) -> np.ndarray:
    """Upper-triangular Toeplitz block built from ``l^(0..size-1)``."""
    jet = log_char_jet(kind, c, h, x, size - 1)
    T = np.zeros((size, size), dtype=complex)
    for j in range(size):
        idx = np.arange(size - j)
        T[idx, idx + j] = jet.coeffs[j]
    return T


def matrix_character(spec, kind, h, x) -> np.ndarray:
    """``P diag(blocks) P^-1`` with each block filled by the logarithms.

    ``spec`` is any object exposing ``P`` (basis) and ``blocks`` (a list of
    ``(eigenvalue, size)`` pairs) such as :class:`conflux.spectral.SpectralData`.
    """
    P = np.asarray(spec.P, dtype=complex)
    n = P.shape[0]
    D = np.zeros((n, n), dtype=complex)
    i = 0
    for c, size in spec.blocks:
        D[i:i + size, i:i + size] = jordan_block_character(kind, c, size, h, x)
        i += size
    if i != n:
        raise ValueError("block sizes do not add up to the matrix dimension")
    Pinv = getattr(spec, "P_inv", None)
    if Pinv is None:
        Pinv = np.linalg.inv(P)
    return P @ D @ Pinv
