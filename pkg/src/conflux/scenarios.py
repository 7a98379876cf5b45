"""Ready-made systems: the scalar two-pole example and constant systems."""

from __future__ import annotations

import cmath
import math

import numpy as np

from .diffsystem import DifferenceSystem
from .rational import RationalMatrix


def scalar_family(lam: complex, mu: complex, h: float) -> DifferenceSystem:
    """``delta_{-h} y = -mu/(x - h - lam) y``; the limit is ``-mu/(x - lam)``."""
    return DifferenceSystem(RationalMatrix.scalar([-mu], [-(h + lam), 1.0]), h)


def scalar_limit(lam: complex, mu: complex) -> RationalMatrix:
    return RationalMatrix.scalar([-mu], [-lam, 1.0])


def scalar_exponents(lam: complex, mu: complex, h: float) -> tuple[complex, complex]:
    """Roots ``alpha_1, alpha_2`` of ``h a^2 - lam a + mu = 0`` (``alpha_1 -> mu/lam``)."""
    d = cmath.sqrt(lam * lam - 4 * mu * h)
    return (lam - d) / (2 * h), (lam + d) / (2 * h)


def scalar_connection_closed_form(lam: complex, mu: complex, h: float, x: complex) -> complex:
    """``sin(pi u) sin(pi(u - L)) / (sin(pi(u - a1)) sin(pi(u - a2)))``, ``u = x/h``."""
    a1, a2 = scalar_exponents(lam, mu, h)
    u, L = x / h, lam / h
    s = lambda z: cmath.sin(math.pi * z)
    return s(u) * s(u - L) / (s(u - a1) * s(u - a2))


def constant_system(A0, h: float) -> DifferenceSystem:
    return DifferenceSystem(RationalMatrix.constant(np.atleast_2d(A0)), h)
