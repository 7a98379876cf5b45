import cmath
import math

import mpmath
import numpy as np
import pytest
from scipy.special import loggamma

from conflux import DifferenceSystem, FactorialSeries, RationalMatrix
from conflux.factseries import Certificate, norm, rising


def gamma_ratio_oracle(nums, dens):
    """prod Gamma(nums) / prod Gamma(dens) through scipy's loggamma."""
    return complex(np.exp(sum(loggamma(complex(z)) for z in nums)
                          - sum(loggamma(complex(z)) for z in dens)))


def scalar_roots(lam, mu, h):
    d = cmath.sqrt(lam * lam - 4 * mu * h)
    return (lam - d) / (2 * h), (lam + d) / (2 * h)


def scalar_plus_oracle(lam, mu, h, x):
    a1, a2 = scalar_roots(lam, mu, h)
    u, L = x / h, lam / h
    return gamma_ratio_oracle([u, u - L], [u - a1, u - a2])


def scalar_minus_oracle(lam, mu, h, x):
    a1, a2 = scalar_roots(lam, mu, h)
    u, L = x / h, lam / h
    return gamma_ratio_oracle([1 + a1 - u, 1 + a2 - u], [1 - u, 1 + L - u])


def scalar_P_oracle(lam, mu, h, x):
    """Complement-formula form of the scalar connection coefficient."""
    a1, a2 = scalar_roots(lam, mu, h)
    u, L = x / h, lam / h
    s = lambda z: cmath.sin(math.pi * z)
    return s(u) * s(u - L) / (s(u - a1) * s(u - a2))


def scalar_system(lam, mu, h):
    return DifferenceSystem(RationalMatrix.scalar([-mu], [-(h + lam), 1.0]), h)


def random_nonresonant(rng, n, scale=0.5, gap=1e-3):
    from conflux.spectral import resonant_pairs
    while True:
        A0 = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * scale
        if not resonant_pairs(np.linalg.eigvals(A0), gap):
            return A0


def random_typed_series(rng, n, C, lam, h=1.0, N=64, A0=None):
    """Random factorial series with ||A_s|| <= C lam^{[s-1]_h}."""
    c = np.zeros((N + 1, n, n), dtype=complex)
    c[0] = random_nonresonant(rng, n) if A0 is None else A0
    for s in range(1, N + 1):
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        c[s] = M / norm(M) * C * rising(lam, s - 1, h) * rng.uniform(0.1, 1.0)
    return FactorialSeries(h, c, Certificate(C, lam))


def two_pole_rational(A0, B1, B2, p1, p2):
    """A0 + B1/(x - p1) + B2/(x - p2) as a rational matrix."""
    n = A0.shape[0]
    den = np.array([p1 * p2, -(p1 + p2), 1.0], dtype=complex)
    nums = [[np.array([A0[i, j] * p1 * p2 - B1[i, j] * p2 - B2[i, j] * p1,
                       -A0[i, j] * (p1 + p2) + B1[i, j] + B2[i, j], A0[i, j]])
             for j in range(n)] for i in range(n)]
    return RationalMatrix(nums, [[den] * n for _ in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def stirling_ratio_coeffs(c, n):
    """First ``n`` coefficients of Gamma(x)/Gamma(x - c) x^{-c} in powers of 1/x."""
    mpmath.mp.dps = 40
    cm = mpmath.mpc(c)

    def f(w):
        L = mpmath.log(1 - cm * w)
        acc = -(1 / w - cm - mpmath.mpf(1) / 2) * L - cm
        for k in range(1, 6):
            acc += (mpmath.bernoulli(2 * k) / (2 * k * (2 * k - 1))
                    * w ** (2 * k - 1) * (1 - (1 - cm * w) ** (1 - 2 * k)))
        return mpmath.exp(acc)

    return [complex(v) for v in mpmath.taylor(f, 0, n - 1, method="quad", radius=0.1)]
