"""Fuchsian difference systems ``delta_{-h} Y = A(x) Y`` and their canonical solutions.

``delta_{-h} y(x) = (x - h)(y(x) - y(x - h)) / h``.  Equivalently
``Y(x - h) = (I - h A(x)/(x - h)) Y(x)``, which drives meromorphic
continuation to the left of the half-plane where the gauge series converges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import factseries as fs
from .errors import (ContinuationError, ConvergenceError, HalfPlaneError, PoleError,
                     ResonanceError, SingularMatrixError, ValidationError)
from .factseries import Certificate, FactorialSeries, expand_rational
from .rational import (RationalMatrix, pfromroots, pmul, polymat_adjugate,
                       polymat_det, ptrim, padd, _cancel_common)
from .spectral import SpectralData, check_nonresonant, decompose, resonant_pairs, sylvester_operator
from .specfun import CharacterKind, matrix_character

POLE_RTOL = 1e-6
STEP_DET_TOL = 1e-12
SEED_TAIL = 1e-15


class DifferenceSystem:
    """``delta_{-h} Y = A Y`` with ``A`` a proper rational matrix or a factorial series.

    ``orientation == "minus"`` marks a system produced by :func:`minus_transform`;
    its plus-canonical solution, read at ``-x``, is the original's solution
    at minus infinity.
    """

    def __init__(self, A: Union[RationalMatrix, FactorialSeries], h: float,
                 orientation: str = "plus", spectral_override: Optional[SpectralData] = None,
                 order: Optional[int] = None):
        if not h > 0:
            raise ValidationError("step h must be positive")
        if orientation not in ("plus", "minus"):
            raise ValidationError(f"orientation must be plus or minus, got {orientation!r}")
        self.h = float(h)
        self.A = A
        self.orientation = orientation
        if order is None:
            order = min(fs.DEFAULT_ORDER, A.order) if isinstance(A, FactorialSeries) else fs.DEFAULT_ORDER
        self.order = int(order)
        if isinstance(A, RationalMatrix):
            A.require_proper()
            self.A0 = A.value_at_infinity()
        elif isinstance(A, FactorialSeries):
            if not math.isclose(A.h, self.h, rel_tol=1e-14):
                raise ValidationError("factorial series step differs from system step")
            self.A0 = A.coeffs[0].copy()
        else:
            raise ValidationError("A must be a RationalMatrix or a FactorialSeries")
        self.n = self.A0.shape[0]
        if spectral_override is not None and spectral_override.n != self.n:
            raise ValidationError("spectral override has the wrong dimension")
        self._spec = spectral_override
        self._series: dict[int, FactorialSeries] = {}
        self._mirror: Optional["DifferenceSystem"] = None

    def __repr__(self):
        return f"DifferenceSystem(n={self.n}, h={self.h}, orientation={self.orientation})"

    @property
    def is_rational(self) -> bool:
        return isinstance(self.A, RationalMatrix)

    def spectral(self) -> SpectralData:
        if self._spec is None:
            self._spec = decompose(self.A0)
        return self._spec

    def series(self, N: Optional[int] = None) -> FactorialSeries:
        N = self.order if N is None else N
        if N not in self._series:
            if self.is_rational:
                self._series[N] = expand_rational(self.A, self.h, N)
            else:
                if self.A.order < N:
                    raise ValidationError(f"factorial input has only {self.A.order} coefficients")
                self._series[N] = self.A.truncate(N)
        return self._series[N]

    def poles(self) -> np.ndarray:
        return self.A.pole_values() if self.is_rational else np.zeros(0, dtype=complex)

    def evaluate_A(self, x) -> np.ndarray:
        if self.is_rational:
            return self.A.evaluate(x)
        x = np.asarray(x, dtype=complex)
        ab = self.A.abscissa()
        if np.any(x.real <= ab):
            raise HalfPlaneError("factorial-series coefficient matrix evaluated outside its half-plane")
        return self.A.evaluate_many(x)

    def step_matrix(self, x) -> np.ndarray:
        """``M(x)`` with ``Y(x - h) = M(x) Y(x)``; vectorized over ``x``."""
        x = np.asarray(x, dtype=complex)
        self._check_path(x)
        A = self.evaluate_A(x)
        return np.eye(self.n) - (self.h / (x - self.h))[..., None, None] * A

    def _check_path(self, x: np.ndarray):
        x = np.atleast_1d(x)
        near_h = np.abs(x - self.h) < POLE_RTOL * max(1.0, self.h)
        if np.any(near_h):
            raise PoleError(f"step matrix singular at x = h = {self.h}")
        for p in self.poles():
            if np.any(np.abs(x - p) < POLE_RTOL * max(1.0, abs(p))):
                raise PoleError(f"path passes through the pole {p:.6g} of A")

    def check_nonresonant(self, tol: float = 1e-8):
        pairs = resonant_pairs(np.linalg.eigvals(self.A0), tol)
        if pairs:
            raise ResonanceError(
                f"A0 is resonant (eigenvalues {pairs[0][0]:.6g} and {pairs[0][1]:.6g} differ by an "
                "integer); pre-shear the system before calling")


# gauge recurrence -------------------------------------------------------------


@dataclass
class GaugeData:
    F: FactorialSeries
    majorant: np.ndarray
    lam_bar: float
    C_bar: float


def _bar_bounds(A: FactorialSeries, h: float) -> np.ndarray:
    """Bounds for ``||A_s / h^s||``; from the certificate when available."""
    N = A.order
    actual = fs.norms(A.coeffs) / h ** np.arange(N + 1)
    if A.cert is None:
        return actual
    Cb, lb = A.cert.C / h, A.cert.lam / h
    s = np.arange(1, N + 1)
    logs = np.concatenate([[0.0], np.cumsum(np.log(lb + np.arange(N - 1)))]) if lb > 0 else None
    bound = np.zeros(N + 1)
    bound[0] = actual[0]
    if lb > 0:
        bound[1:] = Cb * np.exp(logs[:N])
    else:
        bound[1] = Cb
    return np.maximum(bound, actual)


def gauge_series(sys: DifferenceSystem, N: Optional[int] = None,
                 with_data: bool = False):
    """Gauge ``F`` with ``F_0 = I`` and ``A F = delta F + (tau F) A0``.

    Solved in the ``h = 1`` frame ``Abar_s = A_s / h^s`` with the Sylvester
    operators ``phi_s(U) = (A0 + s) U - U A0`` and rescaled back.  The
    certificate comes from the majorant recurrence on norms.
    """
    N = sys.order if N is None else int(N)
    sys.check_nonresonant()
    h, n = sys.h, sys.n
    A = sys.series(N)
    Ab = A.coeffs / (h ** np.arange(N + 1))[:, None, None]
    A0 = Ab[0]
    W = fs._mult_weights(N)
    Fb = np.zeros_like(Ab)
    Fb[0] = np.eye(n)
    a0 = fs.norm(A0)
    kinv_inf = np.zeros(N + 1)
    for s in range(1, N + 1):
        K = sylvester_operator(A0, s)
        Kinv = np.linalg.inv(K)
        kinv_inf[s] = np.abs(Kinv).sum(axis=1).max()
        rhs = -Ab[s]
        if s >= 2:
            w = np.array([float(math.perm(s - 1, s - k)) for k in range(1, s)])
            rhs = rhs + np.tensordot(w, Fb[1:s], axes=(0, 0)) @ A0
            G = np.tensordot(W[s, 1:s, 1:s], Fb[1:s], axes=(1, 0))
            rhs = rhs - np.einsum("jab,jbc->ac", Ab[1:s], G)
        Fb[s] = (Kinv @ rhs.reshape(-1)).reshape(n, n)
    if not np.all(np.isfinite(Fb)):
        raise ConvergenceError("gauge coefficients overflowed; lower the truncation order")
    F_coeffs = Fb * (h ** np.arange(N + 1))[:, None, None]

    # majorant recurrence
    abar = _bar_bounds(A, h)
    b = n * kinv_inf
    s_idx = np.arange(N + 1)
    neumann = np.where(s_idx > 2 * a0, 1.0 / np.maximum(s_idx - 2 * a0, 1e-300), np.inf)
    b = np.minimum(b, neumann)
    y = np.zeros(N + 1)
    y[0] = 1.0
    for s in range(1, N + 1):
        acc = abar[s]
        if s >= 2:
            w = np.array([float(math.perm(s - 1, s - k)) for k in range(1, s)])
            acc += a0 * np.dot(w, y[1:s])
            acc += np.einsum("jl,j,l->", W[s, 1:s, 1:s], abar[1:s], y[1:s])
        y[s] = b[s] * acc
    if not np.all(np.isfinite(y)):
        raise ConvergenceError("majorant overflowed; certificate unavailable at this order")
    # growth rate from the upper half of the orders (it governs the tail);
    # C_bar then absorbs the transient at low orders
    lam_bar = 1.0
    for s in range(max(1, N // 2), N):
        if y[s] > 0:
            lam_bar = max(lam_bar, y[s + 1] / y[s] - s + 1)
    logr = np.concatenate([[0.0], np.cumsum(np.log(lam_bar + np.arange(N)))])
    with np.errstate(divide="ignore"):
        C_bar = float(np.exp(np.max(np.log(y[1:]) - logr[:N]))) if N else 0.0
    cert = Certificate(h * C_bar, h * lam_bar)
    F = FactorialSeries(h, F_coeffs, cert)
    if with_data:
        return GaugeData(F, y, lam_bar, C_bar)
    return F


# canonical solutions -----------------------------------------------------------


def _seed_abscissa(cert: Certificate, N: int, h: float, tail_tol: float) -> float:
    lo = cert.abscissa(h)
    if cert.tail(N, h, lo + 1e-12) <= tail_tol:
        return lo
    hi = max(2 * lo, lo + 1.0)
    while cert.tail(N, h, hi) > tail_tol:
        hi = 2 * hi
        if hi > 1e12:
            raise ConvergenceError("certified half-plane is impractically far to the right")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if cert.tail(N, h, mid) > tail_tol:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * hi:
            break
    return hi


@dataclass
class CanonicalSolution:
    """``F(z) e_{A0}(z)`` in the system's own variable ``z``.

    For a plus system ``z = x``.  For a minus system (the transform of an
    original system) ``z = -x``, so ``__call__(x)`` returns the original's
    canonical solution at minus infinity.
    """

    system: DifferenceSystem
    F: FactorialSeries
    spec: SpectralData
    kind: CharacterKind
    halfplane: float
    seed_abscissa: float
    meta: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return self.system.h

    def to_internal(self, x: complex) -> complex:
        return -complex(x) if self.kind is CharacterKind.MINUS else complex(x)

    def in_halfplane(self, z: complex) -> bool:
        return complex(z).real > self.halfplane

    def direct(self, z: complex) -> tuple[np.ndarray, float]:
        """Series times character at internal point ``z``; returns value and tail."""
        Fz, tail = self.F.evaluate(z)
        E = matrix_character(self.spec, CharacterKind.PLUS, self.h, z)
        return Fz @ E, tail * fs.norm(E)

    def internal(self, z: complex) -> np.ndarray:
        z = complex(z)
        if z.real >= self.seed_abscissa:
            return self.direct(z)[0]
        return continue_internal(self, z)

    def __call__(self, x) -> np.ndarray:
        return self.internal(self.to_internal(x))


def canonical_solution(sys: DifferenceSystem, N: Optional[int] = None,
                       seed_tail: float = SEED_TAIL) -> CanonicalSolution:
    """Canonical solution of ``sys`` at plus infinity in its own variable.

    Minus-oriented systems yield the original system's solution at minus
    infinity, read through ``x -> -x``.
    """
    N = sys.order if N is None else int(N)
    F = gauge_series(sys, N)
    spec = sys.spectral()
    kind = CharacterKind.MINUS if sys.orientation == "minus" else CharacterKind.PLUS
    X = _seed_abscissa(F.cert, N, sys.h, seed_tail)
    # the characters themselves are regular for Re z > 0; stay right of h as well
    X = max(X, F.cert.abscissa(sys.h) + 1e-9, 2 * sys.h)
    return CanonicalSolution(sys, F, spec, kind, F.cert.abscissa(sys.h), X,
                             {"order": N, "cert": (F.cert.C, F.cert.lam)})


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """``mats[0] @ mats[1] @ ... @ mats[-1]`` by pairwise reduction."""
    n = mats.shape[-1]
    if mats.shape[0] == 0:
        return np.eye(n, dtype=complex)
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.eye(n, dtype=complex)[None]], axis=0)
        mats = mats[0::2] @ mats[1::2]
    return mats[0]


def descend(sys: DifferenceSystem, z: complex, m: int) -> np.ndarray:
    """``M(z+h) M(z+2h) ... M(z+mh)``, mapping ``Y(z+mh)`` to ``Y(z)``."""
    if m <= 0:
        return np.eye(sys.n, dtype=complex)
    pts = z + sys.h * np.arange(1, m + 1)
    mats = sys.step_matrix(pts)
    dets = np.abs(np.linalg.det(mats))
    bad = np.nonzero(dets < STEP_DET_TOL)[0]
    if bad.size:
        raise SingularMatrixError(f"singular step matrix at z = {pts[bad[0]]:.6g}")
    return _ordered_product(mats)


def continue_internal(sol: CanonicalSolution, z: complex) -> np.ndarray:
    """Continue from the seed half-plane along the horizontal line through ``z``."""
    h = sol.h
    m = max(0, int(math.ceil((sol.seed_abscissa - z.real) / h)))
    seed = z + m * h
    try:
        Yseed = sol.direct(seed)[0]
    except HalfPlaneError as exc:
        raise ContinuationError(f"certified seed unreachable: {exc}") from exc
    return descend(sol.system, z, m) @ Yseed


def continue_solution(sol: CanonicalSolution, x: complex,
                      path: Optional[Sequence[complex]] = None) -> np.ndarray:
    """Meromorphic continuation of ``sol`` to ``x``.

    Without ``path`` the default horizontal route is used.  An explicit path
    (in the original variable) must start in the certified half-plane, end
    at ``x``, and move by ``+-h`` along the real direction; vertical jumps
    are allowed only between points of the certified half-plane.
    """
    if path is None:
        return sol(x)
    pts = [sol.to_internal(p) for p in path]
    target = sol.to_internal(x)
    if not pts or abs(pts[-1] - target) > 1e-9 * max(1.0, abs(target)):
        raise ValidationError("path must end at x")
    if not sol.in_halfplane(pts[0]):
        raise ContinuationError("path must start in the certified half-plane")
    h = sol.h
    z = pts[0]
    Y = sol.direct(z)[0]
    for nxt in pts[1:]:
        d = nxt - z
        if abs(d + h) <= 1e-9 * max(1.0, abs(z)):
            Y = sol.system.step_matrix(z) @ Y
        elif abs(d - h) <= 1e-9 * max(1.0, abs(z)):
            M = sol.system.step_matrix(nxt)
            if abs(np.linalg.det(M)) < STEP_DET_TOL:
                raise SingularMatrixError(f"singular step matrix at {nxt}")
            Y = np.linalg.solve(M, Y)
        elif abs(d.real) <= 1e-12 * max(1.0, abs(z)) and sol.in_halfplane(z) and sol.in_halfplane(nxt):
            Y = sol.direct(nxt)[0]
        else:
            raise ContinuationError(f"inadmissible path step {z} -> {nxt}")
        z = nxt
    return Y


def residual(sys: DifferenceSystem, Y: Callable[[complex], np.ndarray], x: complex) -> float:
    """Scaled defect of ``delta_{-h} Y = A Y`` at ``x`` (in ``sys``'s variable)."""
    x = complex(x)
    h = sys.h
    Yx = np.atleast_2d(Y(x))
    Yxh = np.atleast_2d(Y(x - h))
    Ax = sys.evaluate_A(x)
    r = (x - h) * (Yx - Yxh) / h - Ax @ Yx
    return fs.norm(r) / max(1.0, fs.norm(Yx))


# x -> -x -----------------------------------------------------------------------


def minus_transform(sys: DifferenceSystem) -> DifferenceSystem:
    """System for ``Z(t) = Y(-t)``.

    ``Z(t - h) = (I + h A(h - t)/t)^{-1} Z(t)`` gives
    ``B(t) = (t - h) N(t) adj(Q(t)) / det Q(t)`` with ``N = d A(h - t)``,
    ``Q = t d I + h N`` and ``d`` the common denominator.  The map is an
    involution; applying it twice returns the original object.
    """
    if sys._mirror is not None:
        return sys._mirror
    if not sys.is_rational:
        raise ValidationError("the x -> -x transform needs rational coefficients")
    h, n = sys.h, sys.n
    Ar = sys.A.substitute_affine(-1.0, h)
    d = Ar.common_denominator()
    Nm = Ar.polynomial_numerators(d)
    td = pmul([0.0, 1.0], d)
    Q = [[padd(h * Nm[i][j], td if i == j else np.zeros(1)) for j in range(n)] for i in range(n)]
    det = polymat_det(Q)
    adj = polymat_adjugate(Q)
    nums = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = np.zeros(1, dtype=complex)
            for k in range(n):
                acc = padd(acc, pmul(Nm[i][k], adj[k][j]))
            row.append(pmul([-h, 1.0], acc))
        nums.append(row)
    dens = [[det.copy() for _ in range(n)] for _ in range(n)]
    B = RationalMatrix(nums, dens).simplify()
    orientation = "minus" if sys.orientation == "plus" else "plus"
    out = DifferenceSystem(B, h, orientation, sys._spec, sys.order)
    out._mirror = sys
    sys._mirror = out
    return out
