"""Connection matrices, their confluence h -> 0 on strips, and monodromy.

The limit system is the differential system ``x Y' = At(x) Y``; its
canonical solution at infinity is ``G(x) x^{At_0}`` (Frobenius), continued
horizontally from the right so that it lives on the plane slit along the
half-lines ``z_j - R+`` through the poles.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.linalg

from .diffsystem import (CanonicalSolution, DifferenceSystem, canonical_solution,
                         minus_transform)
from .errors import (ContinuationError, ConvergenceError, HypothesisError, PoleError, ResonanceError,
                     SingularMatrixError, ValidationError)
from .rational import RationalMatrix
from .spectral import resonant_pairs, sylvester_operator

DEFAULT_H_SEQUENCE = (0.2, 0.1, 0.05, 0.025)
# matrix strip limits carry large O(h) constants; nine levels keep Neville
# extrapolation ahead of the conditioning of P_{j+1}
MONODROMY_H_SEQUENCE = tuple(0.2 * 2.0 ** -k for k in range(9))
GOLDEN_SHIFT = 0.6180339887498949


def thread_count() -> int:
    """Worker count from ``CONFLUX_THREADS`` (0 or unset means automatic)."""
    try:
        k = int(os.environ.get("CONFLUX_THREADS", "0"))
    except ValueError:
        k = 0
    if k <= 0:
        k = min(8, os.cpu_count() or 1)
    return k


# connection matrices ---------------------------------------------------------


class ConnectionMatrix:
    """``P(x) = e_plus(x)^-1 e_minus(x)`` with both canonical solutions cached."""

    def __init__(self, sys: DifferenceSystem, N: Optional[int] = None):
        if sys.orientation != "plus":
            raise ValidationError("connection matrices start from a plus-oriented system")
        self.system = sys
        self.plus = canonical_solution(sys, N)
        self.minus = canonical_solution(minus_transform(sys), N)

    @property
    def h(self) -> float:
        return self.system.h

    def __call__(self, x: complex) -> np.ndarray:
        Yp = self.plus(x)
        Ym = self.minus(x)
        if abs(np.linalg.det(Yp)) < 1e-300 or np.linalg.cond(Yp) > 1e14:
            raise SingularMatrixError(f"e_plus is singular at x = {x}")
        return np.linalg.solve(Yp, Ym)

    def sample(self, xs: Sequence[complex]) -> np.ndarray:
        return np.array([self(x) for x in xs])


def connection_matrix(sys: DifferenceSystem, x: complex, N: Optional[int] = None) -> np.ndarray:
    return ConnectionMatrix(sys, N)(x)


def grid_csv(xs: Sequence[complex], Ps: np.ndarray) -> str:
    """CSV with columns ``x_re, x_im`` then row-major ``P`` entries as re/im pairs."""
    n = Ps.shape[-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["x_re", "x_im"]
    for i in range(n):
        for j in range(n):
            head += [f"P{i}{j}_re", f"P{i}{j}_im"]
    w.writerow(head)
    for x, P in zip(xs, Ps):
        row = [repr(float(complex(x).real)), repr(float(complex(x).imag))]
        for z in P.reshape(-1):
            row += [repr(float(z.real)), repr(float(z.imag))]
        w.writerow(row)
    return buf.getvalue()


# resolvent products --------------------------------------------------------------


def _ordered_product_left(mats: np.ndarray) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` (later factors on the left)."""
    n = mats.shape[-1]
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.eye(n, dtype=complex)[None]], axis=0)
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def resolvent(coef: Callable[[np.ndarray], np.ndarray], a: float, b: float,
              n0: int = 64, tol: float = 1e-8, max_level: int = 13) -> tuple[np.ndarray, dict]:
    """Propagator of ``Y' = coef(s) Y`` on ``[a, b]``.

    Ordered products ``(I + coef(s_k) ds) ... (I + coef(s_0) ds)`` with step
    doubling and Romberg extrapolation (the left-point product has an error
    expansion in integer powers of ``ds``).  Stops when two successive
    diagonal Romberg entries differ by less than ``tol``.
    """
    table: list[list[np.ndarray]] = []
    prev = None
    for level in range(max_level + 1):
        m = n0 * 2 ** level
        ds = (b - a) / m
        s = a + ds * np.arange(m)
        C = coef(s)
        n = C.shape[-1]
        mats = np.eye(n) + C * ds
        row = [_ordered_product_left(mats)]
        for j in range(1, level + 1):
            row.append(row[j - 1] + (row[j - 1] - table[-1][j - 1]) / (2 ** j - 1))
        table.append(row)
        best = row[-1]
        if prev is not None:
            change = float(np.abs(best - prev).max()) / max(1.0, float(np.abs(best).max()))
            if change < tol:
                return best, {"steps": m, "levels": level + 1, "change": change}
        prev = best
    raise ConvergenceError(f"resolvent products did not stabilize (last change {change:.3g})")


# Frobenius solution of the limit system ----------------------------------------


class FrobeniusSolution:
    """``e_At(x) = G(x) x^{At_0}`` on the horizontally slit plane."""

    def __init__(self, At: RationalMatrix, N: int = 64, radius_factor: float = 3.0):
        At.require_proper()
        self.At = At
        self.n = At.n
        coeffs = At.power_series(N)
        A0 = coeffs[0]
        pairs = resonant_pairs(np.linalg.eigvals(A0))
        if pairs:
            raise ResonanceError("limit system is resonant at infinity")
        G = np.zeros_like(coeffs)
        G[0] = np.eye(self.n)
        for s in range(1, N + 1):
            rhs = -np.einsum("kab,kbc->ac", coeffs[s:0:-1], G[:s])
            K = sylvester_operator(A0, s)
            G[s] = np.linalg.solve(K, rhs.reshape(-1)).reshape(self.n, self.n)
        self.G = G
        self.A0 = A0
        poles = At.pole_values()
        rho = float(np.max(np.abs(poles))) if poles.size else 0.0
        self.radius = radius_factor * max(rho, 1.0)
        self.poles = poles

    def series(self, x: complex) -> np.ndarray:
        w = 1.0 / complex(x)
        acc = self.G[-1]
        for Gs in self.G[-2::-1]:
            acc = acc * w + Gs
        return acc @ scipy.linalg.expm(self.A0 * np.log(complex(x)))

    def coef(self, x) -> np.ndarray:
        """``At(x)/x``, the ODE coefficient in ``d/dx``."""
        x = np.asarray(x, dtype=complex)
        return self.At.evaluate(x) / x[..., None, None]

    def __call__(self, x: complex) -> np.ndarray:
        x = complex(x)
        if abs(x) >= self.radius and x.real >= 0:
            return self.series(x)
        y = x.imag
        xs = complex(math.sqrt(max(self.radius ** 2 - y * y, 0.0)), y)
        if any(abs(p.imag - y) < 1e-9 and x.real <= p.real <= xs.real
               for p in list(self.poles) + [0j]):
            raise PoleError(f"horizontal line through {x} meets a pole of the limit system")
        L = xs.real - x.real
        U, _ = resolvent(lambda t: -self.coef(xs - t), 0.0, L, tol=1e-12)
        return U @ self.series(xs)


def frobenius_solution(At: RationalMatrix, N: int = 64) -> FrobeniusSolution:
    return FrobeniusSolution(At, N)


# strips --------------------------------------------------------------------------


@dataclass
class StripDecomposition:
    poles: list
    bounds: list
    midpoints: list
    second_points: list

    @property
    def count(self) -> int:
        return len(self.midpoints)

    def to_json(self) -> dict:
        return {"poles": [[p.real, p.imag] for p in self.poles],
                "midpoints": [[p.real, p.imag] for p in self.midpoints]}


def strip_partition(At: RationalMatrix, tol: float = 1e-9) -> StripDecomposition:
    """Poles of the limit system plus 0, sorted by imaginary part, and one
    sample point per horizontal band."""
    finite = [p for p in At.pole_values() if abs(p) > tol]
    for p in finite:
        if abs(p.imag) <= tol:
            raise HypothesisError(f"pole {p:.6g} is real; horizontal strips are undefined")
    pts = sorted([0j] + finite, key=lambda z: z.imag)
    for a, b in zip(pts, pts[1:]):
        if abs(a.imag - b.imag) <= tol:
            raise HypothesisError(f"poles {a:.6g} and {b:.6g} share an imaginary part")
    ims = [p.imag for p in pts]
    bounds = [(-math.inf, ims[0])] + list(zip(ims, ims[1:])) + [(ims[-1], math.inf)]
    mids, seconds = [], []
    for lo, hi in bounds:
        if math.isinf(lo):
            m, half = hi - 1.0, 1.0
        elif math.isinf(hi):
            m, half = lo + 1.0, 1.0
        else:
            m, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        mids.append(complex(0.0, m))
        seconds.append(complex(GOLDEN_SHIFT, m + 0.25 * half))
    return StripDecomposition(pts, bounds, mids, seconds)


@dataclass
class StripLimit:
    limit: np.ndarray
    samples: np.ndarray
    second_limit: np.ndarray
    order: float
    converged: bool
    constancy: float


def _richardson(hs: np.ndarray, vals: np.ndarray, mode: str = "linear") -> np.ndarray:
    """Extrapolate to ``h = 0``: ``linear`` uses the last two samples, ``full``
    runs Neville's scheme through every sample (polynomial in ``h``)."""
    if mode == "linear":
        h1, h2 = hs[-2], hs[-1]
        return (h1 * vals[-1] - h2 * vals[-2]) / (h1 - h2)
    if mode != "full":
        raise ValidationError(f"unknown extrapolation mode {mode!r}")
    T = list(vals)
    m = len(T)
    for k in range(1, m):
        T = [(hs[i] * T[i + 1] - hs[i + k] * T[i]) / (hs[i] - hs[i + k]) for i in range(m - k)]
    return T[0]


def _order(hs: np.ndarray, vals: np.ndarray, floor: float = 1e-10) -> tuple[float, bool]:
    if len(hs) < 3:
        return math.nan, True
    d = np.array([np.abs(vals[k + 1] - vals[k]).max() for k in range(len(hs) - 1)])
    if d[-1] <= floor:
        return math.inf, True
    contracting = bool(np.all(d[1:] < d[:-1]))
    order = math.log(d[-2] / d[-1]) / math.log((hs[-3] - hs[-2]) / (hs[-2] - hs[-1]))
    return float(order), contracting


def _periodic_eval(cm: ConnectionMatrix, x: complex, h: float, tries: int = 2) -> np.ndarray:
    """``cm(x)``; on an obstruction retry at ``x + k h/3``.  The strip limit is
    constant along the strip, so the shift only moves the O(h) error."""
    try:
        return cm(x)
    except (PoleError, SingularMatrixError, ContinuationError) as first:
        for k in range(1, tries + 1):
            try:
                return cm(x + k * h / 3)
            except (PoleError, SingularMatrixError, ContinuationError):
                continue
        raise first


def _connection_for(sys: DifferenceSystem, N):
    return ConnectionMatrix(sys, N)


def strip_limits(family: Mapping[float, DifferenceSystem], strips: StripDecomposition,
                 N: Optional[int] = None, workers: Optional[int] = None,
                 extrapolation: str = "linear") -> tuple[list, dict]:
    """Extrapolated ``P_j`` per strip plus diagnostics.

    ``extrapolation="full"`` is needed when the O(h) constant is large
    (matrix systems); pair it with a longer geometric h-sequence.
    """
    hs = np.array(sorted(family.keys(), reverse=True), dtype=float)
    if hs.size < 2:
        raise ValidationError("strip limits need at least two step sizes")
    workers = workers or thread_count()
    pts = list(strips.midpoints) + list(strips.second_points)

    def job(h):
        cm = _connection_for(family[h], N)
        return [_periodic_eval(cm, x, h) for x in pts]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(job, hs))
    else:
        rows = [job(h) for h in hs]
    vals = np.array(rows)  # (len(hs), 2 * strips, n, n)
    r = strips.count
    limits, diags = [], {"h_sequence": hs.tolist(), "extrapolation": extrapolation,
                         "strips": []}
    for j in range(r):
        first = vals[:, j]
        second = vals[:, r + j]
        lim = _richardson(hs, first, extrapolation)
        lim2 = _richardson(hs, second, extrapolation)
        order, contracting = _order(hs, first)
        constancy = float(np.abs(lim - lim2).max())
        limits.append(StripLimit(lim, first, lim2, order, contracting, constancy))
        diags["strips"].append({"order": order, "converged": contracting,
                                "constancy": constancy})
    return limits, diags


# monodromy --------------------------------------------------------------------------


@dataclass
class MonodromyReport:
    poles: list
    monodromies: list
    strip_limits: list
    h_sequence: list
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def mat(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(M)]
        return {"poles": [[p.real, p.imag] for p in self.poles],
                "strip_limits": [mat(P) for P in self.strip_limits],
                "monodromies": [mat(M) for M in self.monodromies],
                "h_sequence": list(self.h_sequence),
                "diagnostics": self.diagnostics}


def monodromy(limits: Sequence, strips: StripDecomposition,
              h_sequence: Sequence[float] = (), diagnostics: Optional[dict] = None) -> MonodromyReport:
    """``M_j = P_j P_{j+1}^-1`` for each pole ``z_j`` (in the ``e_At`` basis)."""
    mats = [np.atleast_2d(L.limit if isinstance(L, StripLimit) else L) for L in limits]
    if len(mats) != strips.count:
        raise ValidationError("one limit per strip is required")
    out = []
    for j in range(len(strips.poles)):
        Pn = mats[j + 1]
        if abs(np.linalg.det(Pn)) < 1e-12 or np.linalg.cond(Pn) > 1e12:
            raise SingularMatrixError(f"strip limit {j + 2} is singular")
        out.append(mats[j] @ np.linalg.inv(Pn))
    return MonodromyReport(list(strips.poles), out, mats, list(h_sequence), diagnostics or {})


def ode_monodromy_oracle(At: RationalMatrix, pole_index: int, base: Optional[complex] = None,
                         radius: Optional[float] = None, N: int = 64,
                         tol: float = 1e-8) -> np.ndarray:
    """Monodromy around ``z_j`` (poles of ``At`` plus 0, sorted by imaginary
    part) from a counterclockwise loop integrated by resolvent products and
    expressed in the Frobenius basis at the base point."""
    strips = strip_partition(At)
    z = strips.poles[pole_index]
    others = [p for k, p in enumerate(strips.poles) if k != pole_index]
    gap = min([abs(p - z) for p in others], default=2.0)
    rho = 0.5 * gap if radius is None else float(radius)
    if rho >= gap:
        raise PoleError("loop radius reaches another pole")
    if base is None:
        theta0 = 0.0
    else:
        d = complex(base) - z
        if abs(abs(d) - rho) > 1e-9 * max(1.0, rho):
            raise ValidationError("base point must lie on the loop")
        theta0 = math.atan2(d.imag, d.real)
    b = z + rho * complex(math.cos(theta0), math.sin(theta0))
    frob = FrobeniusSolution(At, N)

    def coef(theta):
        e = np.exp(1j * theta)
        x = z + rho * e
        return frob.coef(x) * (1j * rho * e)[..., None, None]

    U, _ = resolvent(coef, theta0, theta0 + 2 * math.pi, tol=tol * 1e-2)
    E = frob(b)
    return np.linalg.solve(E, U @ E)
