"""End-to-end self test on the scalar two-pole example (lam = i, mu = 0.1).

Each check mirrors one acceptance criterion in a reduced form that runs in a
few seconds; one ``PASS``/``FAIL`` line per criterion is written to ``stream``.
"""

from __future__ import annotations

import cmath
import math
import sys
import time

import numpy as np

from . import connection as cn
from . import factseries as fs
from .diffsystem import DifferenceSystem, canonical_solution, residual
from .rational import RationalMatrix
from .scenarios import (scalar_connection_closed_form, scalar_family, scalar_limit,
                        constant_system)
from .specfun import character


def _check(name, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure of that criterion only
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"criterion": name, "passed": bool(ok), "detail": detail,
            "seconds": round(time.perf_counter() - t0, 3)}


def run_selftest(cfg: dict, rng: np.random.Generator, stream=sys.stdout) -> list[dict]:
    lam = complex(*cfg.get("lambda", [0.0, 1.0]))
    mu = complex(*cfg.get("mu", [0.1, 0.0]))
    hs = [0.2, 0.1, 0.05, 0.025]
    samples: list = []

    def c1():
        cm = cn.ConnectionMatrix(scalar_family(lam, mu, 1.0))
        xs = rng.uniform(-3, 3, 50) + 1j * rng.uniform(-2, 3, 50)
        worst = 0.0
        for x in xs:
            P = cm(x)[0, 0]
            worst = max(worst, abs(P / scalar_connection_closed_form(lam, mu, 1.0, x) - 1))
            samples.append((cm, x))
        return worst <= 1e-8, f"max rel err {worst:.2e}"

    state = {}

    def c2():
        At = scalar_limit(lam, mu)
        strips = cn.strip_partition(At)
        lims, _ = cn.strip_limits({h: scalar_family(lam, mu, h) for h in hs}, strips)
        state["lims"], state["strips"] = lims, strips
        target = [1.0, cmath.exp(-2j * math.pi * mu / lam), 1.0]
        errs = [abs(L.limit[0, 0] - t) for L, t in zip(lims, target)]
        orders = [L.order for L in lims]
        ok = max(errs) <= 1e-3 and all(o >= 0.8 for o in orders)
        return ok, f"errors {[f'{e:.1e}' for e in errs]}, orders {[f'{o:.2f}' for o in orders]}"

    def c3():
        At = scalar_limit(lam, mu)
        rep = cn.monodromy(state["lims"], state["strips"])
        d = max(abs(cn.ode_monodromy_oracle(At, j)[0, 0] - rep.monodromies[j][0, 0])
                for j in range(2))
        A0 = np.diag([0.3, -0.45 + 0.2j])
        M = cn.ode_monodromy_oracle(RationalMatrix.constant(A0), 0)
        d2 = float(np.abs(M - np.diag(np.exp(2j * np.pi * np.diag(A0)))).max())
        return max(d, d2) <= 1e-4, f"scalar {d:.1e}, constant {d2:.1e}"

    def c4():
        A = fs.expand_rational(RationalMatrix.scalar([1], [0, 0, 1]), 1.0, 20)
        exact = all(A.coeffs[s, 0, 0] == math.factorial(s - 2) for s in range(2, 21))
        psi = fs.psi_weights(40, 1.0)
        return exact and bool(np.all(psi >= 0)), "1/x^2 exact, psi >= 0"

    def c5():
        A = RationalMatrix([[[0.2], [0.3]], [[-0.1], [0.45]]],
                           [[[1.0], [-0.5j, 1.0]], [[0.3, 1.0], [1.0]]])
        sol = canonical_solution(DifferenceSystem(A, 1.0))
        X = sol.F.cert.lam + 5
        r = max(residual(sol.system, sol, X + 1j * y) for y in (-2.0, 0.0, 3.0))
        return r <= 1e-9, f"residual {r:.1e}"

    def c6():
        c = 0.3 + 0.2j
        xs = np.geomspace(20, 2000, 8)
        f = np.array([abs(character("plus", c, 1.0, x) * x ** (-c) - 1) for x in xs])
        slope = np.polyfit(np.log(xs), np.log(f), 1)[0]
        return slope <= -0.9, f"N=1 slope {slope:.3f}"

    def c7():
        c = 0.5
        K = [complex(a, b) for a in (1.0, 2.0, 3.0) for b in (-1.0, 1.0)]
        e = [max(abs(character("plus", c, h, x) - x ** c) for x in K) for h in (0.1, 0.05)]
        ratio = e[0] / e[1]
        return 1.6 <= ratio <= 2.4, f"halving ratio {ratio:.3f}"

    def c8():
        worst_p, worst_d = 0.0, math.inf
        for cm, x in samples:
            P = cm(x)
            worst_p = max(worst_p, float(np.abs(cm(x + cm.h) - P).max()))
            worst_d = min(worst_d, abs(np.linalg.det(P)))
        return worst_p <= 1e-9 and worst_d > 1e-12, f"periodicity {worst_p:.1e}, min |det| {worst_d:.2e}"

    checks = [("1 scalar connection matrix", c1), ("2 confluence limits", c2),
              ("3 monodromy cross-validation", c3), ("4 factorial-series algebra", c4),
              ("5 gauge recurrence", c5), ("6 asymptotics", c6),
              ("7 character confluence", c7), ("8 periodicity and det", c8)]
    results = []
    for name, fn in checks:
        r = _check(name, fn)
        results.append(r)
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {name}: {r['detail']}", file=stream)
    return results
