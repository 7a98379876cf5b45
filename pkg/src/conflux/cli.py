"""Command-line front end: ``conflux {solve,connect,conflue,monodromy,selftest}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Optional

import numpy as np

from . import connection as cn
from . import factseries as fs
from .diffsystem import DifferenceSystem, canonical_solution, minus_transform, residual
from .errors import (ConfluxError, ContinuationError, HypothesisError, PoleError,
                     SingularMatrixError, ValidationError)
from .factseries import FactorialSeries
from .rational import RationalMatrix, _to_complex, poly_from_json
from .spectral import SpectralData

COMMANDS = ("solve", "connect", "conflue", "monodromy", "selftest")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

DEFAULT_TOLS = {
    "seed_tail": 1e-15,
    "periodicity": 1e-9,
    "determinant": 1e-12,
    "oracle": 1e-4,
    "limit": 1e-3,
}


# config parsing -------------------------------------------------------------


def _cx(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _mat(M) -> list:
    return [[_cx(z) for z in row] for row in np.atleast_2d(M)]


def parse_system(data: dict, order: Optional[int] = None) -> DifferenceSystem:
    """Build a system from ``{n, h, orientation, A, spectral_override}``."""
    if not isinstance(data, dict):
        raise ValidationError("system must be a JSON object")
    try:
        h = float(data["h"])
        Aspec = data["A"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"system needs h and A: {exc}") from exc
    if "rational" in Aspec:
        A = RationalMatrix.from_json(Aspec["rational"])
    elif "factorial" in Aspec:
        A = FactorialSeries.from_json(Aspec["factorial"])
    else:
        raise ValidationError("A must be {rational: ...} or {factorial: ...}")
    if "n" in data and int(data["n"]) != A.n:
        raise ValidationError(f"declared n={data['n']} but A has dimension {A.n}")
    spec = data.get("spectral_override")
    spec = SpectralData.from_json(spec) if spec is not None else None
    kwargs = {} if order is None else {"order": order}
    sys_ = DifferenceSystem(A, h, "plus", spec, **kwargs)
    if data.get("orientation", "plus") == "minus":
        sys_ = minus_transform(sys_)
    return sys_


def _hpoly_rational(entries, h: float) -> RationalMatrix:
    """Entries whose x-coefficients are polynomials in h (ascending)."""
    def poly(p):
        out = []
        for c in p:
            if isinstance(c, list) and c and isinstance(c[0], list):
                coeffs = [_to_complex(v) for v in c]
                out.append(sum(v * h ** k for k, v in enumerate(coeffs)))
            else:
                out.append(_to_complex(c))
        return np.array(out, dtype=complex)
    nums = [[poly(e["num"]) for e in row] for row in entries]
    dens = [[poly(e.get("den", [1.0])) for e in row] for row in entries]
    return RationalMatrix(nums, dens)


def family_instantiate(template: dict, h: float, order: Optional[int] = None) -> DifferenceSystem:
    """Concrete system of an h-family.

    Templates: ``scaled`` (``A(x/h)``), ``fixed`` (``A(x)``), ``explicit``
    (a list of ``{h, system}``) and ``hpoly`` (coefficients polynomial in h).
    """
    kind = template.get("template", template.get("type"))
    kwargs = {} if order is None else {"order": order}
    if kind == "scaled":
        R = RationalMatrix.from_json(template["A"]["rational"])
        return DifferenceSystem(R.substitute_affine(1.0 / h, 0.0).simplify(), h, **kwargs)
    if kind == "fixed":
        R = RationalMatrix.from_json(template["A"]["rational"])
        return DifferenceSystem(R, h, **kwargs)
    if kind == "explicit":
        for item in template.get("systems", []):
            if math.isclose(float(item["h"]), h, rel_tol=1e-12):
                cfg = dict(item["system"])
                cfg["h"] = h
                return parse_system(cfg, order)
        raise ValidationError(f"explicit family has no member with h={h}")
    if kind == "hpoly":
        return DifferenceSystem(_hpoly_rational(template["A"]["entries"], h), h, **kwargs)
    raise ValidationError(f"unsupported family template {kind!r}")


def family_limit(template: dict) -> RationalMatrix:
    """The limit coefficient matrix of a family template."""
    if "limit" in template:
        return RationalMatrix.from_json(template["limit"]["rational"])
    kind = template.get("template", template.get("type"))
    if kind == "fixed":
        return RationalMatrix.from_json(template["A"]["rational"])
    if kind == "scaled":
        return RationalMatrix.constant(RationalMatrix.from_json(template["A"]["rational"]).value_at_infinity())
    if kind == "hpoly":
        return _hpoly_rational(template["A"]["entries"], 0.0).simplify()
    raise ValidationError("explicit families must provide a 'limit' rational matrix")


def parse_grid(data) -> list[complex]:
    if data is None:
        return [complex(0.5, 0.5)]
    if isinstance(data, dict):
        re = np.linspace(*data.get("re", [0.0, 0.0, 1])[:2], int(data.get("re", [0, 0, 1])[2]))
        im = np.linspace(*data.get("im", [0.0, 0.0, 1])[:2], int(data.get("im", [0, 0, 1])[2]))
        return [complex(a, b) for b in im for a in re]
    return [_to_complex(z) for z in data]


def _h_sequence(cfg: dict, default=cn.DEFAULT_H_SEQUENCE) -> list[float]:
    hs = [float(h) for h in cfg.get("h_sequence", default)]
    if any(b >= a for a, b in zip(hs, hs[1:])) or any(h <= 0 for h in hs):
        raise ValidationError("h_sequence must be positive and strictly decreasing")
    return hs


# commands -------------------------------------------------------------------


class Partial(Exception):
    def __init__(self, report):
        super().__init__("partial results")
        self.report = report


def _nudged(f, x: complex, h: float, rng: np.random.Generator, tries: int = 3):
    """Evaluate ``f(x)``; on a pole or singular step retry with a small vertical nudge."""
    try:
        return x, f(x), 0.0
    except (PoleError, SingularMatrixError, ContinuationError) as first:
        for _ in range(tries):
            eta = float(rng.uniform(-h / 10, h / 10))
            try:
                return x + 1j * eta, f(x + 1j * eta), eta
            except (PoleError, SingularMatrixError, ContinuationError):
                continue
        raise first


def cmd_solve(cfg: dict, tols: dict, rng, order) -> dict:
    sys_ = parse_system(cfg["system"], order)
    sol = canonical_solution(sys_, seed_tail=tols["seed_tail"])
    rows, failures = [], []
    target = minus_transform(sys_) if sys_.orientation == "minus" else sys_
    for x in parse_grid(cfg.get("grid")):
        try:
            xe, Y, eta = _nudged(sol, x, sys_.h, rng)
            res = residual(target, sol, xe)
            rows.append({"x": _cx(xe), "nudge": eta, "Y": _mat(Y), "residual": res})
        except ConfluxError as exc:
            failures.append({"x": _cx(x), "error": str(exc)})
    report = {"command": "solve", "h": sys_.h, "orientation": sys_.orientation,
              "certificate": [sol.F.cert.C, sol.F.cert.lam], "halfplane": sol.halfplane,
              "samples": rows, "failures": failures}
    if failures:
        if not rows:
            raise ContinuationError(failures[0]["error"])
        raise Partial(report)
    return report


def cmd_connect(cfg: dict, tols: dict, rng, order) -> dict:
    sys_ = parse_system(cfg["system"], order)
    cm = cn.ConnectionMatrix(sys_, order)
    rows, failures, xs, Ps = [], [], [], []
    for x in parse_grid(cfg.get("grid")):
        try:
            xe, P, eta = _nudged(cm, x, sys_.h, rng)
            Ph = cm(xe + sys_.h)
            per = float(np.abs(Ph - P).max())
            det = complex(np.linalg.det(P))
            rows.append({"x": _cx(xe), "nudge": eta, "P": _mat(P), "periodicity": per,
                         "det": _cx(det)})
            xs.append(xe)
            Ps.append(P)
        except ConfluxError as exc:
            failures.append({"x": _cx(x), "error": str(exc)})
    worst = max([r["periodicity"] for r in rows], default=0.0)
    report = {"command": "connect", "h": sys_.h, "samples": rows, "failures": failures,
              "max_periodicity_defect": worst,
              "periodicity_ok": bool(worst <= tols["periodicity"]),
              "_grid": (xs, np.array(Ps) if Ps else np.zeros((0, sys_.n, sys_.n)))}
    if failures:
        if not rows:
            raise ContinuationError(failures[0]["error"])
        raise Partial(report)
    return report


def _family_run(cfg: dict, order, default_hs=cn.DEFAULT_H_SEQUENCE, default_mode="linear"):
    fam_cfg = cfg.get("family")
    if fam_cfg is None:
        raise ValidationError("conflue/monodromy need a 'family' template")
    hs = _h_sequence(cfg, default_hs)
    At = family_limit(fam_cfg)
    strips = cn.strip_partition(At)
    family = {h: family_instantiate(fam_cfg, h, order) for h in hs}
    mode = cfg.get("extrapolation", default_mode)
    limits, diag = cn.strip_limits(family, strips, order, extrapolation=mode)
    return hs, At, strips, limits, diag


def cmd_conflue(cfg: dict, tols: dict, rng, order) -> dict:
    hs, At, strips, limits, diag = _family_run(cfg, order)
    table = []
    for j, L in enumerate(limits):
        table.append({"strip": j + 1, "midpoint": _cx(strips.midpoints[j]),
                      "samples": [_mat(P) for P in L.samples], "limit": _mat(L.limit),
                      "order": L.order if math.isfinite(L.order) else "inf",
                      "converged": L.converged, "constancy": L.constancy})
    return {"command": "conflue", "h_sequence": hs, "poles": [_cx(p) for p in strips.poles],
            "strips": table}


def cmd_monodromy(cfg: dict, tols: dict, rng, order) -> dict:
    hs, At, strips, limits, diag = _family_run(cfg, order, cn.MONODROMY_H_SEQUENCE, "full")
    for d in diag["strips"]:
        if not math.isfinite(d["order"]):
            d["order"] = "inf"
    rep = cn.monodromy(limits, strips, hs, diag)
    out = rep.to_json()
    oracle = []
    for j in range(len(strips.poles)):
        M = cn.ode_monodromy_oracle(At, j)
        err = float(np.abs(M - rep.monodromies[j]).max())
        oracle.append({"pole": _cx(strips.poles[j]), "oracle": _mat(M), "difference": err,
                       "ok": bool(err <= tols["oracle"])})
    out["command"] = "monodromy"
    out["oracle"] = oracle
    return out


def cmd_selftest(cfg: dict, tols: dict, rng, order) -> dict:
    from .selftest import run_selftest
    results = run_selftest(cfg, rng, stream=sys.stderr)
    report = {"command": "selftest", "criteria": results,
              "passed": all(r["passed"] for r in results)}
    if not report["passed"]:
        raise Partial(report)
    return report


HANDLERS = {"solve": cmd_solve, "connect": cmd_connect, "conflue": cmd_conflue,
            "monodromy": cmd_monodromy, "selftest": cmd_selftest}


# entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conflux", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--order", type=int, default=None, help="truncation order N (>= 8)")
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    return p


def _parse_tols(cfg: dict, items: list[str]) -> dict:
    tols = dict(DEFAULT_TOLS)
    for k, v in (cfg.get("tolerances") or {}).items():
        tols[k] = float(v)
    for item in items:
        if "=" not in item:
            raise ValidationError(f"--tol expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            tols[k.strip()] = float(v)
        except ValueError as exc:
            raise ValidationError(f"bad tolerance value {v!r}") from exc
    return tols


def _emit(report: dict, fmt: str, out: Optional[str]):
    grid = report.pop("_grid", None)
    if fmt == "csv":
        if grid is None:
            raise ValidationError("csv output is only available for 'connect'")
        text = cn.grid_csv(*grid)
    else:
        text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json_default(o: Any):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (complex, np.complexfloating)):
        return _cx(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def run(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = args.format
    try:
        cfg: dict = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read config: {exc}") from exc
        elif args.command != "selftest":
            raise ValidationError("--config is required")
        order = args.order if args.order is not None else cfg.get("truncation")
        if order is not None:
            order = int(order)
            if order < 8:
                raise ValidationError("truncation order must be at least 8")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        tols = _parse_tols(cfg, args.tol)
        rng = np.random.default_rng(seed)
        report = HANDLERS[args.command](cfg, tols, rng, order)
        report["partial"] = False
        report["tolerances"] = tols
        _emit(report, fmt, args.out)
        return EXIT_OK
    except Partial as p:
        p.report["partial"] = True
        _emit(p.report, fmt if "_grid" in p.report else "json", args.out)
        return EXIT_PARTIAL
    except (ValidationError, HypothesisError) as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}, "partial": False},
              "json", args.out)
        return EXIT_VALIDATION
    except (ConfluxError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}, "partial": False},
              "json", args.out)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())
