"""Jordan-type reduction of constant matrices and the Sylvester operators around them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.linalg

from .errors import IllConditionedError, ResonanceError, ValidationError
from .rational import _to_complex

DEFAULT_CLUSTER_TOL = 1e-8
DEFAULT_RESONANCE_TOL = 1e-8


def jordan_matrix(blocks) -> np.ndarray:
    n = sum(size for _, size in blocks)
    J = np.zeros((n, n), dtype=complex)
    i = 0
    for c, size in blocks:
        J[i:i + size, i:i + size] = c * np.eye(size) + np.eye(size, k=1)
        i += size
    return J


@dataclass
class SpectralData:
    P: np.ndarray
    blocks: list
    tol: float = DEFAULT_CLUSTER_TOL
    P_inv: Optional[np.ndarray] = field(default=None, repr=False)
    cond: float = 1.0
    residual: float = 0.0

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=complex)
        self.blocks = [(complex(c), int(k)) for c, k in self.blocks]
        n = self.P.shape[0]
        if self.P.shape != (n, n) or sum(k for _, k in self.blocks) != n:
            raise ValidationError("P must be square and block sizes must sum to its dimension")
        if any(k < 1 for _, k in self.blocks):
            raise ValidationError("block sizes must be positive")
        if self.P_inv is None:
            self.cond = float(np.linalg.cond(self.P))
            if not np.isfinite(self.cond) or self.cond > 1e15:
                raise IllConditionedError("basis P is singular")
            self.P_inv = np.linalg.inv(self.P)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def J(self) -> np.ndarray:
        return jordan_matrix(self.blocks)

    def eigenvalues(self) -> np.ndarray:
        return np.array([c for c, k in self.blocks for _ in range(k)], dtype=complex)

    def structure(self) -> list:
        return [k for _, k in self.blocks]

    def reconstruct(self) -> np.ndarray:
        return self.P @ self.J @ self.P_inv

    def to_json(self) -> dict:
        return {"P": [[[float(z.real), float(z.imag)] for z in row] for row in self.P],
                "blocks": [[[c.real, c.imag], k] for c, k in self.blocks]}

    @classmethod
    def from_json(cls, data, tol: float = DEFAULT_CLUSTER_TOL) -> "SpectralData":
        try:
            P = np.array([[_to_complex(z) for z in row] for row in data["P"]], dtype=complex)
            blocks = [(_to_complex(c), int(k)) for c, k in data["blocks"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed spectral data: {exc}") from exc
        return cls(P, blocks, tol)


def _cluster(w: np.ndarray, tol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i in np.argsort(w.real + 1e-3 * w.imag):
        for g in groups:
            if np.min(np.abs(w[g] - w[i])) <= tol:
                g.append(int(i))
                break
        else:
            groups.append([int(i)])
    return groups


def _null_basis(M: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the ``dim`` right singular vectors of least weight."""
    _, _, Vh = np.linalg.svd(M)
    return Vh[M.shape[1] - dim:].conj().T


def _numerical_rank(M: np.ndarray, scale: float, rtol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rtol * max(scale, 1.0)))


def _normalize(v: np.ndarray) -> complex:
    """Scalar making ``v`` unit-norm with its largest entry real positive."""
    k = int(np.argmax(np.abs(v)))
    return abs(v[k]) / (v[k] * np.linalg.norm(v))


def decompose(A0, tol: float = DEFAULT_CLUSTER_TOL) -> SpectralData:
    """Clustered Jordan reduction ``A0 = P J P^-1``.

    Eigenvalues within ``tol`` of each other form one cluster; its Jordan
    structure is read off the rank profile of ``(A0 - cI)^k`` and chains are
    grown from complements of the nested kernels.
    """
    A0 = np.atleast_2d(np.asarray(A0, dtype=complex))
    n = A0.shape[0]
    if A0.shape != (n, n):
        raise ValidationError("A0 must be square")
    nrm = max(np.linalg.norm(A0, 2), 1.0)
    w = np.linalg.eigvals(A0)
    rank_tol = max(math.sqrt(tol), 1e-10) * 1e-2
    cols: list[tuple[complex, int, list[np.ndarray]]] = []
    for g in _cluster(w, tol):
        c = complex(np.mean(w[g]))
        m = len(g)
        B = A0 - c * np.eye(n)
        if m == 1:
            v = _null_basis(B, 1)[:, 0]
            cols.append((c, 1, [v * _normalize(v)]))
            continue
        powers = [np.eye(n, dtype=complex)]
        ranks = [n]
        for k in range(1, m + 1):
            powers.append(powers[-1] @ B)
            ranks.append(_numerical_rank(powers[-1], nrm ** k, rank_tol))
        if n - ranks[m] != m:
            raise IllConditionedError(
                f"generalized eigenspace of {c:.6g} has dimension {n - ranks[m]}, expected {m}")
        ranks.append(ranks[m])
        # at_least[k]: number of blocks of size >= k
        at_least = [0] + [ranks[k - 1] - ranks[k] for k in range(1, m + 1)] + [0]
        kernels = [np.zeros((n, 0), dtype=complex)] + [
            _null_basis(powers[k], n - ranks[k]) for k in range(1, m + 1)]
        chains: list[list[np.ndarray]] = []
        for k in range(m, 0, -1):
            need = at_least[k] - at_least[k + 1]
            if need == 0:
                continue
            existing = [kernels[k - 1]] + [
                np.linalg.matrix_power(B, len(ch) - k) @ ch[-1][:, None]
                for ch in chains if len(ch) > k]
            S = np.hstack(existing)
            if S.shape[1]:
                Q, _ = np.linalg.qr(S)
                proj = kernels[k] - Q @ (Q.conj().T @ kernels[k])
            else:
                proj = kernels[k]
            U, sv, _ = np.linalg.svd(proj)
            for t in range(need):
                v = U[:, t]
                chain = [v]
                for _ in range(k - 1):
                    chain.insert(0, B @ chain[0])
                scale = _normalize(chain[0])
                chains.append([x * scale for x in chain])
        for ch in chains:
            cols.append((c, len(ch), ch))
    cols.sort(key=lambda t: (t[0].real, t[0].imag, t[1]))
    blocks = [(c, k) for c, k, _ in cols]
    P = np.column_stack([v for _, _, ch in cols for v in ch])
    cond = float(np.linalg.cond(P))
    if not np.isfinite(cond) or cond > 1.0 / tol:
        raise IllConditionedError(
            f"Jordan basis condition number {cond:.3g} exceeds 1/tol; supply explicit (P, J)")
    spec = SpectralData(P, blocks, tol, np.linalg.inv(P), cond)
    spec.residual = float(np.linalg.norm(spec.reconstruct() - A0, 2))
    return spec


def check_nonresonant(spec: SpectralData, tol: float = DEFAULT_RESONANCE_TOL) -> bool:
    """True iff no two eigenvalues differ by a nonzero integer (within ``tol``)."""
    ev = np.array([c for c, _ in spec.blocks], dtype=complex)
    return not resonant_pairs(ev, tol)


def resonant_pairs(ev, tol: float = DEFAULT_RESONANCE_TOL) -> list:
    ev = np.asarray(ev, dtype=complex)
    out = []
    for i in range(ev.size):
        for j in range(i + 1, ev.size):
            d = ev[i] - ev[j]
            k = round(d.real)
            if k == 0:
                dist = min(abs(d - 1), abs(d + 1))
            else:
                dist = abs(d - k)
            if dist <= tol:
                out.append((complex(ev[i]), complex(ev[j])))
    return out


def sylvester_operator(A0, s: float) -> np.ndarray:
    """Matrix of ``U -> (A0 + sI) U - U A0`` acting on row-major ``vec(U)``."""
    A0 = np.asarray(A0, dtype=complex)
    n = A0.shape[0]
    I = np.eye(n)
    return np.kron(A0 + s * I, I) - np.kron(I, A0.T)


def sylvester_solve(A0, s: float, R, threshold: float = 1e-12) -> np.ndarray:
    """Solve ``(A0 + sI) U - U A0 = R``."""
    A0 = np.atleast_2d(np.asarray(A0, dtype=complex))
    R = np.atleast_2d(np.asarray(R, dtype=complex))
    n = A0.shape[0]
    smin = np.linalg.svd(sylvester_operator(A0, s), compute_uv=False)[-1]
    if smin < threshold * max(1.0, np.linalg.norm(A0, 2) + abs(s)):
        raise ResonanceError(
            f"Sylvester operator at s={s} is near-singular (sigma_min={smin:.3g}); resonance")
    return scipy.linalg.solve_sylvester(A0 + s * np.eye(n), -A0, R)


def operator_k_norms(A0, s_values) -> np.ndarray:
    """``||K_s^-1||`` (Frobenius-induced) for ``K_s(M) = A0 M - M A0 - s M``."""
    A0 = np.atleast_2d(np.asarray(A0, dtype=complex))
    out = []
    for s in s_values:
        smin = np.linalg.svd(-sylvester_operator(A0, s), compute_uv=False)[-1]
        out.append(math.inf if smin == 0 else 1.0 / smin)
    return np.array(out)


def operator_k_bound(A0, s_max: int, threshold: float = 1e-12) -> float:
    """Sup over ``s >= 1`` of ``||K_s^-1||``: dense values for small ``s`` and
    the bound ``1/(s - 2||A0||)`` beyond."""
    A0 = np.atleast_2d(np.asarray(A0, dtype=complex))
    a = float(np.linalg.norm(A0, 2))
    top = max(int(s_max), int(math.floor(2 * a)) + 1)
    vals = operator_k_norms(A0, range(1, top + 1))
    if np.any(vals * threshold * max(1.0, a) > 1.0):
        raise ResonanceError("K_s is singular for some s: A0 is resonant")
    tail = 1.0 / (top + 1 - 2 * a)
    return float(max(vals.max(), tail))


@dataclass
class DeploymentReport:
    ok: bool
    distances: list
    hs: list
    message: str = ""

    def __bool__(self):
        return self.ok


def spectral_distance(a: SpectralData, b: SpectralData) -> float:
    if a.structure() != b.structure():
        return math.inf
    return float(max(np.abs(a.P - b.P).max(), np.abs(a.J - b.J).max()))


def check_deployment(family: Mapping[float, SpectralData], target: SpectralData,
                     tol: float = 1e-6) -> DeploymentReport:
    """Does the family of reductions converge, basis and blocks, to ``target``?"""
    hs = sorted(family.keys(), reverse=True)
    if not hs:
        return DeploymentReport(False, [], [], "empty family")
    if family[hs[-1]].structure() != target.structure():
        return DeploymentReport(False, [], hs, "block structure differs at the smallest h")
    dists = [spectral_distance(family[h], target) for h in hs]
    for k in range(1, len(dists)):
        if dists[k] > dists[k - 1] * (1 + 1e-9) + 1e-14:
            return DeploymentReport(False, dists, hs, f"distance grows between h={hs[k-1]} and h={hs[k]}")
    if not dists[-1] <= tol:
        return DeploymentReport(False, dists, hs, f"final distance {dists[-1]:.3g} exceeds {tol:g}")
    return DeploymentReport(True, dists, hs, "deploys")
