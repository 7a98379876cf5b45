import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflux import SpectralData, check_deployment, check_nonresonant, decompose, operator_k_bound, sylvester_solve
from conflux.errors import IllConditionedError, ResonanceError, ValidationError
from conflux.spectral import jordan_matrix, operator_k_norms, resonant_pairs, sylvester_operator


def conj_jordan(rng, blocks):
    T = rng.normal(size=(sum(k for _, k in blocks),) * 2) + 1j * rng.normal(size=(sum(k for _, k in blocks),) * 2)
    return T @ jordan_matrix(blocks) @ np.linalg.inv(T)


class TestDecompose:
    def test_diagonal(self):
        spec = decompose(np.diag([2.0, -1.0, 0.5j]))
        assert spec.structure() == [(-1, 1), (0.5j, 1), (2, 1)] or len(spec.blocks) == 3
        assert np.allclose(spec.reconstruct(), np.diag([2.0, -1.0, 0.5j]))

    def test_block_order(self):
        spec = decompose(np.diag([2.0, -1.0, 0.5j]))
        keys = [(c.real, c.imag) for c, _ in spec.blocks]
        assert keys == sorted(keys)

    def test_single_jordan_block(self):
        spec = decompose([[0.3, 1.0], [0.0, 0.3]])
        assert [k for _, k in spec.blocks] == [2]
        assert np.allclose(spec.P @ spec.J @ spec.P_inv, [[0.3, 1], [0, 0.3]])

    # a size-k block splits by about eps**(1/k) under rounding; tol must cover it
    @pytest.mark.parametrize("blocks,tol", [
        ([(0.25, 2), (1.5j, 1)], 1e-6),
        ([(0.1 + 0.2j, 3)], 1e-4),
        ([(-0.4, 2), (0.3, 2)], 1e-6),
        ([(0.5, 1), (0.2j, 1), (-0.3, 1), (0.1, 1)], 1e-8),
    ])
    def test_random_similarity(self, rng, blocks, tol):
        A0 = conj_jordan(rng, blocks)
        spec = decompose(A0, tol=tol)
        assert sorted(k for _, k in spec.blocks) == sorted(k for _, k in blocks)
        assert np.abs(spec.reconstruct() - A0).max() < 1e-6 * np.abs(A0).max()
        assert np.allclose(np.abs(spec.P).max(axis=0) > 0, True)

    def test_zero_matrix(self):
        spec = decompose(np.zeros((2, 2)))
        assert spec.blocks == [(0, 1), (0, 1)]

    def test_ill_conditioned(self):
        with pytest.raises(IllConditionedError):
            decompose([[0.0, 1e9], [0.0, 1.0]])

    def test_validation(self):
        with pytest.raises(ValidationError):
            SpectralData(np.eye(2), [(0, 1)])

    def test_json_roundtrip(self, rng):
        spec = decompose(conj_jordan(rng, [(0.25, 2), (1.5j, 1)]), tol=1e-6)
        back = SpectralData.from_json(spec.to_json())
        assert np.allclose(back.reconstruct(), spec.reconstruct())


class TestResonance:
    def test_pairs(self):
        assert resonant_pairs([0.0, 1.0])
        assert resonant_pairs([0.2j, 3 + 0.2j])
        assert not resonant_pairs([0.0, 0.5, 0.0])

    def test_check(self):
        assert not check_nonresonant(decompose(np.diag([0.3, -1.7])))
        assert check_nonresonant(decompose(np.diag([0.3, -1.6])))


class TestSylvester:
    def test_operator_matches_definition(self, rng):
        A0 = rng.normal(size=(3, 3)) + 0j
        U = rng.normal(size=(3, 3))
        s = 2.0
        ref = (A0 + s * np.eye(3)) @ U - U @ A0
        assert np.allclose(sylvester_operator(A0, s) @ U.reshape(-1), ref.reshape(-1))

    @given(seed=st.integers(0, 10 ** 6), s=st.integers(1, 30))
    @settings(max_examples=40, deadline=None)
    def test_solve_residual(self, seed, s):
        rng = np.random.default_rng(seed)
        A0 = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))) * 0.3
        if resonant_pairs(np.linalg.eigvals(A0), 1e-3):
            return
        R = rng.normal(size=(3, 3)) + 0j
        U = sylvester_solve(A0, s, R)
        assert np.allclose((A0 + s * np.eye(3)) @ U - U @ A0, R, atol=1e-10)

    def test_resonant_raises(self):
        with pytest.raises(ResonanceError):
            sylvester_solve(np.diag([0.0, 1.0]), 1, np.eye(2))

    def test_operator_k_bound(self):
        assert operator_k_bound(np.zeros((2, 2)), 10) == pytest.approx(1.0)
        assert operator_k_bound(np.diag([0.0, 0.5]), 10) == pytest.approx(2.0)
        with pytest.raises(ResonanceError):
            operator_k_bound(np.diag([0.0, 2.0]), 10)

    def test_k_norms_decay(self):
        v = operator_k_norms(np.diag([0.1, 0.4j]), [5, 10, 20])
        assert v[0] > v[1] > v[2]


class TestDeployment:
    def test_generic_deploys(self, rng):
        A0 = conj_jordan(rng, [(0.3, 1), (-0.2j, 1), (0.7, 1)])
        E = rng.normal(size=(3, 3))
        target = decompose(A0)
        fam = {h: decompose(A0 + h * E) for h in (1e-2, 1e-3, 1e-4, 1e-8)}
        rep = check_deployment(fam, target)
        assert rep and rep.distances[-1] < 1e-6

    def test_splitting_block_does_not_deploy(self):
        J = np.array([[0.3, 1.0], [0.0, 0.3]])
        fam = {h: decompose(J + np.diag([0, h])) for h in (0.2, 0.1, 0.05)}
        rep = check_deployment(fam, decompose(J))
        assert not rep and "structure" in rep.message


class TestWorkedExamples:
    def test_close_eigenvalues_not_merged(self):
        eps = 1e-6
        spec = decompose([[1.0, 1.0], [eps ** 2, 1.0]], tol=1e-8)
        ev = np.sort(spec.eigenvalues().real)
        assert len(spec.blocks) == 2 and np.allclose(ev, [1 - eps, 1 + eps], rtol=0, atol=1e-12)

    def test_nonresonance_examples(self):
        assert check_nonresonant(decompose(np.diag([0.0, 0.5])))
        assert not check_nonresonant(decompose(np.diag([0.0, 1.0])))
        assert not check_nonresonant(decompose(np.diag([0.3 + 2j, 1.3 + 2j])))

    def test_sylvester_closed_forms(self, rng):
        R = rng.normal(size=(2, 2)) + 0j
        d = np.array([0.3, -0.2j])
        U = sylvester_solve(np.diag(d), 2.0, R)
        assert np.allclose(U, R / (d[:, None] + 2.0 - d[None, :]))
        assert np.allclose(sylvester_solve(np.zeros((2, 2)), 3.0, R), R / 3)

    def test_sylvester_vs_dense(self, rng):
        from conftest import random_nonresonant
        A0 = random_nonresonant(rng, 3)
        R = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        dense = np.linalg.solve(sylvester_operator(A0, 2.0), R.reshape(-1)).reshape(3, 3)
        assert np.allclose(sylvester_solve(A0, 2.0, R), dense)

    def test_nilpotent_bound(self):
        N = np.array([[0.0, 1.0], [0.0, 0.0]])
        ref = max(1 / np.linalg.svd(sylvester_operator(N, s), compute_uv=False)[-1] for s in range(1, 11))
        assert operator_k_bound(N, 10) == pytest.approx(ref)

    def test_deployment_examples(self):
        target = decompose(np.diag([0.3, -0.2]))
        assert check_deployment({h: target for h in (0.2, 0.1)}, target)
        fam = {h: decompose(np.diag([0.3 + h, -0.2 - h])) for h in (0.1, 0.01, 1e-4, 1e-8)}
        assert check_deployment(fam, target)
        lam = 1j
        esc = {h: decompose(np.diag([0.0, lam / h])) for h in (0.2, 0.1, 0.05)}
        assert not check_deployment(esc, decompose(np.diag([0.0, 0.0])))
