import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflux import (DifferenceSystem, FactorialSeries, RationalMatrix, canonical_solution,
                     continue_solution, gauge_series, minus_transform, residual)
from conflux.errors import ContinuationError, PoleError, ResonanceError, ValidationError
from conflux.factseries import norm
from conflux.scenarios import constant_system
from conftest import (random_nonresonant, random_typed_series, scalar_minus_oracle,
                      scalar_plus_oracle, scalar_system, two_pole_rational)

LAM, MU = 1j, 0.1


class TestSystem:
    def test_validation(self):
        R = RationalMatrix.constant([[0.1]])
        with pytest.raises(ValidationError):
            DifferenceSystem(R, 0.0)
        with pytest.raises(ValidationError):
            DifferenceSystem(R, 1.0, orientation="sideways")
        with pytest.raises(ValidationError):
            DifferenceSystem(RationalMatrix.scalar([0, 1], [1]), 1.0)

    def test_step_matrix(self):
        sys = scalar_system(LAM, MU, 0.5)
        x = 2.0 + 1j
        M = sys.step_matrix(x)
        assert np.allclose(M, 1 - 0.5 / (x - 0.5) * sys.evaluate_A(x))
        assert sys.step_matrix(np.array([x, x + 1])).shape == (2, 1, 1)

    def test_step_matrix_poles(self):
        sys = scalar_system(LAM, MU, 0.5)
        with pytest.raises(PoleError):
            sys.step_matrix(0.5)
        with pytest.raises(PoleError):
            sys.step_matrix(0.5 + LAM)

    def test_resonance(self):
        with pytest.raises(ResonanceError):
            canonical_solution(constant_system(np.diag([0.2, 1.2]), 1.0))


class TestGauge:
    def test_constant_system_is_trivial(self):
        F = gauge_series(constant_system(np.diag([0.3, -0.1j]), 0.5), 16)
        assert np.allclose(F.coeffs[1:], 0)

    def test_order_independence(self, rng):
        A0 = random_nonresonant(rng, 2)
        R = two_pole_rational(A0, rng.normal(size=(2, 2)) * 0.3, rng.normal(size=(2, 2)) * 0.3, 1 + 0.5j, -0.7j)
        sys = DifferenceSystem(R, 0.5)
        F32, F64 = gauge_series(sys, 32), gauge_series(sys, 64)
        assert np.allclose(F32.coeffs, F64.coeffs[:33], rtol=1e-13, atol=0)

    def test_certificate_covers_coefficients(self, rng):
        for _ in range(5):
            A = random_typed_series(rng, 2, 0.5, 0.5, N=40)
            F = gauge_series(DifferenceSystem(A, 1.0), 40)
            assert F.check_certificate()

    def test_defining_relation(self, rng):
        # A F = (delta F) + (tau F) A0 on evaluation
        A = random_typed_series(rng, 2, 0.4, 0.5, h=0.5, N=64)
        sys = DifferenceSystem(A, 0.5)
        F = gauge_series(sys)
        x = F.cert.lam + 12 + 1j
        Fx, Fxh = F(x), F(x - 0.5)
        lhs = A(x) @ Fx
        rhs = (x - 0.5) * (Fx - Fxh) / 0.5 + Fxh @ A.coeffs[0]
        assert norm(lhs - rhs) < 1e-9


class TestScalarCanonical:
    @pytest.mark.parametrize("h", [1.0, 0.25])
    def test_plus_against_gamma_form(self, h):
        sol = canonical_solution(scalar_system(LAM, MU, h))
        for x in (8 + 1j, 3.3 - 2j, 0.4 + 0.3j, -2.6 + 0.45j, -5.1 - 1.3j):
            ref = scalar_plus_oracle(LAM, MU, h, x)
            assert abs(sol(x)[0, 0] / ref - 1) < 1e-10

    @pytest.mark.parametrize("h", [1.0, 0.25])
    def test_minus_against_gamma_form(self, h):
        sol = canonical_solution(minus_transform(scalar_system(LAM, MU, h)))
        for x in (-8 + 1j, -3.3 - 2j, 0.6 + 0.3j, 4.1 - 1.3j):
            ref = scalar_minus_oracle(LAM, MU, h, x)
            assert abs(sol(x)[0, 0] / ref - 1) < 1e-10

    def test_minus_transform_closed_form(self):
        h = 0.5
        B = minus_transform(scalar_system(LAM, MU, h))
        assert B.orientation == "minus"
        for t in (2.0 + 1j, -0.3 + 4j):
            ref = (t - h) * MU / (t * t + LAM * t + h * MU)
            assert abs(B.evaluate_A(t)[0, 0] - ref) < 1e-12

    def test_minus_transform_involution(self):
        sys = scalar_system(LAM, MU, 0.5)
        assert minus_transform(minus_transform(sys)) is sys

    def test_residual_after_continuation(self):
        sys = scalar_system(LAM, MU, 1.0)
        sol = canonical_solution(sys)
        for x in (-4.3 + 0.2j, 0.7 - 1j):
            assert residual(sys, sol, x) < 1e-12


class TestContinuation:
    def test_explicit_path_matches_default(self):
        sys = scalar_system(LAM, MU, 1.0)
        sol = canonical_solution(sys)
        start = np.ceil(sol.seed_abscissa) + 2 + 0.3j
        x = start - 9
        path = [start - k for k in range(10)]
        assert np.allclose(continue_solution(sol, x, path), sol(x), rtol=1e-12)

    def test_path_rules(self):
        sol = canonical_solution(scalar_system(LAM, MU, 1.0))
        with pytest.raises(ContinuationError):
            continue_solution(sol, -1.0, [-2.0, -1.0])
        X = sol.seed_abscissa + 1
        with pytest.raises(ContinuationError):
            continue_solution(sol, X - 0.5, [X, X - 0.5])
        with pytest.raises(ValidationError):
            continue_solution(sol, 0.0, [X])

    def test_vertical_jump_in_halfplane(self):
        sol = canonical_solution(scalar_system(LAM, MU, 1.0))
        X = sol.seed_abscissa + 1
        assert np.allclose(continue_solution(sol, X + 2j, [X, X + 2j]), sol(X + 2j))

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=10, deadline=None)
    def test_random_two_pole_residual(self, seed):
        rng = np.random.default_rng(seed)
        A0 = random_nonresonant(rng, 2)
        R = two_pole_rational(A0, rng.normal(size=(2, 2)) * 0.3, rng.normal(size=(2, 2)) * 0.3,
                              0.8 + 0.6j, -0.5 - 0.4j)
        sys = DifferenceSystem(R, 0.5)
        sol = canonical_solution(sys)
        for x in (sol.seed_abscissa + 1 + 0.5j, -2.2 + 0.13j, 0.9 - 1.7j):
            assert residual(sys, sol, x) < 1e-9

    def test_factorial_input(self, rng):
        A = random_typed_series(rng, 2, 0.3, 0.5, N=64)
        sys = DifferenceSystem(A, 1.0)
        sol = canonical_solution(sys)
        x = sol.seed_abscissa + 0.5 - 1j
        assert residual(sys, sol, x) < 1e-10


class TestWorkedExamples:
    def test_scalar_first_gauge_coefficient(self):
        c, beta = 0.3 + 0.1j, 0.7
        a = np.zeros((9, 1, 1), dtype=complex)
        a[0], a[1] = c, beta
        F = gauge_series(DifferenceSystem(FactorialSeries(1.0, a), 1.0), 8)
        assert abs(F.coeffs[1, 0, 0] + beta) < 1e-15

    def test_defining_identity_order_40(self, rng):
        A = random_typed_series(rng, 2, 1.0, 1.0, N=40)
        sys = DifferenceSystem(A, 1.0)
        F = gauge_series(sys, 40)
        from conflux import translate
        x = F.cert.lam + 5 + 0.5j
        lhs = multiply_eval(A, F, x)
        rhs = (x - 1) * (F(x) - F(x - 1)) + translate(F)(x) @ A.coeffs[0]
        assert norm(lhs - rhs) < 1e-9

    def test_zero_system(self):
        sol = canonical_solution(constant_system(np.zeros((2, 2)), 0.5))
        for x in (3 + 1j, -4.2 + 0.3j):
            assert np.array_equal(sol(x), np.eye(2))

    def test_residual_random_points(self, rng):
        sys = scalar_system(LAM, MU, 0.5)
        sol = canonical_solution(sys)
        xs = sol.halfplane + 0.5 + rng.uniform(0, 10, 20) + 1j * rng.uniform(-5, 5, 20)
        assert max(residual(sys, sol, x) for x in xs) <= 1e-9

    def test_residual_probes(self):
        sys = constant_system(np.diag([0.3, -0.2j]), 1.0)
        sol = canonical_solution(sys)
        assert residual(sys, sol, 4.0 + 1j) <= 1e-11
        bad = lambda x: sol(x) @ (np.eye(2) + 0.1 / x)
        assert residual(sys, bad, 4.0 + 1j) >= 1e-3

    def test_zero_length_continuation(self):
        sol = canonical_solution(scalar_system(LAM, MU, 1.0))
        x = sol.seed_abscissa + 2 + 1j
        v, tail = sol.direct(x)
        assert np.abs(continue_solution(sol, x, [x]) - v).max() <= tail + 1e-12

    def test_character_continuation(self):
        from conflux.specfun import character
        c = 0.4 - 0.3j
        sys = constant_system([[c]], 1.0)
        sol = canonical_solution(sys)
        x = -25.3 + 0.7j
        m = 30
        path = [x + m - k for k in range(m + 1)]
        Y = continue_solution(sol, x, path)
        assert abs(Y[0, 0] / character("plus", c, 1.0, x) - 1) <= 1e-9

    def test_two_paths_agree(self):
        sol = canonical_solution(scalar_system(LAM, MU, 1.0))
        X = float(np.ceil(sol.seed_abscissa)) + 1
        x = -3.0 + 0.4j
        p1 = [X + 0.4j - k for k in range(int(X) + 4)]
        p2 = [X + 2 + 0.4j - k for k in range(int(X) + 6)]
        p2[-1] = x
        assert np.allclose(continue_solution(sol, x, p1), continue_solution(sol, x, p2), rtol=1e-9)

    def test_minus_transform_constant(self):
        A0 = np.array([[0.3, 0.1], [0.0, -0.2j]])
        B = minus_transform(constant_system(A0, 0.5))
        assert np.allclose(B.A0, A0)
        for t in (3.0 + 1j, -2 + 0.3j):
            Bt = B.evaluate_A(t)
            # B(t) = (t - h) A0 (tI + h A0)^{-1}
            ref = (t - 0.5) * A0 @ np.linalg.inv(t * np.eye(2) + 0.5 * A0)
            assert np.allclose(Bt, ref)


def multiply_eval(A, F, x):
    from conflux import multiply
    return multiply(A, F)(x)
