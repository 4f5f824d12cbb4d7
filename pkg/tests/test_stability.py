import math

import numpy as np
import pytest

from helpers import bisect_root, cubic_value
from swsplit.stability import (PhysicalParams, build_report,
                               coupled_amplification_matrix,
                               critical_time_step, critical_time_step_for_drag,
                               cubic_coefficients, drag_coefficient,
                               is_convergent_cubic, is_convergent_modulus,
                               modulus_cubic_coefficients,
                               source_amplification_matrix,
                               source_update_matrix, step_coefficients,
                               velocity_mode_modulus)

# reference operating point: |u| = 0.1 m/s over H = 0.1 m of water
D_REF = 0.00613125
K0_REF = 1e-4


class TestDragCoefficient:
    def test_reference_value(self, params):
        assert drag_coefficient(0.1, 0.1, params) == pytest.approx(D_REF, rel=1e-12)

    def test_zero_speed(self, params):
        assert drag_coefficient(0.0, 0.1, params) == 0.0

    def test_depth_scaling(self, params):
        d1 = drag_coefficient(0.1, 0.1, params)
        d2 = drag_coefficient(0.1, 0.2, params)
        assert d2 == pytest.approx(d1 / 2.0, rel=1e-14)


class TestStepCoefficients:
    def test_zero_step_limit(self):
        for tau in (1e-6, 1e-9):
            alpha, beta = step_coefficients(tau, K0_REF, D_REF)
            assert abs(alpha) < 1e-5 * tau / 1e-6 and abs(beta) < 1e-5

    def test_reference_point(self):
        alpha, beta = step_coefficients(3.0, K0_REF, D_REF)
        assert alpha == pytest.approx(-0.0182246, abs=1e-7)
        assert beta == pytest.approx(-0.0548813, abs=1e-7)

    def test_drag_free(self):
        alpha, beta = step_coefficients(1.0, 1e-4, 0.0)
        assert alpha == pytest.approx(-5e-9, rel=1e-12)
        assert beta == pytest.approx(1e-4, rel=1e-12)


class TestSourceAmplification:
    def test_identity_at_origin(self):
        assert np.array_equal(source_amplification_matrix(0.0, 0.0), np.eye(3))

    def test_collapsed_velocity_block(self):
        eig = np.sort(np.linalg.eigvals(source_amplification_matrix(-1.0, 0.0)).real)
        assert np.allclose(eig, [0.0, 0.0, 1.0], atol=1e-14)

    def test_spectrum_against_eigensolver(self, rng):
        for _ in range(1000):
            alpha, beta = rng.uniform(-2.0, 2.0, size=2)
            J = source_amplification_matrix(alpha, beta)
            computed = np.sort_complex(np.linalg.eigvals(J))
            analytic = np.sort_complex(np.array(
                [1.0, complex(1.0 + alpha, beta), complex(1.0 + alpha, -beta)]))
            assert np.max(np.abs(computed - analytic)) < 1e-12


class TestCoupledAmplification:
    def test_flat_bottom_equals_source_matrix(self, rng):
        alpha, beta = rng.uniform(-1, 1, size=2)
        J2 = coupled_amplification_matrix(alpha, beta, 300.0, 0.7, (0.0, 0.0))
        assert np.array_equal(J2, source_amplification_matrix(alpha, beta))

    def test_theta1_zero_first_row(self):
        J2 = coupled_amplification_matrix(0.3, -0.2, 5.0, 0.0, (0.01, -0.02))
        assert np.allclose(J2[0], [1.0, -5.0 * 0.01, -5.0 * (-0.02)], atol=1e-15)

    def test_velocity_moduli_match_source_matrix(self, rng):
        # also proves the spectrum ignores tau_tilde and theta1
        for _ in range(1000):
            alpha, beta = rng.uniform(-2.0, 2.0, size=2)
            grad_h = rng.uniform(-1.0, 1.0, size=2)
            tau_tilde = rng.uniform(1e-3, 600.0)
            theta1 = rng.uniform(0.0, 1.0)
            J2 = coupled_amplification_matrix(alpha, beta, tau_tilde, theta1, grad_h)
            moduli = np.sort(np.abs(np.linalg.eigvals(J2)))
            rho = velocity_mode_modulus(alpha, beta)
            expected = np.sort([1.0, rho, rho])
            assert np.max(np.abs(moduli - expected)) < 1e-12


class TestVelocityModeModulus:
    def test_neutral(self):
        assert velocity_mode_modulus(0.0, 0.0) == 1.0

    def test_reference_at_critical_step(self):
        alpha, beta = step_coefficients(5.41, K0_REF, D_REF)
        assert alpha == pytest.approx(-0.0326201, abs=1e-7)
        assert beta == pytest.approx(-0.178910, abs=1e-6)
        assert velocity_mode_modulus(alpha, beta) == pytest.approx(0.98379, abs=1e-5)

    def test_pure_rotation_growth(self):
        assert velocity_mode_modulus(0.0, 0.5) == pytest.approx(math.sqrt(1.25), rel=1e-15)


class TestCubicCoefficients:
    def test_drag_free_degenerates(self):
        a, b, c, d = cubic_coefficients(K0_REF, 0.0)
        assert (a, b, c, d) == (K0_REF ** 4, 0.0, 0.0, 0.0)

    def test_reference_point(self):
        a, b, c, d = cubic_coefficients(K0_REF, D_REF)
        assert a == pytest.approx(3.00738e-4, rel=1e-5)
        assert b == pytest.approx(5.82670e-6, rel=1e-5)
        assert c == pytest.approx(3.00738e-4, rel=1e-5)
        assert d == pytest.approx(4.905e-2, rel=1e-10)

    def test_coriolis_free(self):
        assert cubic_coefficients(0.0, 1.0) == (8.0, 4.0, 8.0, 8.0)


class TestCriticalTimeStep:
    def test_reference_point(self):
        tau_c = critical_time_step(*cubic_coefficients(K0_REF, D_REF))
        assert tau_c == pytest.approx(5.41, abs=0.02)

    def test_residual_is_a_root(self):
        a, b, c, d = cubic_coefficients(K0_REF, D_REF)
        tau_c = critical_time_step(a, b, c, d)
        assert abs(cubic_value(a, b, c, d, tau_c)) < 1e-9 * d
        # sign flips across the root
        assert cubic_value(a, b, c, d, tau_c * (1 - 1e-6)) < 0
        assert cubic_value(a, b, c, d, tau_c * (1 + 1e-6)) > 0

    def test_against_bisection(self):
        a, b, c, d = cubic_coefficients(K0_REF, D_REF)
        oracle = bisect_root(lambda t: cubic_value(a, b, c, d, t), 0.0, 100.0)
        assert critical_time_step(a, b, c, d) == pytest.approx(oracle, abs=1e-6)

    def test_triple_root(self):
        assert critical_time_step(1.0, 3.0, 3.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_drag_free_raises(self):
        with pytest.raises(ValueError, match="no positive root"):
            critical_time_step(*cubic_coefficients(K0_REF, 0.0))
        assert math.isnan(critical_time_step_for_drag(K0_REF, 0.0))

    def test_monotone_onset(self):
        tau_c = critical_time_step(*cubic_coefficients(K0_REF, D_REF))
        below = np.linspace(1e-3, tau_c - 1e-6, 2000)
        above = np.linspace(tau_c + 1e-6, tau_c + 10.0, 2000)
        assert all(is_convergent_cubic(t, K0_REF, D_REF) for t in below)
        assert not any(is_convergent_cubic(t, K0_REF, D_REF) for t in above)


class TestVerdicts:
    def test_reference_tau3_converges(self):
        assert is_convergent_cubic(3.0, K0_REF, D_REF)

    def test_reference_tau6_diverges(self):
        assert not is_convergent_cubic(6.0, K0_REF, D_REF)

    def test_drag_free_never_converges(self):
        for tau in (0.01, 0.1, 1.0, 10.0, 100.0):
            assert not is_convergent_cubic(tau, K0_REF, 0.0)
        # the modulus excess is t^4 k0^4 / 4; assert the predicate where
        # that exceeds float resolution around 1.0
        for tau, k0 in ((10.0, 1e-4), (100.0, 1e-4), (1.0, 1e-2), (0.1, 0.5)):
            assert not is_convergent_modulus(tau, k0, 0.0)

    def test_boundary_is_strict(self):
        tau_c = critical_time_step(*cubic_coefficients(K0_REF, D_REF))
        assert not is_convergent_cubic(5.41, K0_REF, D_REF)  # 5.41 > tau_c here
        # exactly at the root the inequality is strict, ties are non-convergent
        assert cubic_value(*cubic_coefficients(K0_REF, D_REF), tau_c) >= 0 or \
            not is_convergent_cubic(tau_c, K0_REF, D_REF)

    def test_small_tau_with_drag_converges(self):
        assert is_convergent_modulus(1e-3, K0_REF, D_REF)
        assert is_convergent_cubic(1e-3, K0_REF, D_REF)

    def test_modulus_equals_expanded_inequality(self, rng):
        for _ in range(500):
            tau = rng.uniform(1e-3, 20.0)
            k0 = rng.uniform(0.0, 1e-2)
            D = rng.uniform(0.0, 0.1)
            alpha, beta = step_coefficients(tau, k0, D)
            assert is_convergent_modulus(tau, k0, D) == \
                (2.0 * alpha + alpha ** 2 + beta ** 2 < 0.0)

    def test_drag_free_modulus_identity(self):
        # (1 - t^2 k0^2/2)^2 + t^2 k0^2 = 1 + t^4 k0^4 / 4 >= 1
        for tau in (0.1, 1.0, 10.0):
            alpha, beta = step_coefficients(tau, K0_REF, 0.0)
            excess = (1 + alpha) ** 2 + beta ** 2 - 1.0
            assert excess == pytest.approx(tau ** 4 * K0_REF ** 4 / 4.0, rel=1e-6)

    def test_modulus_critical_step_by_bisection(self):
        tau_star = critical_time_step(*modulus_cubic_coefficients(K0_REF, D_REF))

        def excess(tau):
            alpha, beta = step_coefficients(tau, K0_REF, D_REF)
            return (1 + alpha) ** 2 + beta ** 2 - 1.0

        oracle = bisect_root(excess, 1e-3, 100.0)
        assert tau_star == pytest.approx(oracle, abs=1e-6)
        assert tau_star == pytest.approx(6.80, abs=0.01)

    def test_cubic_gate_is_stricter(self, rng):
        # physical regime: the cubic's real root sits below the modulus one
        for _ in range(200):
            k0 = rng.uniform(0.0, 1e-3)
            D = rng.uniform(1e-4, 0.1)
            assert critical_time_step(*cubic_coefficients(k0, D)) < \
                critical_time_step(*modulus_cubic_coefficients(k0, D))


class TestSourceUpdateMatrix:
    def test_diagonal_matches_analysis_alpha(self, rng):
        for _ in range(100):
            tau = rng.uniform(0.1, 10.0)
            k0 = rng.uniform(0.0, 1e-2)
            D = rng.uniform(0.0, 0.1)
            T = source_update_matrix(tau, k0, D)
            alpha, _ = step_coefficients(tau, k0, D)
            assert T[0, 0] == pytest.approx(1.0 + alpha, rel=1e-12, abs=1e-15)
            assert T[0, 0] == T[1, 1]
            assert T[0, 1] == -T[1, 0]

    def test_rotation_entry_keeps_coriolis_factor(self):
        tau = 3.0
        T = source_update_matrix(tau, K0_REF, D_REF)
        assert T[0, 1] == pytest.approx(tau * K0_REF - tau ** 2 * D_REF * K0_REF,
                                        rel=1e-12)

    def test_drag_free_growth(self):
        # with the drag off the map scales every vector by sqrt(1 + t^4 k0^4/4) > 1
        k0, tau = 1e-2, 3.0
        T = source_update_matrix(tau, k0, 0.0)
        v = np.array([1.0, 0.0])
        norms = [1.0]
        for _ in range(1000):
            v = T @ v
            norms.append(float(np.hypot(*v)))
        norms = np.array(norms)
        assert np.all(np.diff(norms) > 0.0)
        growth = math.sqrt(1.0 + tau ** 4 * k0 ** 4 / 4.0)
        assert norms[-1] == pytest.approx(growth ** 1000, rel=1e-9)


class TestBuildReport:
    def test_reference_report(self, params):
        r = build_report(3.0, 0.1, 0.1, params)
        assert r.drag == pytest.approx(D_REF, rel=1e-12)
        assert r.tau_c_cubic == pytest.approx(5.41, abs=0.02)
        assert r.convergent_cubic and r.convergent_modulus
        assert r.modulus == velocity_mode_modulus(r.alpha, r.beta)
        assert r.convergent_modulus == (r.modulus < 1.0)

    def test_zero_speed_report(self, params):
        r = build_report(3.0, 0.0, 0.1, params)
        assert r.drag == 0.0
        assert math.isnan(r.tau_c_cubic) and math.isnan(r.tau_c_modulus)
        assert not r.convergent_cubic and not r.convergent_modulus

    def test_invalid_inputs(self, params):
        with pytest.raises(ValueError):
            build_report(-1.0, 0.1, 0.1, params)
        with pytest.raises(ValueError):
            build_report(3.0, 0.1, 0.0, params)
        with pytest.raises(ValueError):
            build_report(3.0, -0.1, 0.1, params)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(g=-9.81)
    with pytest.raises(ValueError):
        PhysicalParams(k1=0.0)
    with pytest.raises(ValueError):
        PhysicalParams(k0=-1e-4)
