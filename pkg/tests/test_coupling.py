import math
import unittest

import numpy as np

from mfgcluster.coupling import (
    available_couplings,
    bump_coupling,
    g_grad,
    g_hess,
    g_value,
    get_coupling,
    make_coupling,
    register_coupling,
    t_star,
)
from mfgcluster.exceptions import (
    InvalidCouplingError,
    InvalidGameConfigError,
    UnknownCouplingError,
)
from mfgcluster.measures import dirac, new_empirical, uniform_measure


class TestBumpCoupling(unittest.TestCase):
    def setUp(self) -> None:
        self.c = get_coupling("bump")

    def test_values_at_zero(self) -> None:
        assert abs(self.c.phi(np.zeros(1))[0] + 1.0 / math.e) <= 1e-15
        assert self.c.phi_prime(np.zeros(1))[0] == 0.0
        assert abs(self.c.phi_second_at_zero - 2.0 / math.e) <= 1e-12

    def test_vanishes_outside_support(self) -> None:
        xs = np.array([-3.0, -1.0, 1.0, 1.0000001, 2.5])
        for f in (self.c.phi, self.c.phi_prime, self.c.phi_second):
            assert np.all(f(xs) == 0.0)

    def test_even_kernel_odd_derivative(self) -> None:
        xs = np.linspace(0.0, 0.99, 100)
        assert np.array_equal(self.c.phi(xs), self.c.phi(-xs))
        assert np.array_equal(self.c.phi_prime(xs), -self.c.phi_prime(-xs))
        assert np.array_equal(self.c.phi_second(xs), self.c.phi_second(-xs))

    def test_derivatives_match_finite_differences(self) -> None:
        h = 1e-5
        for x in (-0.8, -0.3, 0.1, 0.5, 0.9):
            xs = np.array([x - h, x, x + h])
            phi, prime, second = self.c.phi(xs), self.c.phi_prime(xs), self.c.phi_second(xs)
            assert abs((phi[2] - phi[0]) / (2 * h) - prime[1]) <= 1e-6
            assert abs((prime[2] - prime[0]) / (2 * h) - second[1]) <= 1e-5

    def test_constants(self) -> None:
        """Asserts that the scanned constants bound phi'' on a fine grid"""
        xs = np.linspace(-1.0, 1.0, 1_000_003)
        second = self.c.phi_second(xs)
        assert self.c.lambda1 >= -second.min() > 0.0
        assert self.c.lipschitz_L1 >= np.abs(second).max()
        assert self.c.lipschitz_L1 >= self.c.phi_second_at_zero
        assert self.c.sup_phi_prime >= np.abs(self.c.phi_prime(xs)).max()
        assert self.c.support_radius == 1.0

    def test_t_star(self) -> None:
        expected = 0.99 / (self.c.lambda1 + self.c.lipschitz_L1)
        assert t_star(self.c, 0.99) == expected
        with self.assertRaises(InvalidGameConfigError):
            t_star(self.c, 1.0)
        with self.assertRaises(InvalidGameConfigError):
            t_star(self.c, 0.0)

    def test_scaled_bump(self) -> None:
        wide = bump_coupling(amplitude=2.0, radius=2.0)
        assert wide.support_radius == 2.0
        assert abs(wide.phi_second_at_zero - 2.0 * 2.0 / (math.e * 4.0)) <= 1e-12
        assert wide.phi(np.array([1.99]))[0] < 0.0
        assert wide.phi(np.array([2.0]))[0] == 0.0

    def test_unit_bump_curvature(self) -> None:
        assert abs(get_coupling("unit_bump").phi_second_at_zero - 1.0) <= 1e-12

    def test_rejects_bad_parameters(self) -> None:
        with self.assertRaises(InvalidCouplingError):
            bump_coupling(amplitude=0.0)
        with self.assertRaises(InvalidCouplingError):
            bump_coupling(radius=-1.0)


class TestCouplingRegistry(unittest.TestCase):
    def test_builtin_names(self) -> None:
        assert {"bump", "unit_bump"} <= set(available_couplings())

    def test_cached(self) -> None:
        assert get_coupling("bump") is get_coupling("bump")

    def test_unknown(self) -> None:
        with self.assertRaises(UnknownCouplingError):
            get_coupling("gaussian")

    def test_register(self) -> None:
        @register_coupling("test_wide_bump")
        def _wide():
            return bump_coupling(radius=3.0)

        assert get_coupling("test_wide_bump").support_radius == 3.0
        assert "test_wide_bump" in available_couplings()


class TestMakeCoupling(unittest.TestCase):
    def test_rejects_positive_kernel(self) -> None:
        def phi(x):
            return np.where(np.abs(x) < 1, (1 - x**2) ** 3, 0.0)

        def phi_prime(x):
            return np.where(np.abs(x) < 1, -6 * x * (1 - x**2) ** 2, 0.0)

        def phi_second(x):
            return np.where(np.abs(x) < 1, -6 * (1 - x**2) ** 2 + 24 * x**2 * (1 - x**2), 0.0)

        with self.assertRaises(InvalidCouplingError):
            make_coupling("hill", phi, phi_prime, phi_second, 1.0)

    def test_accepts_negated_polynomial_bump(self) -> None:
        def phi(x):
            return np.where(np.abs(x) < 1, -((1 - x**2) ** 3), 0.0)

        def phi_prime(x):
            return np.where(np.abs(x) < 1, 6 * x * (1 - x**2) ** 2, 0.0)

        def phi_second(x):
            return np.where(np.abs(x) < 1, 6 * (1 - x**2) ** 2 - 24 * x**2 * (1 - x**2), 0.0)

        c = make_coupling("well", phi, phi_prime, phi_second, 1.0, scan_points=20_001)
        assert abs(c.phi_second_at_zero - 6.0) <= 1e-12
        assert c.lipschitz_L1 >= 6.0

    def test_rejects_nonpositive_radius(self) -> None:
        c = get_coupling("bump")
        with self.assertRaises(InvalidCouplingError):
            make_coupling("bad", c.phi, c.phi_prime, c.phi_second, 0.0)


class TestCouplingEvaluation(unittest.TestCase):
    def setUp(self) -> None:
        self.c = get_coupling("bump")

    def test_dirac(self) -> None:
        assert abs(g_value(0.0, dirac(0.0), self.c) + 1.0 / math.e) <= 1e-15
        assert g_value(1.5, dirac(0.0), self.c) == 0.0

    def test_symmetric_measure_has_flat_center(self) -> None:
        m = uniform_measure([-0.5, 0.5])
        assert g_grad(0.0, m, self.c) == 0.0
        assert g_hess(0.0, m, self.c) == float(self.c.phi_second(np.array([0.5]))[0])

    def test_matches_direct_sum(self) -> None:
        rng = np.random.default_rng(3)
        m = uniform_measure(rng.uniform(-2, 2, size=40))
        for y in rng.uniform(-2.5, 2.5, size=20):
            d = y - m.positions
            assert abs(g_value(y, m, self.c) - np.dot(m.weights, self.c.phi(d))) <= 1e-14
            assert abs(g_grad(y, m, self.c) - np.dot(m.weights, self.c.phi_prime(d))) <= 1e-13
            assert abs(g_hess(y, m, self.c) - np.dot(m.weights, self.c.phi_second(d))) <= 1e-12

    def test_derivatives_of_interaction_potential(self) -> None:
        """Asserts that g_grad and g_hess match central differences of g_value
        and g_grad against random measures"""
        rng = np.random.default_rng(5)
        h = 1e-5
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            m = new_empirical(rng.uniform(-2.0, 2.0, size=n), rng.dirichlet(np.ones(n)))
            y = float(rng.uniform(-2.5, 2.5))
            grad = (g_value(y + h, m, self.c) - g_value(y - h, m, self.c)) / (2 * h)
            hess = (g_grad(y + h, m, self.c) - g_grad(y - h, m, self.c)) / (2 * h)
            assert abs(g_grad(y, m, self.c) - grad) <= 1e-6
            assert abs(g_hess(y, m, self.c) - hess) <= 1e-6

    def test_best_response_equation_is_strictly_increasing(self) -> None:
        """Asserts that 1 + t g_hess >= 1 - t lambda1 > 0 for t up to t*"""
        rng = np.random.default_rng(7)
        limit = t_star(self.c, 0.99)
        for t in (0.25 * limit, 0.5 * limit, limit):
            damping = 1.0 - t * self.c.lambda1
            assert damping > 0.0
            for _ in range(300):
                n = int(rng.integers(1, 21))
                m = new_empirical(rng.uniform(-1.0, 1.0, size=n), rng.dirichlet(np.ones(n)))
                y = float(rng.uniform(-1.5, 1.5))
                assert 1.0 + t * g_hess(y, m, self.c) >= damping - 1e-12
