import math
import unittest

import numpy as np

from mfgcluster.coupling import get_coupling, t_star
from mfgcluster.equilibrium import GameConfig
from mfgcluster.exceptions import NonConvergenceError, NotAFixedPointError, NotSymmetricError
from mfgcluster.stability import (
    Verdict,
    assemble_A,
    assemble_B,
    assemble_dE,
    c_matrix,
    classify,
    jacobi_eigen,
    spectrum,
    taylor_residual,
)
from mfgcluster.tools import fixed_point_from_sizes, perturb, random_fixed_point


def _random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.normal(size=(n, n))
    return 0.5 * (M + M.T)


class TestAssembly(unittest.TestCase):
    def setUp(self) -> None:
        self.c = get_coupling("bump")

    def test_coincident_pair_unit_curvature(self) -> None:
        B = assemble_B([0.0, 0.0], None, get_coupling("unit_bump"))
        assert np.allclose(B, [[1.0, -1.0], [-1.0, 1.0]], rtol=0.0, atol=1e-12)

    def test_separated_atoms_do_not_interact(self) -> None:
        assert np.all(assemble_B([0.0, 1.5], None, self.c) == 0.0)

    def test_single_cluster_is_scaled_c_matrix(self) -> None:
        B = assemble_B([0.2, 0.2, 0.2], None, self.c)
        assert np.allclose(B, 2.0 / math.e * c_matrix(3), rtol=0.0, atol=1e-12)

    def test_weighted_columns(self) -> None:
        B = assemble_B([0.0, 0.0], [0.25, 0.75], self.c)
        second = self.c.phi_second_at_zero
        assert np.allclose(B, second * np.array([[1.5, -1.5], [-0.5, 0.5]]), rtol=0.0, atol=1e-12)

    def test_A_inverts_dE(self) -> None:
        """Asserts that A = I + (t/n) B and that dE is its inverse."""
        cfg = GameConfig.for_coupling(self.c)
        y = [0.0, 0.0, 0.3, 1.8]
        weights = [0.1, 0.4, 0.3, 0.2]
        A = assemble_A(y, weights, cfg, self.c)
        B = assemble_B(y, weights, self.c)
        assert np.allclose(A, np.eye(4) + cfg.t / 4 * B, rtol=0.0, atol=1e-15)
        assert np.allclose(A @ assemble_dE(y, weights, cfg, self.c), np.eye(4), rtol=0.0, atol=1e-12)

    def test_dE_without_interaction(self) -> None:
        cfg = GameConfig.for_coupling(self.c)
        assert np.allclose(assemble_dE([0.0, 1.5, 3.0], None, cfg, self.c), np.eye(3), atol=1e-15)
        assert np.allclose(assemble_dE([0.7], None, cfg, self.c), [[1.0]], atol=1e-15)

    def test_dE_of_single_cluster(self) -> None:
        cfg = GameConfig.for_coupling(self.c)
        values = np.sort(np.linalg.eigvalsh(assemble_dE(np.zeros(4), None, cfg, self.c)))[::-1]
        shrink = 1.0 / (1.0 + cfg.t * self.c.phi_second_at_zero)
        assert np.allclose(values, [1.0, shrink, shrink, shrink], rtol=0.0, atol=1e-12)


class TestCMatrix(unittest.TestCase):
    def test_spectrum(self) -> None:
        for n in range(1, 11):
            expected = [float(n)] * (n - 1) + [0.0]
            assert np.allclose(spectrum(c_matrix(n)), expected, rtol=0.0, atol=1e-10), n

    def test_kernel(self) -> None:
        for n in range(1, 11):
            assert np.all(c_matrix(n) @ np.ones(n) == 0.0)

    def test_positive_semidefinite(self) -> None:
        rng = np.random.default_rng(61)
        C = c_matrix(8)
        for _ in range(1000):
            v = rng.normal(size=8)
            assert v @ C @ v >= -1e-12

    def test_rejects_empty(self) -> None:
        with self.assertRaises(ValueError):
            c_matrix(0)


class TestSpectrum(unittest.TestCase):
    def test_small_examples(self) -> None:
        assert np.allclose(spectrum(np.diag([1.0, 2.0])), [2.0, 1.0], atol=1e-12)
        assert np.allclose(spectrum(np.array([[2.0, 1.0], [1.0, 2.0]])), [3.0, 1.0], atol=1e-12)
        assert spectrum(np.zeros((0, 0))).size == 0

    def test_trace(self) -> None:
        rng = np.random.default_rng(67)
        M = _random_symmetric(rng, 30)
        assert abs(spectrum(M).sum() - np.trace(M)) <= 1e-10

    def test_rejects_asymmetric(self) -> None:
        with self.assertRaises(NotSymmetricError):
            spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_jacobi_matches_lapack(self) -> None:
        rng = np.random.default_rng(71)
        for n in (2, 5, 20, 40):
            M = _random_symmetric(rng, n)
            jacobi = spectrum(M, method="jacobi")
            lapack = spectrum(M, method="lapack")
            assert np.allclose(jacobi, lapack, rtol=0.0, atol=1e-10), n

    def test_jacobi_converges_on_random_matrices(self) -> None:
        """Asserts that cyclic Jacobi reaches its tolerance on ordinary
        symmetric matrices up to the size it is used for"""
        rng = np.random.default_rng(0)
        for n in (3, 5, 8, 12, 20, 40, 64):
            for _ in range(15):
                M = _random_symmetric(rng, n)
                M += np.diag(rng.uniform(-50.0, 50.0, size=n))
                values, _, sweeps = jacobi_eigen(M)
                assert sweeps < 100
                lapack = np.linalg.eigvalsh(M)
                assert np.allclose(np.sort(values), lapack, rtol=0.0, atol=1e-9), n

    def test_jacobi_eigenvectors(self) -> None:
        rng = np.random.default_rng(73)
        M = _random_symmetric(rng, 12)
        values, V, sweeps = jacobi_eigen(M)
        assert sweeps > 0
        assert np.allclose(M @ V, V * values[None, :], atol=1e-10)
        assert np.allclose(V.T @ V, np.eye(12), atol=1e-12)

    def test_jacobi_sweep_budget(self) -> None:
        with self.assertRaises(NonConvergenceError) as ctx:
            jacobi_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]), max_sweeps=0)
        assert ctx.exception.stage == "jacobi"


class TestClassify(unittest.TestCase):
    def setUp(self) -> None:
        self.c = get_coupling("bump")
        self.cfg = GameConfig.for_coupling(self.c)
        self.half = GameConfig.for_coupling(self.c, t=0.5 * t_star(self.c, 0.99))

    def test_two_spread_out_clusters(self) -> None:
        x = fixed_point_from_sizes([3, 2], [1.5])
        report = classify(x, None, self.half, self.c)
        second = self.c.phi_second_at_zero
        t = self.half.t
        assert report.verdict == Verdict.ASYMPTOTICALLY_STABLE
        assert report.cluster_sizes == [3, 2]
        assert report.spread_out
        assert len(report.restricted_eigenvalues) == 3
        assert abs(report.restricted_spectral_radius - 1.0 / (1.0 + 0.4 * t * second)) <= 1e-10
        assert np.sum(np.abs(report.dE_eigenvalues - 1.0) <= 1e-10) == 2

    def test_all_singletons(self) -> None:
        report = classify([0.0, 1.5, 3.0], None, self.cfg, self.c)
        assert report.restricted_eigenvalues.size == 0
        assert report.restricted_spectral_radius == 1.0
        assert report.verdict == Verdict.MARGINAL

    def test_gap_exactly_r(self) -> None:
        report = classify([0.0, 0.0, 1.0, 1.0], None, self.cfg, self.c)
        assert not report.spread_out
        assert report.restricted_spectral_radius < 1.0
        assert report.verdict == Verdict.MARGINAL

    def test_not_a_fixed_point(self) -> None:
        with self.assertRaises(NotAFixedPointError):
            classify([0.0, 0.5], None, self.cfg, self.c)

    def test_weighted_cluster(self) -> None:
        report = classify(np.zeros(3), [0.2, 0.3, 0.5], self.cfg, self.c)
        shrink = 1.0 / (1.0 + self.cfg.t * self.c.phi_second_at_zero)
        assert np.allclose(report.restricted_eigenvalues, [shrink, shrink], rtol=0.0, atol=1e-10)
        assert np.allclose(report.dE_eigenvalues, [1.0, shrink, shrink], rtol=0.0, atol=1e-10)
        assert report.verdict == Verdict.ASYMPTOTICALLY_STABLE

    def test_spectral_structure_of_random_fixed_points(self) -> None:
        """Asserts that each group contributes one neutral translation and
        m - 1 eigenvalues 1 / (1 + t phi''(0) m / n)"""
        rng = np.random.default_rng(79)
        second = self.c.phi_second_at_zero
        t = self.cfg.t
        for _ in range(30):
            x, sizes = random_fixed_point(rng, self.c, cluster_size=(1, 10))
            n = len(x)
            report = classify(x, None, self.cfg, self.c)

            assert np.all(report.dE_eigenvalues > 0.0)
            assert np.all(report.dE_eigenvalues <= 1.0 + 1e-10)
            assert np.sum(np.abs(report.dE_eigenvalues - 1.0) <= 1e-10) == len(sizes)
            assert np.linalg.eigvalsh(report.B).min() >= -1e-10

            expected = sorted(
                (1.0 / (1.0 + t * second * m / n) for m in sizes for _ in range(m - 1)),
                reverse=True,
            )
            assert np.allclose(report.restricted_eigenvalues, expected, rtol=0.0, atol=1e-10)
            if max(sizes) >= 2:
                assert report.verdict == Verdict.ASYMPTOTICALLY_STABLE
            else:
                assert report.verdict == Verdict.MARGINAL

    def test_cluster_translations_are_neutral(self) -> None:
        rng = np.random.default_rng(83)
        for _ in range(20):
            x, sizes = random_fixed_point(rng, self.c, cluster_size=(1, 8))
            D = assemble_dE(x, None, self.cfg, self.c)
            edges = np.cumsum([0, *sizes])
            for a, b in zip(edges[:-1], edges[1:]):
                indicator = np.zeros(len(x))
                indicator[a:b] = 1.0
                assert np.allclose(D @ indicator, indicator, rtol=0.0, atol=1e-10)


class TestTaylorResidual(unittest.TestCase):
    def test_second_order(self) -> None:
        """Asserts |tilde_E(x* + delta) - x* - D delta| <= 10 |delta|^2"""
        c = get_coupling("bump")
        cfg = GameConfig.for_coupling(c, picard_tol=1e-12, inner_tolerance="tight")
        rng = np.random.default_rng(89)
        for _ in range(30):
            x_star, _ = random_fixed_point(rng, c, n_clusters=(2, 4), cluster_size=(1, 6))
            for size in (1e-2, 1e-3):
                delta = perturb(x_star, rng, size) - x_star
                residual = taylor_residual(x_star, delta, None, cfg, c)
                assert residual <= 10 * size**2 + 1e-11
