import math
import os
import unittest

import numpy as np

os.environ.setdefault("BGSLAB_ENV_FILE", os.devnull)

from bgslab.core.errors import ParameterError
from bgslab.core.matcore import EPS
from bgslab.schemas.layout import BlockLayout
from bgslab.schemas.matrix import MatrixKind, MatrixSpec
from bgslab.services.matgen_service import generate, generate_with_meta, leja_points, stewart_indices
from bgslab.services.metrics_service import condition_number

DIMS = BlockLayout(m=60, p=4, s=5)


class DeterminismTests(unittest.TestCase):
    def test_same_spec_gives_identical_bits(self):
        for kind in MatrixKind:
            with self.subTest(kind=kind.value):
                spec = MatrixSpec(kind=kind, dims=DIMS, seed=42)

                first = generate(spec)
                second = generate(spec)

                self.assertEqual(first.shape, (60, 20))
                self.assertEqual(first.dtype, np.float64)
                np.testing.assert_array_equal(first, second)

    def test_seed_changes_the_matrix(self):
        a = generate(MatrixSpec(kind=MatrixKind.RAND_NORMAL, dims=DIMS, seed=1))
        b = generate(MatrixSpec(kind=MatrixKind.RAND_NORMAL, dims=DIMS, seed=2))
        self.assertFalse(np.array_equal(a, b))

    def test_meta_records_kind_and_seed(self):
        generated = generate_with_meta(MatrixSpec(kind=MatrixKind.GLUED, dims=DIMS, seed=9, r=-2.0, t=-1.0))

        self.assertEqual(generated.meta["kind"], "glued")
        self.assertEqual(generated.meta["seed"], 9)
        self.assertEqual(generated.meta["r"], -2.0)
        self.assertEqual(generated.meta["t"], -1.0)


class ConditioningTests(unittest.TestCase):
    def test_kappa_series_at_zero_is_orthonormal_scale(self):
        X = generate(MatrixSpec(kind=MatrixKind.KAPPA_SERIES, dims=BlockLayout(m=100, p=10, s=2), t=0.0))
        self.assertLessEqual(condition_number(X), 1.0 + 1e-12)

    def test_kappa_series_hits_the_requested_exponent(self):
        X = generate(MatrixSpec(kind=MatrixKind.KAPPA_SERIES, dims=BlockLayout(m=100, p=10, s=2), t=8.0))
        kappa = condition_number(X)
        self.assertGreaterEqual(kappa, 10**7.5)
        self.assertLessEqual(kappa, 10**8.5)

    def test_rank_def_is_numerically_singular(self):
        X = generate(MatrixSpec(kind=MatrixKind.RANK_DEF, dims=DIMS, seed=3))

        np.testing.assert_array_equal(X[:, :5], 100.0 * X[:, 15:])
        self.assertGreaterEqual(condition_number(X), 1e13)

    def test_laeuchli_with_fixed_eta(self):
        X = generate(MatrixSpec(kind=MatrixKind.LAEUCHLI, dims=DIMS, eta=1e-10))

        np.testing.assert_array_equal(X[0], np.ones(20))
        self.assertEqual(X[1, 0], 1e-10)
        kappa = condition_number(X)
        self.assertGreaterEqual(kappa, 1e10)
        self.assertLessEqual(kappa, 1e12)

    def test_laeuchli_draws_eta_between_eps_and_its_root(self):
        generated = generate_with_meta(MatrixSpec(kind=MatrixKind.LAEUCHLI, dims=DIMS, seed=5))
        eta = generated.meta["eta"]
        self.assertGreater(eta, EPS)
        self.assertLess(eta, math.sqrt(EPS))

    def test_glued_identity_profile_is_well_conditioned(self):
        X = generate(MatrixSpec(kind=MatrixKind.GLUED, dims=DIMS, seed=1, r=0.0, t=0.0))
        self.assertLessEqual(condition_number(X), 10.0)

    def test_glued_exponents_compound(self):
        X = generate(MatrixSpec(kind=MatrixKind.GLUED, dims=DIMS, seed=1, r=-4.0, t=-4.0))
        kappa = condition_number(X)
        self.assertGreaterEqual(kappa, 1e5)
        self.assertLessEqual(kappa, 1e9)


class StructureTests(unittest.TestCase):
    def test_krylov_blocks_start_with_unit_vectors(self):
        for kind in (MatrixKind.MONOMIAL, MatrixKind.S_STEP, MatrixKind.NEWTON):
            with self.subTest(kind=kind.value):
                X = generate(MatrixSpec(kind=kind, dims=DIMS, seed=7))
                for k in range(DIMS.p):
                    self.assertAlmostEqual(float(np.linalg.norm(X[:, k * DIMS.s])), 1.0, places=14)

    def test_s_step_restarts_from_the_previous_block(self):
        X = generate(MatrixSpec(kind=MatrixKind.S_STEP, dims=DIMS, seed=7))
        last = X[:, DIMS.s - 1]
        np.testing.assert_allclose(X[:, DIMS.s], last / np.linalg.norm(last), rtol=1e-15, atol=0.0)

    def test_monomial_generator_block_width(self):
        generated = generate_with_meta(MatrixSpec(kind=MatrixKind.MONOMIAL, dims=DIMS, seed=7, gen_block=4))
        self.assertEqual(generated.meta["block_width"], 4)
        for k in range(5):
            self.assertAlmostEqual(float(np.linalg.norm(generated.X[:, 4 * k])), 1.0, places=14)

    def test_monomial_width_must_divide_n(self):
        with self.assertRaises(ParameterError):
            generate(MatrixSpec(kind=MatrixKind.MONOMIAL, dims=DIMS, gen_block=3))

    def test_newton_records_its_shifts(self):
        generated = generate_with_meta(MatrixSpec(kind=MatrixKind.NEWTON, dims=DIMS, seed=7))
        shifts = generated.meta["shifts"]
        self.assertEqual(len(shifts), DIMS.p * (DIMS.s - 1))
        self.assertEqual(shifts[0], 10.0)

    def test_stewart_literal_indices(self):
        dims = BlockLayout(m=100, p=7, s=5)
        generated = generate_with_meta(MatrixSpec(kind=MatrixKind.STEWART, dims=dims, seed=2))
        X = generated.X

        np.testing.assert_array_equal(X[:, 0], X[:, 24])
        np.testing.assert_array_equal(X[:, 34], 0.0)
        self.assertFalse(generated.meta["scaled_indices"])

    def test_stewart_scaled_indices(self):
        self.assertEqual(stewart_indices(20), (10, 14, True))
        X = generate(MatrixSpec(kind=MatrixKind.STEWART, dims=DIMS, seed=2))
        np.testing.assert_array_equal(X[:, 0], X[:, 9])
        np.testing.assert_array_equal(X[:, 13], 0.0)

    def test_stewart_needs_three_columns(self):
        with self.assertRaises(ParameterError):
            generate(MatrixSpec(kind=MatrixKind.STEWART, dims=BlockLayout(m=10, p=1, s=2)))

    def test_stewart_extreme_has_half_rank(self):
        X = generate(MatrixSpec(kind=MatrixKind.STEWART_EXTREME, dims=DIMS, seed=2))
        self.assertEqual(np.linalg.matrix_rank(X), 10)

    def test_rank_def_needs_two_blocks(self):
        with self.assertRaises(ParameterError):
            generate(MatrixSpec(kind=MatrixKind.RANK_DEF, dims=BlockLayout(m=10, p=1, s=3)))

    def test_laeuchli_needs_an_extra_row(self):
        with self.assertRaises(ParameterError):
            generate(MatrixSpec(kind=MatrixKind.LAEUCHLI, dims=BlockLayout(m=20, p=4, s=5)))


class LejaTests(unittest.TestCase):
    def test_starts_at_largest_modulus_and_spreads(self):
        points = leja_points(np.linspace(0.1, 10.0, 100), 3)

        self.assertEqual(points[0], 10.0)
        self.assertAlmostEqual(points[1], 0.1)
        self.assertEqual(len(set(points.tolist())), 3)

    def test_cannot_pick_more_than_available(self):
        with self.assertRaises(ParameterError):
            leja_points(np.arange(3.0), 4)


if __name__ == "__main__":
    unittest.main()
