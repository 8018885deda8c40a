import os
import unittest

import numpy as np

os.environ.setdefault("BGSLAB_ENV_FILE", os.devnull)

from bgslab.core.errors import ContractViolationError, IncompatibleVariantError
from bgslab.core.events import EventLog, SyncOrigin
from bgslab.core.matcore import EPS
from bgslab.schemas.layout import BlockLayout, SkeletonOptions
from bgslab.schemas.matrix import MatrixKind, MatrixSpec
from bgslab.schemas.variants import MuscleId, RunStatus, SkeletonId
from bgslab.services.matgen_service import generate
from bgslab.services.skeleton_service import (
    bcgs_step_sror,
    block_orthogonalize,
    check_compatibility,
    uses_tfix,
    verify_block_pythagorean,
)
from bgslab.utils.helpers import make_rng


def loo(Q: np.ndarray) -> float:
    return float(np.linalg.norm(np.eye(Q.shape[1]) - Q.T @ Q, 2))


def projector_distance(Q: np.ndarray, Qref: np.ndarray) -> float:
    """||Q Q^T - Qref Qref^T||_2 measured through the component of Q outside range(Qref)."""
    return float(np.linalg.norm(Q - Qref @ (Qref.T @ Q), 2))


def compatible(skeleton: SkeletonId, muscle: MuscleId, opts: SkeletonOptions | None = None) -> bool:
    try:
        check_compatibility(skeleton, muscle, opts or SkeletonOptions())
    except IncompatibleVariantError:
        return False
    return True


LAYOUT = BlockLayout(m=100, p=5, s=3)

# skeleton-origin reductions for p = 5
SKELETON_SYNCS = {
    SkeletonId.BCGS: 4,
    SkeletonId.BCGS_PIP: 4,
    SkeletonId.BCGS_PIO: 4,
    SkeletonId.BCGS_RO: 8,
    SkeletonId.BCGS_IRO: 8,
    SkeletonId.BCGS_IRO_LS: 5,
    SkeletonId.BMGS: 10,
    SkeletonId.BMGS_SVL: 8,
    SkeletonId.BMGS_LTS: 8,
    SkeletonId.BMGS_CWY: 4,
    SkeletonId.BMGS_ICWY: 4,
}

# muscle-origin reductions with HouseQR (3 per call) for p = 5, s = 3
HOUSE_MUSCLE_SYNCS = {
    SkeletonId.BCGS: 15,
    SkeletonId.BCGS_PIP: 3,
    SkeletonId.BCGS_PIO: 3 + 4 * 6,
    SkeletonId.BCGS_RO: 30,
    SkeletonId.BCGS_IRO: 27,
    SkeletonId.BCGS_IRO_LS: 0,
    SkeletonId.BMGS: 15,
    SkeletonId.BMGS_CWY: 3,
    SkeletonId.BMGS_ICWY: 3,
}


class SyncCountTests(unittest.TestCase):
    def setUp(self):
        self.X = generate(MatrixSpec(kind=MatrixKind.RAND_NORMAL, dims=LAYOUT, seed=21))

    def test_skeleton_reductions_are_exact(self):
        for skeleton, expected in SKELETON_SYNCS.items():
            with self.subTest(skeleton=skeleton.value):
                result = block_orthogonalize(self.X, LAYOUT, skeleton, MuscleId.HOUSE_QR)

                self.assertIs(result.status, RunStatus.OK)
                self.assertEqual(result.events.count(SyncOrigin.SKELETON), expected)

    def test_muscle_reductions_are_tallied_separately(self):
        for skeleton, expected in HOUSE_MUSCLE_SYNCS.items():
            with self.subTest(skeleton=skeleton.value):
                result = block_orthogonalize(self.X, LAYOUT, skeleton, MuscleId.HOUSE_QR)
                self.assertEqual(result.events.count(SyncOrigin.MUSCLE), expected)

    def test_reorthogonalizing_the_first_block_adds_one_muscle_call(self):
        opts = SkeletonOptions(reorth_first_block=True)
        result = block_orthogonalize(self.X, LAYOUT, SkeletonId.BCGS_IRO, MuscleId.HOUSE_QR, opts)

        self.assertEqual(result.events.count(SyncOrigin.SKELETON), 8)
        self.assertEqual(result.events.count(SyncOrigin.MUSCLE), 30)


class OracleEquivalenceTests(unittest.TestCase):
    def test_every_compatible_pair_matches_householder(self):
        X = generate(MatrixSpec(kind=MatrixKind.RAND_NORMAL, dims=LAYOUT, seed=8))
        Qref, _ = np.linalg.qr(X)
        for skeleton in SkeletonId:
            for muscle in MuscleId:
                if not compatible(skeleton, muscle):
                    continue
                with self.subTest(skeleton=skeleton.value, muscle=muscle.value):
                    result = block_orthogonalize(X, LAYOUT, skeleton, muscle, rng=make_rng(1))

                    self.assertIs(result.status, RunStatus.OK)
                    self.assertLessEqual(projector_distance(result.Q, Qref), 1e-10)
                    np.testing.assert_allclose(result.Q @ result.R, X, atol=1e-11)

    def test_block_r_is_upper_triangular(self):
        X = generate(MatrixSpec(kind=MatrixKind.RAND_UNIFORM, dims=LAYOUT, seed=2))
        for skeleton in (SkeletonId.BCGS_IRO, SkeletonId.BMGS_CWY, SkeletonId.BCGS_PIO):
            with self.subTest(skeleton=skeleton.value):
                result = block_orthogonalize(X, LAYOUT, skeleton, MuscleId.MGS)
                np.testing.assert_allclose(np.tril(result.R, -1), 0.0, atol=0.0)

    def test_single_block_reduces_to_the_muscle(self):
        layout = BlockLayout(m=20, p=1, s=4)
        X = np.random.default_rng(3).standard_normal((20, 4))
        for skeleton in SkeletonId:
            muscle = MuscleId.CGS_SROR if skeleton is SkeletonId.BCGS_SROR else MuscleId.HOUSE_QR
            with self.subTest(skeleton=skeleton.value):
                result = block_orthogonalize(X, layout, skeleton, muscle, rng=make_rng(0))
                self.assertIs(result.status, RunStatus.OK)
                np.testing.assert_allclose(result.Q @ result.R, X, atol=1e-12)


class CompatibilityTests(unittest.TestCase):
    def test_sror_skeleton_needs_an_sror_muscle(self):
        X = np.random.default_rng(0).standard_normal((LAYOUT.m, LAYOUT.n))
        with self.assertRaises(IncompatibleVariantError):
            block_orthogonalize(X, LAYOUT, SkeletonId.BCGS_SROR, MuscleId.HOUSE_QR)
        self.assertTrue(compatible(SkeletonId.BCGS_SROR, MuscleId.CGS_SRO))
        self.assertTrue(compatible(SkeletonId.BCGS_SROR, MuscleId.CGS_SROR))

    def test_t_fix_on_bcgs_is_rejected(self):
        self.assertFalse(compatible(SkeletonId.BCGS, MuscleId.MGS_SVL, SkeletonOptions(t_fix=True)))

    def test_t_fix_applies_only_to_bcgs_iro_and_bmgs(self):
        opts = SkeletonOptions(t_fix=True)
        self.assertTrue(uses_tfix(SkeletonId.BMGS, opts))
        self.assertTrue(uses_tfix(SkeletonId.BCGS_IRO, opts))
        self.assertFalse(uses_tfix(SkeletonId.BCGS_PIP, opts))
        self.assertFalse(uses_tfix(SkeletonId.BMGS, SkeletonOptions()))

    def test_shape_mismatch_is_a_contract_violation(self):
        with self.assertRaises(ContractViolationError):
            block_orthogonalize(np.ones((100, 14)), LAYOUT, SkeletonId.BCGS, MuscleId.CGS)


class TFixTests(unittest.TestCase):
    def test_t_fix_restores_orthogonality_on_laeuchli(self):
        layout = BlockLayout(m=1000, p=10, s=5)
        X = generate(MatrixSpec(kind=MatrixKind.LAEUCHLI, dims=layout, eta=1e-8))

        plain = block_orthogonalize(X, layout, SkeletonId.BMGS, MuscleId.MGS_SVL)
        fixed = block_orthogonalize(X, layout, SkeletonId.BMGS, MuscleId.MGS_SVL, SkeletonOptions(t_fix=True))

        self.assertIs(plain.status, RunStatus.OK)
        self.assertIs(fixed.status, RunStatus.OK)
        self.assertGreaterEqual(loo(plain.Q), 1e-2)
        self.assertLessEqual(loo(fixed.Q), 1e-6)
        self.assertGreaterEqual(loo(plain.Q) / loo(fixed.Q), 1e6)

    def test_t_fix_is_a_no_op_for_muscles_without_t(self):
        X = generate(MatrixSpec(kind=MatrixKind.RAND_NORMAL, dims=LAYOUT, seed=4))

        plain = block_orthogonalize(X, LAYOUT, SkeletonId.BMGS, MuscleId.HOUSE_QR)
        fixed = block_orthogonalize(X, LAYOUT, SkeletonId.BMGS, MuscleId.HOUSE_QR, SkeletonOptions(t_fix=True))

        np.testing.assert_array_equal(plain.Q, fixed.Q)


class TFormTests(unittest.TestCase):
    """MGS_SVL builds its T in direct form; BMGS_LTS keeps inverse-form T blocks."""

    def setUp(self):
        self.layout = BlockLayout(m=120, p=3, s=4)
        rng = np.random.default_rng(6)
        self.X = rng.standard_normal((self.layout.m, self.layout.n))
        # nearly parallel leading columns give the first block a visible T
        self.X[:, 1] = self.X[:, 0] + 1e-6 * self.X[:, 1]
        self.first = self.layout.block(0)

    def leading_coupling(self, result) -> float:
        coupling = float(result.Q[:, 0] @ result.Q[:, 1])
        self.assertGreater(abs(coupling), 1e-12)
        return coupling

    def test_mixed_form_pair_keeps_the_muscle_t_as_returned(self):
        result = block_orthogonalize(self.X, self.layout, SkeletonId.BMGS_LTS, MuscleId.MGS_SVL)

        self.assertIs(result.status, RunStatus.OK)
        np.testing.assert_allclose(result.T[0, 1], -self.leading_coupling(result), rtol=1e-2, atol=1e-14)

    def test_conversion_inverts_the_block_when_asked(self):
        plain = block_orthogonalize(self.X, self.layout, SkeletonId.BMGS_LTS, MuscleId.MGS_SVL)
        converted = block_orthogonalize(
            self.X, self.layout, SkeletonId.BMGS_LTS, MuscleId.MGS_SVL, SkeletonOptions(convert_t_form=True)
        )

        self.assertIs(converted.status, RunStatus.OK)
        np.testing.assert_allclose(converted.T[0, 1], self.leading_coupling(converted), rtol=1e-2, atol=1e-14)
        np.testing.assert_allclose(
            converted.T[self.first, self.first] @ plain.T[self.first, self.first], np.eye(self.layout.s), atol=1e-12
        )

    def test_matching_forms_are_never_converted(self):
        plain = block_orthogonalize(self.X, self.layout, SkeletonId.BMGS_SVL, MuscleId.MGS_SVL)
        asked = block_orthogonalize(
            self.X, self.layout, SkeletonId.BMGS_SVL, MuscleId.MGS_SVL, SkeletonOptions(convert_t_form=True)
        )

        np.testing.assert_array_equal(asked.T, plain.T)
        np.testing.assert_array_equal(asked.Q, plain.Q)


class RobustStepTests(unittest.TestCase):
    def test_block_step_handles_a_zero_and_a_dependent_column(self):
        rng = np.random.default_rng(6)
        Qprev, _ = np.linalg.qr(rng.standard_normal((40, 4)))
        Xk = rng.standard_normal((40, 3))
        Xk[:, 0] = 0.0
        Xk[:, 2] = Qprev @ np.array([1.0, 2.0, 3.0, 4.0])
        events = EventLog()

        step = bcgs_step_sror(Qprev, Xk, 100.0, make_rng(5), events)

        full = np.hstack([Qprev, step.Qk])
        self.assertLessEqual(loo(full), 1e-12)
        np.testing.assert_array_equal(step.Rcol[:, 0], 0.0)
        np.testing.assert_array_equal(step.Rdiag[:, 0], 0.0)
        np.testing.assert_allclose(Qprev @ step.Rcol + step.Qk @ step.Rdiag, Xk, atol=1e-12)
        np.testing.assert_array_equal(step.replaced, [True, False, True])
        self.assertGreater(events.count(SyncOrigin.SKELETON), 0)

    def test_zero_column_in_the_first_block_is_replaced(self):
        Xk = np.zeros((30, 2))
        Xk[:, 1] = np.random.default_rng(7).standard_normal(30)

        step = bcgs_step_sror(np.zeros((30, 0)), Xk, 100.0, make_rng(3))

        np.testing.assert_array_equal(step.replaced, [True, False])
        np.testing.assert_array_equal(step.Rdiag[:, 0], 0.0)
        self.assertLessEqual(loo(step.Qk), 1e-12)
        np.testing.assert_allclose(step.Qk @ step.Rdiag, Xk, atol=1e-12)


class BlockPythagoreanTests(unittest.TestCase):
    def test_orthogonal_pairs(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            basis, _ = np.linalg.qr(rng.standard_normal((20, 6)))
            Y = basis[:, :3] @ rng.standard_normal((3, 3))
            Z = basis[:, 3:] @ rng.standard_normal((3, 3))
            self.assertLessEqual(verify_block_pythagorean(Y, Z), 100 * EPS)

    def test_three_four_five(self):
        Y = np.array([[3.0], [0.0]])
        Z = np.array([[0.0], [4.0]])
        self.assertEqual(verify_block_pythagorean(Y, Z), 0.0)

    def test_shape_mismatch(self):
        with self.assertRaises(ContractViolationError):
            verify_block_pythagorean(np.ones((3, 2)), np.ones((3, 1)))


if __name__ == "__main__":
    unittest.main()
