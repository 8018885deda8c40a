import os
import unittest

import numpy as np

os.environ.setdefault("BGSLAB_ENV_FILE", os.devnull)

from bgslab.core.errors import ContractViolationError
from bgslab.core.events import EventLog, SyncOrigin
from bgslab.core.matcore import EPS
from bgslab.schemas.variants import MuscleId, RunStatus
from bgslab.services.muscle_service import (
    MuscleParams,
    cgs_step_sror,
    cholqr_shift,
    effective_rpltol,
    intra_orthogonalize,
)
from bgslab.utils.helpers import make_rng


def conditioned(m: int, n: int, kappa: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (U * np.logspace(0.0, -np.log10(kappa), n)) @ V.T


def loo(Q: np.ndarray) -> float:
    return float(np.linalg.norm(np.eye(Q.shape[1]) - Q.T @ Q, 2))


# syncs for a single m x 6 block; a column-wise method that spends two
# reductions per column spends only the norm on the first, so 2s - 1
EXPECTED_SYNCS = {
    MuscleId.CGS: 11,
    MuscleId.CGS_P: 6,
    MuscleId.CGS_RO: 22,
    MuscleId.CGS_IRO: 21,
    MuscleId.CGS_IRO_LS: 6,
    MuscleId.MGS: 21,
    MuscleId.MGS_RO: 42,
    MuscleId.MGS_IRO: 36,
    MuscleId.MGS_SVL: 11,
    MuscleId.MGS_LTS: 11,
    MuscleId.MGS_CWY: 6,
    MuscleId.MGS_ICWY: 6,
    MuscleId.HOUSE_QR: 6,
    MuscleId.CHOL_QR: 1,
    MuscleId.CHOL_QR_RO: 2,
    MuscleId.SH_CHOL_QR_RORO: 3,
}


class IntraOrthogonalizeTests(unittest.TestCase):
    def setUp(self):
        self.X = conditioned(200, 6, 10.0, seed=11)

    def test_every_muscle_factors_a_well_conditioned_block(self):
        for muscle in MuscleId:
            with self.subTest(muscle=muscle.value):
                result = intra_orthogonalize(self.X, muscle, MuscleParams(rng=make_rng(1)))

                self.assertIs(result.status, RunStatus.OK)
                self.assertLessEqual(loo(result.Q), 1e-12)
                np.testing.assert_allclose(result.Q @ result.R, self.X, atol=1e-12)
                np.testing.assert_allclose(np.tril(result.R, -1), 0.0, atol=0.0)

    def test_sync_counts_are_exact(self):
        for muscle, expected in EXPECTED_SYNCS.items():
            with self.subTest(muscle=muscle.value):
                result = intra_orthogonalize(self.X, muscle)

                self.assertEqual(result.events.count(SyncOrigin.MUSCLE), expected)
                self.assertEqual(result.events.count(SyncOrigin.SKELETON), 0)

    def test_sror_syncs_at_least_once_per_column(self):
        result = intra_orthogonalize(self.X, MuscleId.CGS_SROR, MuscleParams(rng=make_rng(2)))
        self.assertGreaterEqual(result.events.count(), 6)

    def test_non_t_muscles_report_identity_t(self):
        result = intra_orthogonalize(self.X, MuscleId.HOUSE_QR)
        np.testing.assert_array_equal(result.T, np.eye(6))

    def test_input_is_not_modified(self):
        X = self.X.copy()
        intra_orthogonalize(X, MuscleId.MGS)
        np.testing.assert_array_equal(X, self.X)

    def test_single_column(self):
        x = np.array([[3.0], [4.0]])
        for muscle in MuscleId:
            with self.subTest(muscle=muscle.value):
                result = intra_orthogonalize(x, muscle, MuscleParams(rng=make_rng(0)))
                self.assertIs(result.status, RunStatus.OK)
                self.assertAlmostEqual(abs(result.R[0, 0]), 5.0, places=12)

    def test_wide_block_is_a_contract_violation(self):
        with self.assertRaises(ContractViolationError):
            intra_orthogonalize(np.ones((2, 3)), MuscleId.CGS)

    def test_negative_rpltol_is_a_contract_violation(self):
        with self.assertRaises(ContractViolationError):
            intra_orthogonalize(self.X, MuscleId.CGS_SROR, MuscleParams(rpltol=-1.0))


class BreakdownTests(unittest.TestCase):
    def setUp(self):
        self.X = conditioned(50, 4, 10.0, seed=5)
        self.X[:, 2] = 0.0

    def test_cholqr_reports_cholesky_failure(self):
        result = intra_orthogonalize(self.X, MuscleId.CHOL_QR)

        self.assertIs(result.status, RunStatus.CHOL_FAIL)
        self.assertTrue(np.all(np.isnan(result.Q)))
        self.assertEqual(result.events.count(), 1)

    def test_cgs_reports_nan_on_a_zero_column(self):
        result = intra_orthogonalize(self.X, MuscleId.CGS)
        self.assertIs(result.status, RunStatus.NAN_ENCOUNTERED)

    def test_cgs_sror_replaces_the_zero_column(self):
        result = intra_orthogonalize(self.X, MuscleId.CGS_SROR, MuscleParams(rng=make_rng(3)))

        self.assertIs(result.status, RunStatus.OK)
        self.assertLessEqual(loo(result.Q), 1e-13)
        np.testing.assert_array_equal(result.R[:, 2], 0.0)
        np.testing.assert_allclose(result.Q @ result.R, self.X, atol=1e-13)

    def test_shifted_cholqr_survives_high_condition_numbers(self):
        X = conditioned(200, 6, 1e10, seed=4)

        result = intra_orthogonalize(X, MuscleId.SH_CHOL_QR_RORO)

        self.assertIs(result.status, RunStatus.OK)
        self.assertLessEqual(loo(result.Q), 1e-12)


class SrorStepTests(unittest.TestCase):
    def test_first_column_is_normalized(self):
        step = cgs_step_sror(np.zeros((3, 0)), np.array([0.0, 3.0, 4.0]), 0.0, 100.0, make_rng(0))

        np.testing.assert_allclose(step.y, [0.0, 0.6, 0.8])
        self.assertEqual(step.rho, 5.0)
        self.assertEqual(step.r.size, 0)

    def test_dependent_column_is_replaced_by_an_orthogonal_direction(self):
        Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((30, 3)))
        x = Q @ np.array([1.0, -2.0, 0.5])
        events = EventLog()

        step = cgs_step_sror(Q, x, 0.0, 100.0, make_rng(4), events)

        self.assertLessEqual(np.max(np.abs(Q.T @ step.y)), 1e-13)
        self.assertAlmostEqual(float(np.linalg.norm(step.y)), 1.0, places=13)
        self.assertLessEqual(step.rho, 1e-12)
        np.testing.assert_allclose(step.r, [1.0, -2.0, 0.5], atol=1e-13)
        self.assertGreaterEqual(step.northog, 2)
        self.assertGreaterEqual(events.count(SyncOrigin.MUSCLE), 3)

    def test_same_stream_gives_same_replacement(self):
        Q = np.eye(4)[:, :2]
        x = np.array([1.0, 1.0, 0.0, 0.0])

        first = cgs_step_sror(Q, x, 0.0, 100.0, make_rng(7))
        second = cgs_step_sror(Q, x, 0.0, 100.0, make_rng(7))

        np.testing.assert_array_equal(first.y, second.y)

    def test_sro_pins_replacement_tolerance_to_zero(self):
        self.assertEqual(effective_rpltol(MuscleId.CGS_SRO, 100.0), 0.0)
        self.assertEqual(effective_rpltol(MuscleId.CGS_SROR, 100.0), 100.0)

    def test_cholqr_shift_formula(self):
        self.assertAlmostEqual(cholqr_shift(100, 5, 4.0), 11.0 * (500 + 30) * EPS * 4.0)


if __name__ == "__main__":
    unittest.main()
