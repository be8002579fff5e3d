import math
import unittest

import numpy as np

from gazeauth.core.errors import DataError, NumericalError
from gazeauth.core.models import MsLossConfig
from gazeauth.core.training.loss import (
    MinedPairs,
    cosine_matrix,
    mine_pairs,
    ms_loss,
    ms_loss_and_grad,
)

CFG = MsLossConfig()

S_CASE = np.array([
    [1.0, 0.8, 0.3, 0.1],
    [0.8, 1.0, 0.2, 0.75],
    [0.3, 0.2, 1.0, 0.9],
    [0.1, 0.75, 0.9, 1.0],
])
LABELS = ["a", "a", "b", "b"]


def term_by_term(S: np.ndarray, mined: MinedPairs, cfg: MsLossConfig) -> float:
    m = S.shape[0]
    total = 0.0
    for i in range(m):
        pos = sum(math.exp(-cfg.alpha * (S[i, k] - cfg.lam)) for k in range(m) if mined.positives[i, k])
        neg = sum(math.exp(cfg.beta * (S[i, k] - cfg.lam)) for k in range(m) if mined.negatives[i, k])
        total += math.log(1 + pos) / cfg.alpha + math.log(1 + neg) / cfg.beta
    return total / m


class TestMiner(unittest.TestCase):

    def test_epsilon_rule(self):
        mined = mine_pairs(S_CASE, LABELS, CFG)
        expected_pos = np.zeros((4, 4), dtype=bool)
        expected_pos[1, 0] = True
        expected_neg = np.zeros((4, 4), dtype=bool)
        expected_neg[1, 3] = True
        self.assertTrue(np.array_equal(mined.positives, expected_pos), mined.positives)
        self.assertTrue(np.array_equal(mined.negatives, expected_neg), mined.negatives)
        self.assertEqual(mined.n_mined, 2)

    def test_never_mines_the_diagonal(self):
        mined = mine_pairs(S_CASE, LABELS, MsLossConfig(epsilon=5.0))
        self.assertFalse(np.any(np.diag(mined.positives)))
        self.assertFalse(np.any(mined.positives & mined.negatives))

    def test_mined_sets_grow_with_epsilon(self):
        rng = np.random.default_rng(12)
        labels = np.repeat(np.arange(4), 3)
        for _ in range(50):
            S = cosine_matrix(rng.normal(size=(12, 6)))[0]
            S = (S + S.T) / 2
            previous = None
            for eps in (0.0, 0.05, 0.1, 0.5, 2.0):
                mined = mine_pairs(S, labels, MsLossConfig(epsilon=eps))
                if previous is not None:
                    self.assertFalse(np.any(previous.positives & ~mined.positives), eps)
                    self.assertFalse(np.any(previous.negatives & ~mined.negatives), eps)
                previous = mined

    def test_invalid_batches(self):
        with self.assertRaises(DataError):
            mine_pairs(S_CASE, ["a"] * 4, CFG)
        with self.assertRaises(DataError):
            mine_pairs(S_CASE, ["a", "b", "c", "d"], CFG)
        asym = S_CASE.copy()
        asym[0, 1] = 0.5
        with self.assertRaises(DataError):
            mine_pairs(asym, LABELS, CFG)


class TestMsLoss(unittest.TestCase):

    def test_single_positive_at_margin(self):
        S = np.full((4, 4), 0.5)
        positives = np.array(LABELS)[:, None] == np.array(LABELS)[None, :]
        np.fill_diagonal(positives, False)
        mined = MinedPairs(positives, np.zeros((4, 4), dtype=bool))
        self.assertAlmostEqual(ms_loss(S, mined, CFG), 0.5 * math.log(2), places=12)

    def test_matches_term_by_term(self):
        for eps in (0.1, 0.3, 2.0):
            cfg = MsLossConfig(epsilon=eps)
            mined = mine_pairs(S_CASE, LABELS, cfg)
            self.assertAlmostEqual(ms_loss(S_CASE, mined, cfg), term_by_term(S_CASE, mined, cfg), delta=1e-9)

    def test_all_mined_out_is_zero(self):
        # positives far above every negative leave nothing to mine
        S = np.array([[1.0, 0.95, -0.5], [0.95, 1.0, -0.4], [-0.5, -0.4, 1.0]])
        mined = mine_pairs(S, [0, 0, 1], CFG)
        self.assertEqual(mined.n_mined, 0)
        self.assertEqual(ms_loss(S, mined, CFG), 0.0)
        E = np.array([[1.0, 0.0], [1.0, 0.01], [0.0, 1.0]])
        loss, grad, mined = ms_loss_and_grad(E, [0, 0, 1], CFG)
        self.assertEqual(mined.n_mined, 0)
        self.assertEqual(loss, 0.0)
        self.assertEqual(float(np.abs(grad).max()), 0.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        E = rng.normal(size=(6, 5))
        labels = [0, 0, 1, 1, 2, 2]
        cfg = MsLossConfig(beta=10.0, epsilon=1.0)
        _, grad, mined = ms_loss_and_grad(E, labels, cfg)

        def loss(x: np.ndarray) -> float:
            return ms_loss(cosine_matrix(x)[0], mined, cfg)

        h = 1e-6
        numeric = np.zeros_like(E)
        for idx in np.ndindex(*E.shape):
            up, down = E.copy(), E.copy()
            up[idx] += h
            down[idx] -= h
            numeric[idx] = (loss(up) - loss(down)) / (2 * h)
        self.assertTrue(np.allclose(grad, numeric, atol=1e-7), np.abs(grad - numeric).max())

    def test_invariant_to_batch_order(self):
        rng = np.random.default_rng(5)
        labels = np.repeat(np.arange(4), 4)
        for _ in range(50):
            E = rng.normal(size=(16, 8))
            perm = rng.permutation(16)
            loss, grad, _ = ms_loss_and_grad(E, labels, CFG)
            loss_p, grad_p, _ = ms_loss_and_grad(E[perm], labels[perm], CFG)
            self.assertAlmostEqual(loss, loss_p, delta=1e-12)
            self.assertTrue(np.allclose(grad[perm], grad_p, rtol=1e-9, atol=1e-12))

    def test_invariant_to_embedding_scale(self):
        rng = np.random.default_rng(6)
        labels = np.repeat(np.arange(4), 4)
        for _ in range(50):
            E = rng.normal(size=(16, 8))
            c = rng.uniform(0.1, 10.0)
            loss, grad, _ = ms_loss_and_grad(E, labels, CFG)
            loss_c, grad_c, _ = ms_loss_and_grad(c * E, labels, CFG)
            self.assertAlmostEqual(loss, loss_c, delta=1e-12)
            self.assertTrue(np.allclose(grad / c, grad_c, rtol=1e-9, atol=1e-12))

    def test_zero_embedding(self):
        with self.assertRaises(NumericalError):
            cosine_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))


if __name__ == "__main__":
    unittest.main()
