import unittest
from collections import Counter

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.models import MinibatchSpec
from gazeauth.core.training.sampler import sample_minibatch


class TestSampler(unittest.TestCase):

    def test_balanced_batch(self):
        index = {f"u{i:02d}": list(range(20 * i, 20 * i + 20)) for i in range(40)}
        batch = sample_minibatch(index, MinibatchSpec(), np.random.default_rng(0))
        self.assertEqual(batch.window_ids.shape, (256,))
        counts = Counter(batch.labels.tolist())
        self.assertEqual(len(counts), 16)
        self.assertEqual(set(counts.values()), {16})
        for u, ids in index.items():
            drawn = batch.window_ids[batch.labels == u]
            self.assertTrue(set(drawn.tolist()) <= set(ids))
            self.assertEqual(len(set(drawn.tolist())), drawn.size, "repeats despite a large enough pool")

    def test_small_pool_repeats(self):
        batch = sample_minibatch({"a": [0, 1, 2], "b": [3, 4, 5]}, MinibatchSpec(users_per_batch=2, samples_per_user=5), np.random.default_rng(1))
        self.assertEqual(batch.window_ids.size, 10)
        self.assertLess(len(set(batch.window_ids.tolist())), 10)

    def test_same_rng_same_batch(self):
        index = {f"u{i}": list(range(10 * i, 10 * i + 10)) for i in range(8)}
        spec = MinibatchSpec(users_per_batch=4, samples_per_user=3)
        a = sample_minibatch(index, spec, np.random.default_rng(9))
        b = sample_minibatch(index, spec, np.random.default_rng(9))
        self.assertTrue(np.array_equal(a.window_ids, b.window_ids))

    def test_too_few_users(self):
        with self.assertRaises(DataError):
            sample_minibatch({"a": [0, 1], "b": []}, MinibatchSpec(users_per_batch=2), np.random.default_rng(0))


if __name__ == "__main__":
    unittest.main()
