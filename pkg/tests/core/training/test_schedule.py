import unittest

import numpy as np

from gazeauth.core.models import AdamConfig, LrSchedule, NetworkConfig
from gazeauth.core.network.params import init_params
from gazeauth.core.training.optim import Adam
from gazeauth.core.training.schedule import lr_at, peak_step


class TestOneCycle(unittest.TestCase):

    def test_endpoints(self):
        s = LrSchedule()
        total = 1000
        self.assertEqual(peak_step(total, s), 300)
        self.assertAlmostEqual(lr_at(0, total, s), 1e-4, delta=1e-12)
        self.assertAlmostEqual(lr_at(300, total, s), 1e-2, delta=1e-12)
        self.assertAlmostEqual(lr_at(total - 1, total, s), 1e-7, delta=1e-12)

    def test_continuous_and_unimodal(self):
        s = LrSchedule()
        total = 200
        lrs = np.array([lr_at(i, total, s) for i in range(total)])
        p = peak_step(total, s)
        self.assertTrue(np.all(np.diff(lrs[: p + 1]) > 0))
        self.assertTrue(np.all(np.diff(lrs[p:]) < 0))
        self.assertLess(abs(lrs[p + 1] - lrs[p]), 1e-3 * s.peak)

    def test_short_runs(self):
        s = LrSchedule()
        self.assertEqual(lr_at(0, 1, s), s.start)
        self.assertEqual(lr_at(1, 2, s), s.end)
        self.assertEqual(peak_step(3, s), 1)
        self.assertAlmostEqual(lr_at(1, 3, s), s.peak)
        with self.assertRaises(ValueError):
            lr_at(5, 5, s)


class TestAdam(unittest.TestCase):

    def test_first_step_moves_by_lr(self):
        config = NetworkConfig(input_channels=1, time_steps=8, num_conv_layers=1, growth=1, dilations=[1], embedding_dim=1)
        params = init_params(config, 0)
        before = {k: v.copy() for k, v in params.tensors.items()}
        grads = {name: np.full_like(t, 2.0) for name, t in params.trainable()}
        Adam(params, AdamConfig()).step(params, grads, lr=0.01)
        for name, t in params.trainable():
            # bias-corrected first step is lr * g / (|g| + eps)
            self.assertTrue(np.allclose(before[name] - t, 0.01, atol=1e-9), name)
        self.assertTrue(np.array_equal(params.tensors["bn1.running_var"], before["bn1.running_var"]))

    def test_zero_gradient_leaves_params_unchanged(self):
        config = NetworkConfig(input_channels=2, time_steps=8, num_conv_layers=2, growth=2, dilations=[1, 2], embedding_dim=3)
        params = init_params(config, 1)
        before = {k: v.copy() for k, v in params.tensors.items()}
        adam = Adam(params, AdamConfig())
        zeros = {name: np.zeros_like(t) for name, t in params.trainable()}
        for _ in range(5):
            adam.step(params, zeros, lr=0.01)
        for k, v in before.items():
            self.assertTrue(np.array_equal(params.tensors[k], v), k)
        self.assertEqual(adam.state.step, 5)


if __name__ == "__main__":
    unittest.main()
