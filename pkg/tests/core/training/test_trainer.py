import tempfile
import unittest
from pathlib import Path

import numpy as np

from gazeauth.core.models import ChannelSpec, MinibatchSpec, MsLossConfig, NetworkConfig, SignalConfig, TrainPlan
from gazeauth.core.network.params import init_params
from gazeauth.core.training.trainer import ensemble_folds, fit, steps_per_epoch, train, write_loss_history
from gazeauth.utils.io import read_csv
from tests.support import tiny_dataset

NETWORK = NetworkConfig(input_channels=2, time_steps=24, num_conv_layers=3, growth=2, dilations=[1, 2, 1], embedding_dim=4)
MINIBATCH = MinibatchSpec(users_per_batch=2, samples_per_user=4)


def toy_windows(seed: int = 0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(["a", "b", "c", "d"], 8)
    offsets = {u: rng.normal(size=(2, 1)) for u in "abcd"}
    x = np.stack([rng.normal(size=(2, 24)) + 2 * offsets[u] for u in labels])
    return x, labels


class TestFit(unittest.TestCase):

    def test_deterministic(self):
        x, labels = toy_windows()
        plan = TrainPlan(epochs=2)
        a = fit(x, labels, NETWORK, MINIBATCH, MsLossConfig(), plan, seed=4)
        b = fit(x, labels, NETWORK, MINIBATCH, MsLossConfig(), plan, seed=4)
        self.assertEqual(steps_per_epoch(32, MINIBATCH), 4)
        self.assertEqual(a.epochs_completed, 2)
        self.assertEqual([r.mean_loss for r in a.history], [r.mean_loss for r in b.history])
        for name, t in a.params.tensors.items():
            self.assertTrue(np.array_equal(t, b.params.tensors[name]), name)
        self.assertTrue(all(np.isfinite(r.mean_loss) for r in a.history))

    def test_zero_epochs_returns_initialization(self):
        x, labels = toy_windows()
        result = fit(x, labels, NETWORK, MINIBATCH, MsLossConfig(), TrainPlan(epochs=0), seed=2)
        self.assertEqual(result.epochs_completed, 0)
        self.assertEqual(result.history, [])
        init = init_params(NETWORK, 2)
        for name, t in init.tensors.items():
            self.assertTrue(np.array_equal(t, result.params.tensors[name]), name)

    def test_stop_after_epochs(self):
        x, labels = toy_windows()
        with self.assertLogs("gazeauth.core.training.trainer", "WARNING") as logs:
            result = fit(x, labels, NETWORK, MINIBATCH, MsLossConfig(), TrainPlan(epochs=3, stop_after_epochs=1), seed=0)
        self.assertEqual(result.epochs_completed, 1)
        self.assertEqual(len(result.history), 1)
        self.assertTrue(any("1 of 3" in line for line in logs.output))

    def test_loss_history_csv(self):
        x, labels = toy_windows()
        result = fit(x, labels, NETWORK, MINIBATCH, MsLossConfig(), TrainPlan(epochs=1), seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            write_loss_history(result.history, Path(tmp) / "loss.csv")
            header, rows = read_csv(Path(tmp) / "loss.csv")
        self.assertEqual(header, ["epoch", "mean_loss", "lr"])
        self.assertEqual(len(rows), 1)


class TestTrain(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dataset = tiny_dataset(Path(cls.tmp.name), n_users=8)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def _train(self, folds: int):
        channels = ChannelSpec(eyes=["L"], axes=["V"])
        signal = SignalConfig(window_samples=24)
        plan = TrainPlan(epochs=1, ensemble_folds=folds)
        users = self.dataset.user_ids
        return train(self.dataset, users, channels, signal, NETWORK, MINIBATCH, MsLossConfig(), plan, seed=3)

    def test_single_model(self):
        result = self._train(1)
        artifact = result.artifact
        self.assertFalse(artifact.is_ensemble)
        self.assertEqual(artifact.members[0].seed, 3)
        self.assertEqual(artifact.stats.channel_names, ("L.V.az", "L.V.el"))
        self.assertEqual(len(result.histories), 1)
        self.assertEqual(artifact.hash(), self._train(1).artifact.hash())

    def test_four_fold_ensemble(self):
        result = self._train(4)
        artifact = result.artifact
        self.assertEqual(len(artifact.members), 4)
        self.assertEqual(artifact.dim, 16)
        folds = ensemble_folds(self.dataset.user_ids, 4, 3)
        self.assertEqual(sorted(u for f in folds for u in f), self.dataset.user_ids)
        for f, member in enumerate(artifact.members):
            self.assertEqual(member.fold, f)
            self.assertFalse(set(member.train_users) & set(folds[f]))
        self.assertEqual(len({m.seed for m in artifact.members}), 4)


class TestSmokeRun(unittest.TestCase):
    """Default network on 20 synthetic users with one minute of random saccades each."""

    def test_second_epoch_loss_is_lower(self):
        with tempfile.TemporaryDirectory() as tmp:
            dataset = tiny_dataset(
                Path(tmp), n_users=20, random_saccade_recordings=1,
                random_saccade={"kind": "random_saccade", "duration": 60.0},
            )
            result = train(
                dataset, dataset.user_ids, ChannelSpec(), SignalConfig(), NetworkConfig(input_channels=8),
                MinibatchSpec(users_per_batch=16, samples_per_user=4), MsLossConfig(), TrainPlan(epochs=2), seed=0,
            )
        history = result.histories[0]
        self.assertEqual(len(history), 2)
        self.assertLess(history[-1].mean_loss, history[0].mean_loss)


if __name__ == "__main__":
    unittest.main()
