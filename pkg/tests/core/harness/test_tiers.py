import tempfile
import unittest
from collections import Counter
from pathlib import Path

from gazeauth.core.errors import ConfigError, DataError
from gazeauth.core.harness.tiers import partition_by_accuracy, split_by_tiers
from gazeauth.core.models import DatasetManifest, RecordingEntry, TierScheme, UserEntry
from gazeauth.core.signal.dataset import Dataset
from tests.support import tiny_dataset

SCHEME = TierScheme(names=["train_low", "test_low", "test_high", "train_high"], weights=[1, 1, 1, 1])


class TestTiers(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dataset = tiny_dataset(Path(cls.tmp.name), n_users=8)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_partition_orders_by_accuracy(self):
        tiers = partition_by_accuracy(self.dataset, SCHEME)
        self.assertEqual(set(Counter(tiers.values()).values()), {2})
        acc = {u: self.dataset.user(u).accuracy_error_deg for u in tiers}
        low = max(acc[u] for u, t in tiers.items() if t == "train_low")
        high = min(acc[u] for u, t in tiers.items() if t == "train_high")
        self.assertLessEqual(low, high)

    def test_split(self):
        train, test = split_by_tiers(self.dataset, SCHEME, ["train_low", "train_high"], ["test_low"])
        self.assertEqual(len(train), 4)
        self.assertEqual(len(test), 2)
        self.assertFalse(set(train) & set(test))
        with self.assertRaises(ConfigError):
            split_by_tiers(self.dataset, SCHEME, ["train_low"], ["train_low"])
        with self.assertRaises(ConfigError):
            split_by_tiers(self.dataset, SCHEME, ["train_low"], ["test_middle"])

    def test_missing_accuracy(self):
        entry = RecordingEntry(path="x.csv", task="random_saccade", repetition=1)
        users = [
            UserEntry(user_id="a", recordings=[entry, entry.model_copy(update={"repetition": 2})]),
            UserEntry(user_id="b", recordings=[entry], accuracy_error_deg=1.0),
        ]
        with self.assertRaises(DataError):
            partition_by_accuracy(Dataset(DatasetManifest(users=users), Path(".")), SCHEME)


if __name__ == "__main__":
    unittest.main()
