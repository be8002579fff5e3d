import tempfile
import unittest
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from gazeauth.core.errors import ConfigError
from gazeauth.core.factories import TaskFactory
from gazeauth.core.models import SynthDatasetSpec, TaskSpec
from gazeauth.core.synth.dataset import colored_noise, generate_dataset, generate_recording
from gazeauth.core.synth.signature import generate_user
from gazeauth.core.synth.tasks import RandomSaccadeTask, SmoothPursuitTask


class TestRecordingGeneration(unittest.TestCase):

    def setUp(self):
        self.signature = generate_user(SynthDatasetSpec(), 3)

    def test_length_and_determinism(self):
        task = TaskSpec(kind="random_saccade", duration=20.0)
        a = generate_recording(self.signature, task, seed=42)
        b = generate_recording(self.signature, task, seed=42)
        c = generate_recording(self.signature, task, seed=43)
        self.assertEqual(a.recording.n_samples, 1440)
        self.assertEqual(a.recording.positions.shape, (1440, 8))
        self.assertTrue(np.array_equal(a.recording.positions, b.recording.positions))
        self.assertFalse(np.array_equal(a.recording.positions, c.recording.positions))
        self.assertGreater(a.accuracy_error, 0.0)

    def test_visual_minus_optical_is_kappa(self):
        quiet = replace(
            self.signature,
            gain=np.stack([np.eye(2), np.eye(2)]),
            noise_amplitude=0.0,
            accuracy_bias=0.0,
        )
        rec = generate_recording(quiet, TaskSpec(kind="smooth_pursuit", duration=10.0), seed=1).recording
        for e, eye in enumerate(("L", "R")):
            for c, comp in enumerate(("az", "el")):
                diff = rec.channel(eye, "VminusO", comp)
                self.assertTrue(np.allclose(diff, quiet.kappa[e, c], atol=1e-12), f"{eye}.{comp}")

    def test_visual_axis_is_linear_map_of_optical(self):
        rec = generate_recording(self.signature, TaskSpec(kind="random_saccade", duration=10.0), seed=5).recording
        optical = rec.positions[:, 0:2]
        visual = rec.positions[:, 2:4]
        self.assertTrue(np.allclose(visual, optical @ self.signature.gain[0].T + self.signature.kappa[0], atol=1e-9))

    def test_colored_noise_scale(self):
        noise = colored_noise(np.random.default_rng(0), 2000, 0.1, 1.0)
        self.assertEqual(noise.shape, (2000, 2))
        self.assertTrue(np.allclose(noise.std(axis=0), 0.1))
        self.assertTrue(np.all(colored_noise(np.random.default_rng(0), 50, 0.0, 1.0) == 0))


class TestUsers(unittest.TestCase):

    def test_signature_is_deterministic_and_distinct(self):
        spec = SynthDatasetSpec(master_seed=9)
        a, b = generate_user(spec, 0), generate_user(spec, 0)
        self.assertTrue(np.array_equal(a.kappa, b.kappa))
        self.assertEqual(a.user_id, "u0000")
        self.assertFalse(np.array_equal(a.kappa, generate_user(spec, 1).kappa))
        for u in (a, generate_user(spec, 1)):
            self.assertTrue(np.all(np.linalg.norm(u.kappa, axis=1) <= spec.population.kappa_max + 1e-12))


class TestTaskFactory(unittest.TestCase):

    def test_build(self):
        self.assertIsInstance(TaskFactory.build(TaskSpec(kind="random_saccade")), RandomSaccadeTask)
        self.assertIsInstance(TaskFactory.build(TaskSpec(kind="smooth_pursuit")), SmoothPursuitTask)
        self.assertEqual(TaskFactory.build(TaskSpec(kind="smooth_pursuit")), SmoothPursuitTask(TaskSpec(kind="smooth_pursuit")))
        with self.assertRaises(ConfigError):
            TaskFactory.build(TaskSpec.model_construct(kind="reading"))


class TestDatasetGeneration(unittest.TestCase):

    def test_layout_split_and_tiers(self):
        spec = SynthDatasetSpec(
            n_users=10,
            random_saccade=TaskSpec(kind="random_saccade", duration=5.0),
            smooth_pursuit=TaskSpec(kind="smooth_pursuit", duration=5.0),
        )
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            dataset = generate_dataset(spec, root, threads=3)
            self.assertTrue((root / "manifest.json").is_file())
            self.assertEqual(len(dataset.user_ids), 10)
            for u in dataset.user_ids:
                entries = dataset.user(u).recordings
                self.assertEqual(len(entries), 4)
                for entry in entries:
                    self.assertTrue((root / entry.path).is_file(), entry.path)
            self.assertEqual(len(dataset.manifest.split("train")), 5)
            sizes = Counter(u.tier for u in dataset.manifest.users)
            self.assertEqual(set(sizes), {"low", "mid", "high"})
            self.assertLessEqual(max(sizes.values()) - min(sizes.values()), 1)
            self.assertEqual(dataset.manifest.generator["n_users"], 10)
            rec = dataset.find("u0004", "smooth_pursuit", 2)
            self.assertEqual(rec.n_samples, 360)

            again_root = root / "again"
            generate_dataset(spec, again_root, threads=1)
            self.assertEqual((root / "manifest.json").read_bytes(), (again_root / "manifest.json").read_bytes())
            path = "recordings/u0007/random_saccade_2.csv"
            self.assertEqual((root / path).read_bytes(), (again_root / path).read_bytes())


if __name__ == "__main__":
    unittest.main()
