"""Generated fixtures must pass cleanly through the consuming pipeline.

The pipeline is reached only through its external interfaces: the facepipe
console command plus the EMB1/manifest file formats.  Nothing here imports
the consumer's code.
"""

import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from fixturegen.dataset import DatasetSpec, generate

FACEPIPE = shutil.which("facepipe")

pytestmark = pytest.mark.skipif(
    FACEPIPE is None, reason="facepipe CLI not installed in this environment"
)


def facepipe(*args):
    return subprocess.run(
        [FACEPIPE, *map(str, args)], capture_output=True, text=True, timeout=300
    )


@pytest.fixture(scope="module")
def trees(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_trees")
    common = dict(
        classes=3, frames_per_video=6, faces_per_frame=(1, 2),
        dim=16, separation=6.0, faceless_fraction=0.1,
    )
    generate(DatasetSpec(videos_per_class=40, seed=101, **common), root / "train")
    generate(DatasetSpec(videos_per_class=20, seed=202, **common), root / "val")
    return root


class TestLoadsThroughConsumer:
    def test_pool_accepts_generated_tree(self, trees, tmp_path):
        proc = facepipe(
            "pool", "--manifest", trees / "train" / "manifest.jsonl",
            "--mode", "single", "--out", tmp_path / "train.emb",
        )
        assert proc.returncode == 0, proc.stderr
        info = json.loads(proc.stdout)
        assert info["videos"] == 120
        assert info["valid"] == 108  # 10% face-less videos

    def test_group_mode_also_accepted(self, trees, tmp_path):
        proc = facepipe(
            "pool", "--manifest", trees / "val" / "manifest.jsonl",
            "--mode", "group", "--out", tmp_path / "val_group.emb",
        )
        assert proc.returncode == 0, proc.stderr


class TestEndToEndThroughCli:
    def test_pipeline_reaches_advertised_accuracy(self, trees, tmp_path):
        train_x = tmp_path / "train.emb"
        val_x = tmp_path / "val.emb"
        model = tmp_path / "model.lsvm"
        assert facepipe("pool", "--manifest", trees / "train" / "manifest.jsonl",
                        "--mode", "single", "--out", train_x).returncode == 0
        assert facepipe("pool", "--manifest", trees / "val" / "manifest.jsonl",
                        "--mode", "single", "--out", val_x).returncode == 0
        assert facepipe("train-svm", "--x", train_x, "--y", trees / "train" / "labels.txt",
                        "--lambda", "1e-4", "--epochs", "50", "--seed", "42",
                        "--out", model).returncode == 0

        full = facepipe("eval", "--model", model, "--x", val_x,
                        "--y", trees / "val" / "labels.txt")
        subset = facepipe("eval", "--model", model, "--x", val_x,
                          "--y", trees / "val" / "labels.txt", "--subset-valid-only")
        assert full.returncode == 0 and subset.returncode == 0
        full_report = json.loads(full.stdout)
        subset_report = json.loads(subset.stdout)
        assert full_report["accuracy"] >= 90.0
        assert subset_report["accuracy"] >= full_report["accuracy"]
        assert full_report["n"] - subset_report["n"] == 6  # val zero descriptors


class TestPrimarySuiteOnTheseFixtures:
    def test_consumer_acceptance_end_to_end(self, trees):
        acceptance = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
        if not acceptance.exists():
            pytest.skip("consumer test suite not present in this checkout")
        env = dict(os.environ, FACEPIPE_DATASET_ROOT=str(trees))
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", f"{acceptance}::test_criterion_end_to_end", "-q"],
            capture_output=True, text=True, env=env,
            cwd=acceptance.parent.parent, timeout=600,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
