import hashlib
import json

import numpy as np
import pytest

from facepipe.classify import LinearModel, save_model
from facepipe.cli import bench_pooling, run
from facepipe.io import read_embedding_file, write_embedding_file
from facepipe.synth import SyntheticSpec, generate_dataset


@pytest.fixture
def dataset(tmp_path):
    spec = SyntheticSpec(
        classes=3,
        videos_per_class=8,
        frames_per_video=4,
        faces_per_frame=(1, 2),
        dim=8,
        separation=6.0,
        seed=31,
        faceless_fraction=0.1,
    )
    manifest = generate_dataset(spec, tmp_path / "data")
    return tmp_path, manifest


def file_hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def last_json(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


class TestPoolCommand:
    def test_happy_path(self, dataset, capsys):
        tmp_path, manifest = dataset
        out = tmp_path / "d.emb"
        code = run(["pool", "--manifest", str(manifest), "--mode", "single", "--out", str(out)])
        assert code == 0
        info = last_json(capsys)
        assert info["videos"] == 24 and info["descriptor_dim"] == 32
        assert read_embedding_file(out).shape == (24, 32)

    def test_idempotent_byte_identical(self, dataset, capsys):
        tmp_path, manifest = dataset
        a, b = tmp_path / "a.emb", tmp_path / "b.emb"
        assert run(["pool", "--manifest", str(manifest), "--mode", "group", "--out", str(a)]) == 0
        assert run(["pool", "--manifest", str(manifest), "--mode", "group", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_inputs_not_mutated(self, dataset, capsys):
        tmp_path, manifest = dataset
        before = {p: file_hash(p) for p in (tmp_path / "data").rglob("*") if p.is_file()}
        run(["pool", "--manifest", str(manifest), "--mode", "single", "--out", str(tmp_path / "o.emb")])
        after = {p: file_hash(p) for p in (tmp_path / "data").rglob("*") if p.is_file()}
        assert before == after

    def test_missing_embedding_file_exit_1_names_file(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(
            json.dumps(
                {
                    "id": "v",
                    "label": 0,
                    "frames": [[{"box": [0, 0, 1, 1], "file": "absent.emb", "row": 0}]],
                }
            )
            + "\n"
        )
        code = run(["pool", "--manifest", str(manifest), "--mode", "single", "--out", str(tmp_path / "o.emb")])
        assert code == 1
        assert "absent.emb" in capsys.readouterr().err

    def test_no_l2_flag(self, dataset, capsys):
        tmp_path, manifest = dataset
        raw, normed = tmp_path / "raw.emb", tmp_path / "n.emb"
        run(["pool", "--manifest", str(manifest), "--mode", "single", "--out", str(raw), "--no-l2"])
        run(["pool", "--manifest", str(manifest), "--mode", "single", "--out", str(normed)])
        X = read_embedding_file(normed)
        norms = np.linalg.norm(X.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms[norms > 0], 1.0, atol=1e-6)
        assert not np.allclose(read_embedding_file(raw), X)


def train_args(tmp_path, x, y, out, seed="42"):
    return [
        "train-svm", "--x", str(x), "--y", str(y),
        "--lambda", "1e-4", "--epochs", "30", "--seed", seed, "--out", str(out),
    ]


@pytest.fixture
def pooled(dataset, capsys):
    tmp_path, manifest = dataset
    x = tmp_path / "x.emb"
    run(["pool", "--manifest", str(manifest), "--mode", "single", "--out", str(x)])
    capsys.readouterr()
    return tmp_path, x, tmp_path / "data" / "labels.txt"


class TestTrainEval:
    def test_train_then_eval(self, pooled, capsys):
        tmp_path, x, y = pooled
        model = tmp_path / "m.lsvm"
        assert run(train_args(tmp_path, x, y, model)) == 0
        info = last_json(capsys)
        assert info["classes"] == 3 and info["zero_rows_dropped"] >= 1
        assert run(["eval", "--model", str(model), "--x", str(x), "--y", str(y)]) == 0
        report = last_json(capsys)
        assert set(report) == {"accuracy", "confusion", "mae", "mean", "std", "n"}
        assert report["n"] == 24

    def test_subset_valid_only_excludes_zero_rows(self, pooled, capsys):
        tmp_path, x, y = pooled
        model = tmp_path / "m.lsvm"
        run(train_args(tmp_path, x, y, model))
        run(["eval", "--model", str(model), "--x", str(x), "--y", str(y)])
        full = last_json(capsys)
        run(["eval", "--model", str(model), "--x", str(x), "--y", str(y), "--subset-valid-only"])
        sub = last_json(capsys)
        zero_rows = int((~np.any(read_embedding_file(x) != 0, axis=1)).sum())
        assert sub["n"] == full["n"] - zero_rows

    def test_train_idempotent(self, pooled, capsys):
        tmp_path, x, y = pooled
        a, b = tmp_path / "a.lsvm", tmp_path / "b.lsvm"
        run(train_args(tmp_path, x, y, a))
        run(train_args(tmp_path, x, y, b))
        assert a.read_bytes() == b.read_bytes()

    def test_mismatched_labels_exit_1(self, pooled, capsys):
        tmp_path, x, y = pooled
        bad = tmp_path / "bad.txt"
        bad.write_text("0\n1\n")
        assert run(train_args(tmp_path, x, bad, tmp_path / "m.lsvm")) == 1


class TestSevenOfEight:
    def build(self, tmp_path, contempt_index):
        model = LinearModel(weights=np.zeros((8, 4)), biases=np.arange(8.0))
        mp = tmp_path / "m8.lsvm"
        save_model(model, mp)
        X = np.ones((5, 4), dtype=np.float32)
        xp = tmp_path / "x.emb"
        write_embedding_file(X, xp)
        # argmax bias is class 7; after dropping contempt the winner among the
        # retained classes is always the last retained one (index 6)
        yp = tmp_path / "y.txt"
        yp.write_text("6\n" * 5)
        return mp, xp, yp

    @pytest.mark.parametrize("contempt", [0, 7])
    def test_reduced_argmax(self, tmp_path, capsys, contempt):
        mp, xp, yp = self.build(tmp_path, contempt)
        code = run(
            ["eval", "--model", str(mp), "--x", str(xp), "--y", str(yp),
             "--classes-7-of-8", "--contempt-index", str(contempt)]
        )
        assert code == 0
        report = last_json(capsys)
        assert report["accuracy"] == 100.0
        assert len(report["confusion"]) == 7

    def test_contempt_index_required(self, tmp_path, capsys):
        mp, xp, yp = self.build(tmp_path, 0)
        code = run(["eval", "--model", str(mp), "--x", str(xp), "--y", str(yp), "--classes-7-of-8"])
        assert code == 2

    def test_needs_8_class_model(self, tmp_path, capsys):
        model = LinearModel(weights=np.zeros((3, 4)), biases=np.zeros(3))
        mp = tmp_path / "m3.lsvm"
        save_model(model, mp)
        xp = tmp_path / "x.emb"
        write_embedding_file(np.ones((2, 4), dtype=np.float32), xp)
        yp = tmp_path / "y.txt"
        yp.write_text("0\n1\n")
        code = run(["eval", "--model", str(mp), "--x", str(xp), "--y", str(yp),
                    "--classes-7-of-8", "--contempt-index", "2"])
        assert code == 1


class TestAgeCommand:
    def test_expected_ages(self, tmp_path, capsys):
        probs = np.array([[1.0, 0.0, 0.0], [0.25, 0.25, 0.5]], dtype=np.float32)
        pp = tmp_path / "p.emb"
        write_embedding_file(probs, pp)
        ap = tmp_path / "ages.txt"
        ap.write_text("20\n30\n40\n")
        assert run(["age", "--probs", str(pp), "--ages", str(ap), "--top-l", "3"]) == 0
        out = last_json(capsys)
        assert out["predicted"][0] == pytest.approx(20.0)
        assert out["predicted"][1] == pytest.approx(32.5)

    def test_default_top_l_is_all(self, tmp_path, capsys):
        probs = np.array([[0.5, 0.5]], dtype=np.float32)
        pp = tmp_path / "p.emb"
        write_embedding_file(probs, pp)
        ap = tmp_path / "ages.txt"
        ap.write_text("10\n20\n")
        run(["age", "--probs", str(pp), "--ages", str(ap)])
        out = last_json(capsys)
        assert out["top_l"] == 2 and out["predicted"][0] == pytest.approx(15.0)


class TestIdentifyCommand:
    def test_tight_clusters(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        centers = 10 * np.eye(3, 8)
        rows, subj = [], []
        for s in range(3):
            for _ in range(3):
                rows.append(centers[s] + 0.01 * rng.standard_normal(8))
                subj.append(s)
        write_embedding_file(np.asarray(rows, dtype=np.float32), tmp_path / "e.emb")
        (tmp_path / "s.txt").write_text("".join(f"{s}\n" for s in subj))
        code = run(["identify", "--embeddings", str(tmp_path / "e.emb"),
                    "--subjects", str(tmp_path / "s.txt"), "--reps", "5", "--seed", "9"])
        assert code == 0
        report = last_json(capsys)
        assert report["mean"] == 100.0 and report["std"] == 0.0

    def test_subject_with_single_row_exit_1(self, tmp_path, capsys):
        write_embedding_file(np.ones((3, 4), dtype=np.float32), tmp_path / "e.emb")
        (tmp_path / "s.txt").write_text("0\n0\n1\n")
        code = run(["identify", "--embeddings", str(tmp_path / "e.emb"),
                    "--subjects", str(tmp_path / "s.txt"), "--reps", "2", "--seed", "1"])
        assert code == 1


class TestBenchCommand:
    def test_single_repeat_zero_std(self, capsys):
        assert run(["bench", "--frames", "100", "--dim", "16", "--reps", "1"]) == 0
        out = last_json(capsys)
        assert out["std_ms"] == 0.0
        assert out["cores"] >= 1
        assert {"mean_ms", "p95_ms"} <= set(out)

    def test_more_frames_not_faster(self):
        small = min(bench_pooling(2000, 64, 3)["min_ms"] for _ in range(3))
        large = min(bench_pooling(20000, 64, 3)["min_ms"] for _ in range(3))
        assert large >= small


class TestExitCodes:
    def test_unknown_verb_is_usage_error(self, capsys):
        assert run(["frobnicate"]) == 2

    def test_unknown_flag_is_usage_error(self, capsys):
        assert run(["bench", "--frames", "1", "--dim", "1", "--reps", "1", "--bogus"]) == 2

    def test_help_exits_zero(self, capsys):
        assert run(["--help"]) == 0

    def test_malformed_manifest_exit_1(self, tmp_path, capsys):
        p = tmp_path / "m.jsonl"
        p.write_text("{broken\n")
        assert run(["pool", "--manifest", str(p), "--mode", "single", "--out", str(tmp_path / "o")]) == 1
