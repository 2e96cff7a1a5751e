import filecmp
import json
import os
import shutil

import numpy as np
import pytest

from morphforge.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK,
                            main)
from morphforge.synthetic import write_database


@pytest.fixture(scope="module")
def database(tmp_path_factory):
    root = tmp_path_factory.mktemp("faces")
    manifest = write_database(str(root), 16, seed=0)
    return manifest


def run(argv):
    return main([str(a) for a in argv])


class TestMorphCommand:
    def test_complete_morph_written(self, database, tmp_path):
        out = tmp_path / "m"
        code = run(["morph", "--manifest", database, "--count", "2",
                    "--out-dir", out])
        assert code == EXIT_OK
        pngs = [p for p in os.listdir(out) if p.endswith(".png")]
        assert len(pngs) == 2
        prov = (out / "morphs.jsonl").read_text().splitlines()
        assert len(prov) == 2
        rec = json.loads(prov[0])
        assert rec["regions"] == "----" and rec["method"] in ("triangle", "field")

    def test_partial_morph_regions_flag(self, database, tmp_path):
        out = tmp_path / "p"
        code = run(["morph", "--manifest", database, "--count", "1",
                    "--regions=--N-", "--out-dir", out])
        assert code == EXIT_OK
        rec = json.loads((out / "morphs.jsonl").read_text().splitlines()[0])
        assert rec["regions"] == "--N-"

    def test_pairs_file(self, database, tmp_path):
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("face0000 face0002 field\n")
        out = tmp_path / "pf"
        code = run(["morph", "--manifest", database, "--pairs", pairs,
                    "--out-dir", out])
        assert code == EXIT_OK
        rec = json.loads((out / "morphs.jsonl").read_text().splitlines()[0])
        assert (rec["a"], rec["b"], rec["method"]) == \
            ("face0000", "face0002", "field")

    def test_missing_manifest_exit_data(self, tmp_path):
        code = run(["morph", "--manifest", tmp_path / "none.tsv",
                    "--out-dir", tmp_path / "x"])
        assert code == EXIT_DATA


class TestDatasetCommand:
    def test_naive_composition(self, database, tmp_path):
        out = tmp_path / "ds"
        code = run(["dataset", "--manifest", database, "--regime", "naive",
                    "--total", "8", "--pairs-count", "4", "--no-expand",
                    "--out-dir", out])
        assert code == EXIT_OK
        lines = (out / "samples.tsv").read_text().splitlines()[1:]
        kinds = [ln.split("\t")[0] for ln in lines]
        assert kinds.count("genuine") == 4
        assert kinds.count("complete_morph") == 4
        rendered = (out / "rendered.tsv").read_text().splitlines()[1:]
        assert len(rendered) == 8
        for ln in rendered:
            assert os.path.isfile(out / ln.split("\t")[0])

    def test_expansion_multiplies_by_five(self, database, tmp_path):
        out = tmp_path / "ds5"
        code = run(["dataset", "--manifest", database, "--regime", "naive",
                    "--total", "4", "--pairs-count", "2", "--out-dir", out])
        assert code == EXIT_OK
        rendered = (out / "rendered.tsv").read_text().splitlines()[1:]
        assert len(rendered) == 20

    def test_rerun_byte_identical(self, database, tmp_path):
        args = ["dataset", "--manifest", database, "--regime", "one_region",
                "--total", "6", "--pairs-count", "3", "--no-expand",
                "--seed", "5"]
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        assert run(args + ["--out-dir", out1]) == EXIT_OK
        assert run(args + ["--out-dir", out2]) == EXIT_OK
        assert (out1 / "samples.tsv").read_bytes() == (out2 / "samples.tsv").read_bytes()
        assert (out1 / "rendered.tsv").read_bytes() == (out2 / "rendered.tsv").read_bytes()
        for name in sorted(os.listdir(out1 / "images")):
            assert filecmp.cmp(out1 / "images" / name, out2 / "images" / name,
                               shallow=False), name


@pytest.fixture(scope="module")
def small_dataset(database, tmp_path_factory):
    out = tmp_path_factory.mktemp("rendered")
    code = run(["dataset", "--manifest", database, "--regime", "naive",
                "--total", "12", "--pairs-count", "6", "--no-expand",
                "--crop-size", "16", "--out-dir", out])
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def trained_model(small_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    code = run(["train", "--data", small_dataset, "--epochs", "2",
                "--out-dir", out])
    assert code == EXIT_OK
    return out / "model.bin"


class TestTrainEval:
    def test_train_outputs(self, trained_model):
        assert os.path.isfile(trained_model)
        curve = (trained_model.parent / "loss_curve.tsv").read_text().splitlines()
        assert curve[0] == "epoch\tloss"
        assert len(curve) == 3

    def test_train_deterministic(self, small_dataset, tmp_path):
        outs = []
        for name in ("t1", "t2"):
            out = tmp_path / name
            assert run(["train", "--data", small_dataset, "--epochs", "1",
                        "--out-dir", out]) == EXIT_OK
            outs.append(out)
        assert (outs[0] / "model.bin").read_bytes() == (outs[1] / "model.bin").read_bytes()

    def test_eval_report(self, small_dataset, trained_model, tmp_path):
        out = tmp_path / "ev"
        code = run(["eval", "--model", trained_model, "--data", small_dataset,
                    "--out-dir", out])
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert set(report) == {"tpr", "tnr", "eer"}
        curve = (out / "threshold_curve.tsv").read_text().splitlines()
        assert curve[0] == "threshold\ttpr\ttnr"

    def test_eval_missing_model_exit_data(self, small_dataset, tmp_path):
        code = run(["eval", "--model", tmp_path / "no.bin",
                    "--data", small_dataset, "--out-dir", tmp_path / "e"])
        assert code in (EXIT_DATA, EXIT_CONFIG)

    def test_multiclass_head(self, database, tmp_path):
        ds = tmp_path / "mc"
        assert run(["dataset", "--manifest", database, "--regime", "multiclass",
                    "--total", "10", "--pairs-count", "5", "--no-expand",
                    "--crop-size", "16", "--out-dir", ds]) == EXIT_OK
        out = tmp_path / "mcm"
        assert run(["train", "--data", ds, "--regime", "multiclass",
                    "--epochs", "1", "--out-dir", out]) == EXIT_OK
        from morphforge.nn import load_network
        net = load_network(out / "model.bin")
        assert net.head == "sigmoid"
        assert net.layers[-1].nout == 4


class TestLrpCommand:
    def test_heatmap_and_fractions(self, database, trained_model, tmp_path):
        base = os.path.dirname(database)
        out = tmp_path / "lrp"
        code = run(["lrp", "--model", trained_model,
                    "--image", os.path.join(base, "face0000.png"),
                    "--landmarks", os.path.join(base, "face0000.lms"),
                    "--crop-size", "16", "--no-gate", "--out-dir", out])
        assert code == EXIT_OK
        assert os.path.isfile(out / "heatmap.png")
        assert os.path.isfile(out / "relevance.tsv")
        rel = np.loadtxt(out / "relevance.tsv")
        assert rel.shape == (16, 16)


class TestInspect:
    def test_model_summary(self, trained_model, capsys):
        assert run(["inspect", "--model", trained_model]) == EXIT_OK
        captured = capsys.readouterr().out
        assert "network head=" in captured

    def test_data_summary(self, small_dataset, capsys):
        assert run(["inspect", "--data", small_dataset / "samples.tsv"]) == EXIT_OK
        captured = capsys.readouterr().out
        assert "12 samples" in captured


class TestConfig:
    def test_config_fills_defaults(self, database, tmp_path):
        cfg = tmp_path / "cfg"
        cfg.write_text("total=6\npairs-count=3\nno-expand=true\n")
        out = tmp_path / "dcfg"
        code = run(["--config", cfg, "dataset", "--manifest", database,
                    "--out-dir", out])
        assert code == EXIT_OK
        lines = (out / "samples.tsv").read_text().splitlines()[1:]
        assert len(lines) == 6

    def test_explicit_flag_wins(self, database, tmp_path):
        cfg = tmp_path / "cfg"
        cfg.write_text("total=6\nno-expand=true\n")
        out = tmp_path / "dflag"
        code = run(["--config", cfg, "dataset", "--manifest", database,
                    "--total", "4", "--pairs-count", "2", "--out-dir", out])
        assert code == EXIT_OK
        lines = (out / "samples.tsv").read_text().splitlines()[1:]
        assert len(lines) == 4

    def test_bad_config_exit_config(self, database, tmp_path):
        cfg = tmp_path / "cfg"
        cfg.write_text("this line has no equals sign\n")
        code = run(["--config", cfg, "dataset", "--manifest", database,
                    "--out-dir", tmp_path / "x"])
        assert code == EXIT_CONFIG

    def test_missing_config_exit_config(self, database, tmp_path):
        code = run(["--config", tmp_path / "absent", "dataset",
                    "--manifest", database, "--out-dir", tmp_path / "x"])
        assert code == EXIT_CONFIG


class TestIdentityPipeline:
    def test_identical_pair_morph_is_identity(self, database, tmp_path):
        # morphing a face with itself reproduces the face up to blending
        # round-off; verified end to end through the CLI
        from morphforge.image import load_image
        base = os.path.dirname(database)
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("face0000 face0000 triangle\n")
        out = tmp_path / "ident"
        assert run(["morph", "--manifest", database, "--pairs", pairs,
                    "--out-dir", out]) == EXIT_OK
        name = [p for p in os.listdir(out) if p.endswith(".png")][0]
        morph = load_image(out / name)
        orig = load_image(os.path.join(base, "face0000.png"))
        assert np.abs(morph - orig).max() <= 1.5 / 255.0
