import json

import numpy as np
import pytest

from convclust.analysis import ari
from convclust.cli import main
from convclust.tensor_io import load_npy, save_npy


def read_truth(path):
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "label"
    return np.array([int(v) for v in lines[1:]])


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_files(tmp_path):
    points = tmp_path / "points.npy"
    truth = tmp_path / "truth.csv"
    code = run(
        "synth", "--k", 3, "--dim", 2, "--n", 600, "--sep", 10, "--sigma", 0.5,
        "--seed", 1, "--out", points, "--truth", truth,
    )
    assert code == 0
    return points, truth


@pytest.fixture
def spatial_file(tmp_path):
    # 2 images, 3 channels, 8x8 pixels; three blocky regions per image
    rng = np.random.default_rng(0)
    base = np.zeros((2, 3, 8, 8))
    base[:, 0, :4, :] = 6.0   # top band strong in channel 0
    base[:, 1, 4:, :4] = 6.0  # lower-left strong in channel 1
    base[:, 2, 4:, 4:] = 6.0  # lower-right strong in channel 2
    tensor = base + rng.normal(0, 0.3, base.shape)
    path = tmp_path / "maps.npy"
    save_npy(tensor, path)
    return path


class TestSynthFitPredict:
    def test_fit_default_flags(self, synth_files, tmp_path, capsys):
        points, _ = synth_files
        model = tmp_path / "model.json"
        code = run(
            "fit", "--input", points, "--mode", "vector",
            "--alpha", 0.2, "--max-components", 50, "--seed", 0, "--out", model,
        )
        assert code == 0
        doc = json.loads(model.read_text())
        assert doc["alpha"] == 0.2
        assert doc["truncation"] == 50
        assert doc["converged"] is True
        # diagnostics went to stderr, nothing on stdout
        captured = capsys.readouterr()
        assert captured.out == ""

    def test_end_to_end_recovery(self, synth_files, tmp_path):
        points, truth_csv = synth_files
        model = tmp_path / "model.json"
        labels_npy = tmp_path / "labels.npy"
        assert run("fit", "--input", points, "--mode", "vector", "--seed", 1, "--out", model) == 0
        assert run(
            "predict", "--model", model, "--input", points, "--mode", "vector",
            "--out", labels_npy,
        ) == 0
        raw = load_npy(labels_npy)
        assert raw.shape == (600, 1)
        labels = raw.ravel().astype(int)
        assert ari(labels, read_truth(truth_csv)) >= 0.95

    def test_report_with_model(self, synth_files, tmp_path):
        points, truth_csv = synth_files
        model = tmp_path / "model.json"
        labels_npy = tmp_path / "labels.npy"
        meta = tmp_path / "meta.csv"
        run("fit", "--input", points, "--mode", "vector", "--seed", 1, "--out", model)
        run("predict", "--model", model, "--input", points, "--mode", "vector", "--out", labels_npy)
        truth = read_truth(truth_csv)
        rows = ["image_id,class_label,patient_id"]
        rows += [f"p{i:04d},{'odd' if t % 2 else 'even'}," for i, t in enumerate(truth)]
        meta.write_text("\n".join(rows) + "\n")
        report = tmp_path / "report.json"
        assert run(
            "report", "--labels", labels_npy, "--meta", meta, "--model", model,
            "--out", report,
        ) == 0
        doc = json.loads(report.read_text())
        assert doc["total_points"] == 600
        assert doc["alpha"] == 0.2
        for cluster in doc["clusters"]:
            assert abs(sum(cluster["composition"].values()) - 1.0) < 1e-9
            assert cluster["expected_weight"] is not None


class TestSpatialPipeline:
    def test_labelmap_and_centers(self, spatial_file, tmp_path):
        model = tmp_path / "model.json"
        ppm = tmp_path / "map.ppm"
        centers = tmp_path / "centers.csv"
        assert run(
            "fit", "--input", spatial_file, "--mode", "spatial",
            "--max-components", 10, "--seed", 0, "--out", model,
        ) == 0
        assert run(
            "labelmap", "--model", model, "--input", spatial_file,
            "--image-index", 0, "--out", ppm,
        ) == 0
        buf = ppm.read_bytes()
        assert buf.startswith(b"P6\n8 8\n255\n")
        assert len(buf) == len(b"P6\n8 8\n255\n") + 8 * 8 * 3

        assert run(
            "centers", "--model", model, "--input", spatial_file,
            "--subsample-factor", 8, "--out", centers,
        ) == 0
        lines = centers.read_text().strip().splitlines()
        assert lines[0] == "image_index,cluster_id,input_row,input_col"
        assert len(lines) > 1
        for line in lines[1:]:
            image_index, cluster_id, row, col = line.split(",")
            assert 0.0 <= float(row) <= 64.0
            assert 0.0 <= float(col) <= 64.0

    def test_background_none_and_explicit(self, spatial_file, tmp_path):
        model = tmp_path / "model.json"
        run("fit", "--input", spatial_file, "--mode", "spatial", "--max-components", 10,
            "--seed", 0, "--out", model)
        out_a = tmp_path / "a.ppm"
        out_b = tmp_path / "b.ppm"
        assert run("labelmap", "--model", model, "--input", spatial_file, "--image-index", 0,
                   "--background", "none", "--out", out_a) == 0
        assert run("labelmap", "--model", model, "--input", spatial_file, "--image-index", 0,
                   "--background", "0", "--out", out_b) == 0
        assert out_a.read_bytes() != out_b.read_bytes()

    def test_image_index_out_of_range(self, spatial_file, tmp_path):
        model = tmp_path / "model.json"
        run("fit", "--input", spatial_file, "--mode", "spatial", "--max-components", 5,
            "--seed", 0, "--out", model)
        assert run("labelmap", "--model", model, "--input", spatial_file,
                   "--image-index", 99, "--out", tmp_path / "x.ppm") == 2


class TestExitCodes:
    def test_missing_required_flag_is_usage_error(self, capsys):
        assert run("fit") == 1
        assert "usage error" in capsys.readouterr().err

    def test_no_subcommand_is_usage_error(self):
        assert run() == 1

    def test_bad_numeric_flag_is_usage_error(self, tmp_path):
        assert run(
            "fit", "--input", tmp_path / "x.npy", "--mode", "vector",
            "--alpha", "-1", "--out", tmp_path / "m.json",
        ) == 1

    def test_malformed_file_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.npy"
        bad.write_bytes(b"garbage")
        assert run("fit", "--input", bad, "--mode", "vector", "--out", tmp_path / "m.json") == 2

    def test_missing_file_is_io_error(self, tmp_path):
        assert run(
            "fit", "--input", tmp_path / "absent.npy", "--mode", "vector",
            "--out", tmp_path / "m.json",
        ) == 2

    def test_spatial_mode_on_rank2_is_data_error(self, synth_files, tmp_path):
        points, _ = synth_files
        assert run(
            "fit", "--input", points, "--mode", "spatial", "--out", tmp_path / "m.json"
        ) == 2

    def test_inputs_never_mutated(self, synth_files, tmp_path):
        points, _ = synth_files
        before = points.read_bytes()
        run("fit", "--input", points, "--mode", "vector", "--seed", 0,
            "--out", tmp_path / "m.json")
        assert points.read_bytes() == before
