from collections import Counter

import numpy as np
import pytest

from convclust.errors import DataError
from convclust.labelmap import (
    LabelMap,
    cluster_centers,
    make_palette,
    palette_color,
    render,
    select_background,
    write_centers_csv,
    write_ppm,
)


def reference_hsv_to_rgb(h_deg, s, v):
    """Independent sector-based HSV->RGB (the standard algorithm)."""
    c = v * s
    hp = (h_deg % 360.0) / 60.0
    x = c * (1.0 - abs(hp % 2.0 - 1.0))
    sector = int(hp)
    r, g, b = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)][sector]
    m = v - c
    return tuple(round((u + m) * 255.0) for u in (r, g, b))


class TestPalette:
    def test_k0_reference_value(self):
        assert palette_color(0) == (242, 61, 61)
        assert reference_hsv_to_rgb(0.0, 0.75, 0.95) == (242, 61, 61)

    def test_matches_reference_conversion_for_50_ids(self):
        for k in range(50):
            assert palette_color(k) == reference_hsv_to_rgb(k * 137.508, 0.75, 0.95)

    def test_distinct_over_50_ids(self):
        colors = [palette_color(k) for k in range(50)]
        assert len(set(colors)) == 50

    def test_deterministic(self):
        assert palette_color(13) == palette_color(13)

    def test_negative_id_rejected(self):
        with pytest.raises(ValueError):
            palette_color(-1)

    def test_make_palette_covers_ids(self):
        palette = make_palette(10)
        assert len(palette.colors) == 10
        assert palette.background_color == (128, 128, 128)


def grid_map(labels, background=None, image_index=0):
    return LabelMap(
        image_index=image_index,
        labels=np.asarray(labels, dtype=np.int64),
        background_id=background,
    )


class TestSelectBackground:
    def test_dominant_cluster(self):
        labels = np.full((10, 10), 3)
        labels[0, :5] = 1
        assert select_background(grid_map(labels)) == 3

    def test_tie_goes_to_lowest_id(self):
        labels = np.array([[1, 1, 4, 4]])
        assert select_background(grid_map(labels)) == 1

    def test_matches_histogram_oracle(self, rng):
        for _ in range(20):
            labels = rng.integers(0, 6, size=(9, 7))
            counts = Counter(labels.ravel().tolist())
            best = max(sorted(counts), key=lambda k: counts[k])
            assert select_background(grid_map(labels)) == best


class TestRender:
    def test_constant_grid_uniform_color(self):
        img = render(grid_map(np.zeros((3, 4), dtype=int)), make_palette(1))
        assert img.shape == (3, 4, 3)
        assert np.all(img.reshape(-1, 3) == np.array([242, 61, 61]))

    def test_background_renders_gray(self):
        img = render(grid_map(np.zeros((2, 2), dtype=int), background=0), make_palette(1))
        assert np.all(img.reshape(-1, 3) == np.array([128, 128, 128]))

    def test_checkerboard(self):
        img = render(grid_map([[0, 1], [1, 0]]), make_palette(2))
        c0, c1 = palette_color(0), palette_color(1)
        assert tuple(img[0, 0]) == c0 and tuple(img[1, 1]) == c0
        assert tuple(img[0, 1]) == c1 and tuple(img[1, 0]) == c1

    def test_palette_too_small(self):
        with pytest.raises(DataError, match="palette"):
            render(grid_map([[0, 7]]), make_palette(2))


class TestWritePpm:
    def test_golden_one_pixel_red(self, tmp_path):
        path = tmp_path / "red.ppm"
        write_ppm(np.array([[[255, 0, 0]]], dtype=np.uint8), path)
        assert path.read_bytes() == b"P6\n1 1\n255\n\xff\x00\x00"

    def test_independent_parser_roundtrip(self, tmp_path, rng):
        img = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        path = tmp_path / "t.ppm"
        write_ppm(img, path)
        buf = path.read_bytes()
        # hand-rolled P6 parser
        magic, dims, maxval = buf.split(b"\n", 3)[:3]
        assert magic == b"P6" and maxval == b"255"
        w, h = map(int, dims.split())
        payload = buf.split(b"\n", 3)[3]
        parsed = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
        assert np.array_equal(parsed, img)

    def test_zero_sized_rejected(self, tmp_path):
        with pytest.raises(DataError, match="image"):
            write_ppm(np.zeros((0, 4, 3), dtype=np.uint8), tmp_path / "z.ppm")

    def test_bit_identical_rerenders(self, tmp_path, rng):
        labels = rng.integers(0, 5, size=(6, 6))
        palette = make_palette(5)
        p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        write_ppm(render(grid_map(labels), palette), p1)
        write_ppm(render(grid_map(labels.copy()), palette), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestClusterCenters:
    def test_pixel_center_arithmetic(self):
        labels = np.zeros((4, 5), dtype=int)
        labels[1, 1] = 2
        labels[1, 3] = 2
        centers = cluster_centers(grid_map(labels, background=0), subsample_factor=8)
        assert len(centers) == 1
        c = centers[0]
        assert c.cluster_id == 2
        assert (c.input_row, c.input_col) == (12.0, 20.0)

    def test_single_pixel_factor_one(self):
        labels = np.ones((1, 1), dtype=int) * 5
        centers = cluster_centers(grid_map(labels, background=None), subsample_factor=1)
        assert (centers[0].input_row, centers[0].input_col) == (0.5, 0.5)

    def test_matches_brute_force_averaging(self, rng):
        labels = rng.integers(0, 5, size=(11, 13))
        background = 0
        centers = cluster_centers(grid_map(labels, background=background), subsample_factor=4)
        by_id = {c.cluster_id: c for c in centers}
        present = sorted(set(labels.ravel().tolist()) - {background})
        assert sorted(by_id) == present
        for k in present:
            rows = [r for r in range(11) for q in range(13) if labels[r, q] == k]
            cols = [q for r in range(11) for q in range(13) if labels[r, q] == k]
            want_r = 4 * (sum(rows) / len(rows) + 0.5)
            want_q = 4 * (sum(cols) / len(cols) + 0.5)
            assert abs(by_id[k].input_row - want_r) < 1e-12
            assert abs(by_id[k].input_col - want_q) < 1e-12

    def test_centers_inside_bounding_box(self, rng):
        h, w, s = 6, 9, 8
        labels = rng.integers(0, 4, size=(h, w))
        centers = cluster_centers(grid_map(labels, background=0), subsample_factor=s)
        for c in centers:
            assert 0.0 <= c.input_row <= s * h
            assert 0.0 <= c.input_col <= s * w

    def test_all_background_rejected(self):
        with pytest.raises(DataError, match="background"):
            cluster_centers(grid_map(np.zeros((3, 3), dtype=int), background=0), 8)

    def test_csv_output(self, tmp_path):
        labels = np.zeros((2, 2), dtype=int)
        labels[0, 1] = 1
        centers = cluster_centers(grid_map(labels, background=0), subsample_factor=2)
        path = tmp_path / "centers.csv"
        write_centers_csv(centers, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "image_index,cluster_id,input_row,input_col"
        assert lines[1] == "0,1,1.0,3.0"
